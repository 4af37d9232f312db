"""JSON run configuration: schema parsing and validation.

Schema (all keys at the top level)::

    {
      "H11": [[[re, im], ...], ...],   # row-major, N_R rows of N_T entries
      "H12": ..., "H21": ..., "H22": ...,
      "snr_db": 10                      # or "sigma1_sq" and "sigma2_sq"
    }

Providing both ``snr_db`` and noise powers is an error. A matrix may also be
given as an object ``{"re": [[...]], "im": [[...]]}``. Unknown keys such as
``description`` are ignored. Instead of inline matrices, ``"channels"`` may
name another JSON file holding them (resolved relative to the config file).
"""

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .channel import ChannelSet

MATRIX_KEYS = ("H11", "H12", "H21", "H22")
REFERENCE_CONFIG = "reference_channels.json"


class ConfigError(ValueError):
    """Schema or validation problem in a run configuration."""


@dataclass(frozen=True)
class RunConfig:
    channels: ChannelSet
    snr_db: float | None = None
    source: str = "<inline>"
    raw: dict | None = None


def _parse_matrix(value, name):
    if isinstance(value, dict):
        try:
            re_part = np.asarray(value["re"], dtype=float)
            im_part = np.asarray(value.get("im", np.zeros_like(re_part)), dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"field {name!r}: expected {{'re': ..., 'im': ...}}") from exc
        if re_part.shape != im_part.shape or re_part.ndim != 2:
            raise ConfigError(f"field {name!r}: real and imaginary parts must be equal-shape 2-D arrays")
        return re_part + 1j * im_part
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r}: entries must be [re, im] number pairs") from exc
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ConfigError(
            f"field {name!r}: expected rows of [re, im] pairs (shape R x C x 2), got shape {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def parse_config(data, source="<inline>", base_dir=None):
    """Validate a decoded JSON object and build a :class:`RunConfig`."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    if "channels" in data and not all(k in data for k in MATRIX_KEYS):
        ref = Path(data["channels"])
        if base_dir is not None and not ref.is_absolute():
            ref = Path(base_dir) / ref
        inner = _read_json(ref)
        merged = {**inner, **{k: v for k, v in data.items() if k != "channels"}}
        return parse_config(merged, source, ref.parent)
    missing = [k for k in MATRIX_KEYS if k not in data]
    if missing:
        raise ConfigError(f"missing field(s): {', '.join(missing)}")
    mats = {k: _parse_matrix(data[k], k) for k in MATRIX_KEYS}
    has_snr = "snr_db" in data
    has_noise = "sigma1_sq" in data or "sigma2_sq" in data
    if has_snr and has_noise:
        raise ConfigError("give either snr_db or the noise powers sigma1_sq/sigma2_sq, not both")
    try:
        if has_snr:
            snr_db = float(data["snr_db"])
            ch = ChannelSet.from_snr_db(*(mats[k] for k in MATRIX_KEYS), snr_db)
        elif "sigma1_sq" in data and "sigma2_sq" in data:
            snr_db = None
            ch = ChannelSet(*(mats[k] for k in MATRIX_KEYS),
                            float(data["sigma1_sq"]), float(data["sigma2_sq"]))
        else:
            raise ConfigError("field 'snr_db' (or both 'sigma1_sq' and 'sigma2_sq') is required")
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid channel data: {exc}") from exc
    return RunConfig(ch, snr_db, source, data)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc


def load_config(path):
    """Read and validate a configuration file."""
    path = Path(path)
    return parse_config(_read_json(path), str(path), path.parent)


def reference_config_path():
    return resources.files("mimo_pareto") / "data" / REFERENCE_CONFIG


def reference_config():
    """The bundled 2x3 reference channel at 10 dB SNR."""
    with resources.as_file(reference_config_path()) as p:
        return load_config(p)


def reference_channels():
    return reference_config().channels


def channel_to_json(ch):
    """Serialize a channel set in the config schema (noise powers explicit)."""
    out = {}
    for k in MATRIX_KEYS:
        M = getattr(ch, k)
        out[k] = [[[float(z.real), float(z.imag)] for z in row] for row in M]
    out["sigma1_sq"] = ch.sigma1_sq
    out["sigma2_sq"] = ch.sigma2_sq
    return out
