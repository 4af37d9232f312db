"""Tagged rate points, Pareto flagging and CSV/JSON serialization.

CSV layout (one row per point)::

    tag,R1,R2,w1_re0,w1_im0,...,w2_re0,w2_im0,...,converged,iterations,dominated

``converged`` and ``iterations`` are empty for points that do not come from
an iterative solve. Metadata is written as leading ``# key: value`` lines.
JSON files hold ``{"metadata": {...}, "points": [...]}`` with every float
printed to 17 significant digits.
"""

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import rate_pair
from .config import channel_to_json

TAGS = ("keypoint", "weak", "zf", "iaa", "random", "balanced")


@dataclass(frozen=True)
class TaggedPoint:
    tag: str
    R1: float
    R2: float
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    converged: bool | None = None
    iterations: int | None = None
    dominated: bool = False
    label: str = ""  # finer provenance, e.g. "su1" or "zeta" (JSON only)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}; expected one of {TAGS}")


@dataclass
class BoundaryArtifact:
    points: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, tag, point, label="", converged=None, iterations=None):
        self.points.append(TaggedPoint(tag, float(point.R1), float(point.R2),
                                       np.asarray(point.w1, dtype=complex),
                                       np.asarray(point.w2, dtype=complex),
                                       converged, iterations, False, label))

    def rates(self):
        return np.array([[p.R1, p.R2] for p in self.points]).reshape(-1, 2)

    def envelope(self):
        """Points not flagged as dominated, sorted by ``R2``."""
        kept = [p for p in self.points if not p.dominated]
        return sorted(kept, key=lambda p: (p.R2, -p.R1))

    def flagged(self):
        """Copy with ``dominated`` recomputed over all points."""
        flags = dominated_mask(self.rates())
        pts = [replace(p, dominated=bool(f)) for p, f in zip(self.points, flags)]
        return BoundaryArtifact(pts, dict(self.metadata))


def dominated_mask(rates):
    """Flag points strictly dominated by some other point.

    ``q`` dominates ``p`` when it is at least as good in both rates and
    better in one. Exact duplicates do not dominate each other.
    """
    rates = np.asarray(rates, dtype=float).reshape(-1, 2)
    n = len(rates)
    mask = np.zeros(n, dtype=bool)
    if n == 0:
        return mask
    order = np.lexsort((-rates[:, 1], -rates[:, 0]))  # R1 desc, then R2 desc
    best_prev = -math.inf  # max R2 over strictly larger R1
    i = 0
    while i < n:
        j = i
        r1 = rates[order[i], 0]
        while j < n and rates[order[j], 0] == r1:
            j += 1
        group = order[i:j]
        top = rates[group[0], 1]
        for k in group:
            r2 = rates[k, 1]
            mask[k] = best_prev >= r2 or top > r2
        best_prev = max(best_prev, top)
        i = j
    return mask


def config_hash(ch):
    blob = json.dumps(channel_to_json(ch), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def recompute_errors(artifact, ch):
    """Max absolute difference between stored and recomputed rates, per point."""
    out = []
    for p in artifact.points:
        q = rate_pair(ch, p.w1, p.w2)
        out.append(max(abs(q.R1 - p.R1), abs(q.R2 - p.R2)))
    return np.array(out)


# ---------------------------------------------------------------------------
# JSON


def _fmt(x):
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isfinite(x):
            return format(x, ".17g")
        return json.dumps(str(x))  # keep the file strict JSON
    if isinstance(x, str):
        return json.dumps(x)
    if isinstance(x, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_fmt(v)}" for k, v in x.items()) + "}"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _vec_pairs(w):
    return [[float(z.real), float(z.imag)] for z in w]


def _point_dict(p):
    return {"tag": p.tag, "label": p.label, "R1": p.R1, "R2": p.R2,
            "w1": _vec_pairs(p.w1), "w2": _vec_pairs(p.w2),
            "converged": p.converged, "iterations": p.iterations, "dominated": p.dominated}


def to_json(artifact):
    lines = ["{", f'  "metadata": {_fmt(artifact.metadata)},', '  "points": [']
    body = [f"    {_fmt(_point_dict(p))}" for p in artifact.points]
    lines.append(",\n".join(body))
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def _vec_from_pairs(pairs):
    a = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return a[:, 0] + 1j * a[:, 1]


def from_json(text):
    data = json.loads(text)
    pts = [TaggedPoint(d["tag"], float(d["R1"]), float(d["R2"]),
                       _vec_from_pairs(d["w1"]), _vec_from_pairs(d["w2"]),
                       d.get("converged"), d.get("iterations"),
                       bool(d.get("dominated", False)), d.get("label", ""))
           for d in data["points"]]
    return BoundaryArtifact(pts, data.get("metadata", {}))


# ---------------------------------------------------------------------------
# CSV


def csv_header(n_t):
    cols = ["tag", "R1", "R2"]
    for name in ("w1", "w2"):
        for k in range(n_t):
            cols += [f"{name}_re{k}", f"{name}_im{k}"]
    return cols + ["converged", "iterations", "dominated"]


def _opt(x):
    return "" if x is None else str(int(x))


def to_csv(artifact):
    buf = io.StringIO()
    for k, v in artifact.metadata.items():
        buf.write(f"# {k}: {json.dumps(v, sort_keys=True)}\n")
    n_t = len(artifact.points[0].w1) if artifact.points else 0
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(csv_header(n_t))
    for p in artifact.points:
        row = [p.tag, format(p.R1, ".17g"), format(p.R2, ".17g")]
        for w in (p.w1, p.w2):
            for z in w:
                row += [format(z.real, ".17g"), format(z.imag, ".17g")]
        row += [_opt(p.converged), _opt(p.iterations), str(int(p.dominated))]
        writer.writerow(row)
    return buf.getvalue()


def from_csv(text):
    meta, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition(": ")
            meta[key] = json.loads(val)
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        return BoundaryArtifact([], meta)
    header, rows = rows[0], rows[1:]
    n_t = (len(header) - 6) // 4
    pts = []
    for r in rows:
        vals = [float(x) for x in r[3:3 + 4 * n_t]]
        w = np.array(vals[0::2]) + 1j * np.array(vals[1::2])
        c, it = r[-3], r[-2]
        pts.append(TaggedPoint(r[0], float(r[1]), float(r[2]), w[:n_t], w[n_t:],
                               None if c == "" else bool(int(c)),
                               None if it == "" else int(it), bool(int(r[-1]))))
    return BoundaryArtifact(pts, meta)


def dumps(artifact, fmt="csv"):
    if fmt == "csv":
        return to_csv(artifact)
    if fmt == "json":
        return to_json(artifact)
    raise ValueError(f"unknown format {fmt!r}")


def loads(text, fmt=None):
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "csv"
    return from_json(text) if fmt == "json" else from_csv(text)


def load(path):
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
