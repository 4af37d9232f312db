import json
import re
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_pareto import load_config
from mimo_pareto.artifact import (
    BoundaryArtifact,
    TaggedPoint,
    dominated_mask,
    from_csv,
    load,
    loads,
    recompute_errors,
    to_csv,
    to_json,
)
from mimo_pareto.channel import RatePoint, rate_pair
from mimo_pareto.cli import balanced_cloud, main, random_baseline, zeta_curve
from mimo_pareto.config import ConfigError, channel_to_json, parse_config, reference_config

from oracles import dominated_bruteforce

SOURCE_LISTING = Path(__file__).resolve().parents[1] / "paper.md"


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def identity_config(**extra):
    I = [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]
    return {"H11": I, "H12": I, "H21": I, "H22": I, **extra}


def run_cli(*argv):
    return main([str(a) for a in argv])


# ---------------------------------------------------------------------------
# configuration


class TestConfig:
    def test_identity_snr(self, tmp_path):
        cfg = load_config(write_config(tmp_path, identity_config(snr_db=10)))
        assert cfg.channels.sigma1_sq == pytest.approx(0.1)
        assert cfg.snr_db == 10

    def test_explicit_noise(self):
        cfg = parse_config(identity_config(sigma1_sq=0.5, sigma2_sq=0.25))
        assert (cfg.channels.sigma1_sq, cfg.channels.sigma2_sq) == (0.5, 0.25)

    def test_noise_and_snr_exclusive(self):
        with pytest.raises(ConfigError, match="not both"):
            parse_config(identity_config(snr_db=10, sigma1_sq=0.1, sigma2_sq=0.1))

    def test_missing_field_named(self):
        data = identity_config(snr_db=10)
        del data["H21"]
        with pytest.raises(ConfigError, match="H21"):
            parse_config(data)

    def test_bad_entries_named(self):
        data = identity_config(snr_db=10)
        data["H12"] = [[1, 2], [3, 4]]
        with pytest.raises(ConfigError, match="H12"):
            parse_config(data)

    def test_dimension_mismatch(self):
        data = identity_config(snr_db=10)
        data["H22"] = [[[1, 0], [0, 0], [0, 0]], [[0, 0], [1, 0], [0, 0]]]
        with pytest.raises(ConfigError, match="shape"):
            parse_config(data)

    def test_noise_required(self):
        with pytest.raises(ConfigError, match="snr_db"):
            parse_config(identity_config())

    def test_re_im_form_and_file_reference(self, tmp_path):
        mats = {k: {"re": [[1, 0], [0, 1]], "im": [[0, 0], [0, 0]]} for k in ("H11", "H12", "H21", "H22")}
        write_config(tmp_path, mats, "mats.json")
        cfg = load_config(write_config(tmp_path, {"channels": "mats.json", "snr_db": 0}))
        np.testing.assert_allclose(cfg.channels.H11, np.eye(2))
        assert cfg.channels.sigma2_sq == pytest.approx(1.0)

    def test_invalid_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(p)

    def test_round_trip_through_schema(self):
        ch = reference_config().channels
        again = parse_config(channel_to_json(ch)).channels
        np.testing.assert_array_equal(again.H12, ch.H12)

    def test_reference_first_entry(self):
        ch = reference_config().channels
        assert ch.H11[0, 0] == pytest.approx(-0.3034 + 1.9096j, abs=1e-12)
        assert ch.sigma1_sq == pytest.approx(0.1)

    @pytest.mark.skipif(not SOURCE_LISTING.exists(), reason="source listing not available")
    def test_reference_matrices_transcribed_verbatim(self):
        """Every entry of the bundled matrices equals the published listing."""
        text = SOURCE_LISTING.read_text()
        ch = reference_config().channels
        for name in ("11", "12", "21", "22"):
            m = re.search(r"\\boldsymbol\{H\}_\{" + name + r"\}=.*?\\begin\{pmatrix\}(.*?)\\end\{pmatrix\}",
                          text, re.S)
            rows = [r for r in m.group(1).split("\\\\") if r.strip()]
            listing = np.array([[complex(e.replace(" ", "").replace("\n", "").replace("i", "j"))
                                 for e in r.split("&")] for r in rows])
            np.testing.assert_array_equal(getattr(ch, "H" + name), listing)


# ---------------------------------------------------------------------------
# artifact plumbing


def make_artifact(rng, n=20, n_t=3):
    art = BoundaryArtifact(metadata={"seed": 1})
    for _ in range(n):
        w1 = rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)
        w2 = rng.standard_normal(n_t) + 1j * rng.standard_normal(n_t)
        art.add("random", RatePoint(*rng.uniform(0, 5, 2), w1, w2), converged=bool(rng.integers(2)),
                iterations=int(rng.integers(10)))
    return art


class TestParetoFlag:
    @settings(max_examples=80, deadline=None)
    @given(pts=st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), min_size=0, max_size=30))
    def test_matches_bruteforce(self, pts):
        # small integer grids produce many ties and duplicates
        rates = np.array(pts, dtype=float).reshape(-1, 2)
        np.testing.assert_array_equal(dominated_mask(rates), dominated_bruteforce(rates))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_idempotent_and_consistent(self, seed):
        art = make_artifact(np.random.default_rng(seed)).flagged()
        again = art.flagged()
        assert [p.dominated for p in art.points] == [p.dominated for p in again.points]
        env = [(p.R1, p.R2) for p in art.envelope()]
        assert not dominated_bruteforce(env).any()

    def test_unknown_tag_rejected(self):
        with pytest.raises(ValueError, match="unknown tag"):
            TaggedPoint("wmmse", 0, 0, np.zeros(2), np.zeros(2))


class TestSerialization:
    def test_csv_round_trip_exact(self):
        art = make_artifact(np.random.default_rng(0)).flagged()
        back = from_csv(to_csv(art))
        assert back.metadata == art.metadata
        for p, q in zip(art.points, back.points):
            assert (p.tag, p.R1, p.R2, p.converged, p.iterations, p.dominated) == \
                (q.tag, q.R1, q.R2, q.converged, q.iterations, q.dominated)
            np.testing.assert_array_equal(p.w1, q.w1)
            np.testing.assert_array_equal(p.w2, q.w2)

    def test_json_round_trip_exact(self):
        art = make_artifact(np.random.default_rng(1)).flagged()
        text = to_json(art)
        json.loads(text)
        back = loads(text)
        for p, q in zip(art.points, back.points):
            assert (p.R1, p.R2) == (q.R1, q.R2)
            np.testing.assert_array_equal(p.w2, q.w2)

    def test_csv_header_layout(self):
        art = make_artifact(np.random.default_rng(2), n=1, n_t=2)
        header = [l for l in to_csv(art).splitlines() if not l.startswith("#")][0].split(",")
        assert header[:3] == ["tag", "R1", "R2"] and header[-3:] == ["converged", "iterations", "dominated"]
        assert len(header) == 3 + 4 * 2 + 3

    def test_non_finite_metadata_is_valid_json(self):
        art = BoundaryArtifact(metadata={"x": float("nan")})
        assert json.loads(to_json(art))["metadata"]["x"] == "nan"


# ---------------------------------------------------------------------------
# commands


class TestCommands:
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_keypoints_self_certifying(self, tmp_path, ref_channel, fmt):
        out = tmp_path / f"kp.{fmt}"
        assert run_cli("keypoints", "--out", out, "--format", fmt) == 0
        art = load(out)
        assert np.max(recompute_errors(art, ref_channel)) <= 1e-9
        labels = {p.tag for p in art.points}
        assert labels == {"keypoint", "zf", "weak"}
        md = art.metadata
        assert md["r2_under"] == pytest.approx(5.4954, abs=5e-4)
        assert md["command"] == "keypoints" and len(md["config_hash"]) == 64

    def test_keypoints_without_cross_talk(self, tmp_path):
        Z = [[[0, 0], [0, 0]], [[0, 0], [0, 0]]]
        data = identity_config(snr_db=10)
        data["H12"] = data["H21"] = Z
        out = tmp_path / "kp.json"
        assert run_cli("keypoints", "--config", write_config(tmp_path, data), "--out", out,
                       "--format", "json") == 0
        art = load(out)
        kp = [p for p in art.points if p.tag == "keypoint"]
        corner = max(p.R1 for p in kp)
        # both turning points collapse onto the rectangle corner
        assert sum(1 for p in kp if p.R1 == pytest.approx(corner) and p.R2 == pytest.approx(corner)) == 2

    def test_boundary_single_target(self, tmp_path, ref_channel):
        out = tmp_path / "b.csv"
        assert run_cli("boundary", "--targets", 1, "--out", out) == 0
        art = load(out)
        tags = [p.tag for p in art.points]
        assert tags.count("iaa") == 1 and tags.count("keypoint") == 4
        iaa = [p for p in art.points if p.tag == "iaa"][0]
        assert iaa.converged and iaa.iterations >= 2
        assert np.max(recompute_errors(art, ref_channel)) <= 1e-9
        env = [(p.R1, p.R2) for p in art.points if not p.dominated]
        assert not dominated_bruteforce(env).any()

    def test_iaa_command(self, tmp_path):
        out = tmp_path / "i.json"
        assert run_cli("iaa", "--r2", 6.2898, "--out", out, "--format", "json") == 0
        art = load(out)
        assert art.points[0].R2 == pytest.approx(6.2898, abs=1e-6)
        seq = art.metadata["R1_sequence"]
        assert all(b >= a - 1e-9 for a, b in zip(seq, seq[1:]))

    def test_iaa_target_out_of_range(self, capsys):
        assert run_cli("iaa", "--r2", 9.0) == 1
        assert "strictly inside" in capsys.readouterr().err

    def test_bad_config_exit_code(self, tmp_path, capsys):
        assert run_cli("keypoints", "--config", tmp_path / "missing.json") == 2
        assert "configuration error" in capsys.readouterr().err

    def test_random_baseline_deterministic(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run_cli("random-baseline", "--samples", 2000, "--seed", 5, "--out", a) == 0
        assert run_cli("random-baseline", "--samples", 2000, "--seed", 5, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()
        art = load(a)
        assert art.metadata["samples"] == 2000 and len(art.points) == art.metadata["envelope_size"]
        assert not any(p.dominated for p in art.points)

    def test_random_single_sample(self, ref_channel):
        W1, W2, R1, R2 = random_baseline(ref_channel, 1, 3)
        again = random_baseline(ref_channel, 1, 3)
        assert (R1[0], R2[0]) == (again[2][0], again[3][0])
        p = rate_pair(ref_channel, W1[0] * 1j, W2[0] * np.exp(0.3j))
        assert (p.R1, p.R2) == pytest.approx((R1[0], R2[0]), rel=1e-12)
        with pytest.raises(ValueError):
            random_baseline(ref_channel, 0, 0)

    def test_boundary_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            assert run_cli("boundary", "--targets", 2, "--format", "json", "--out", p) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_balanced(self, tmp_path, ref_channel, ref_keypoints):
        out = tmp_path / "bal.json"
        assert run_cli("balanced", "--out", out, "--format", "json") == 0
        art = load(out)
        zeta = [p for p in art.points if p.label == "zeta"]
        assert len(zeta) == 101
        assert (zeta[0].R1, zeta[0].R2) == pytest.approx(ref_keypoints.t1.rates, abs=1e-9)
        assert (zeta[-1].R1, zeta[-1].R2) == pytest.approx(ref_keypoints.t2.rates, abs=1e-9)
        assert art.metadata["skipped"] == 0
        assert np.max(recompute_errors(art, ref_channel)) <= 1e-9

    def test_complex_blends_fall_short_of_alternating_envelope(self, ref_channel, ref_keypoints, ref_sweep):
        pts, _ = balanced_cloud(ref_channel, ref_keypoints, 11, 8)
        r = np.array([[p.R1, p.R2] for p in pts])
        env = r[~dominated_mask(r)]
        env = env[np.argsort(env[:, 1])]
        gaps = [t.final.R1 - np.interp(t.final.R2, env[:, 1], env[:, 0]) for t in ref_sweep]
        assert max(gaps) > 0.05

    def test_zeta_curve_skips_nothing_on_reference(self, ref_channel, ref_keypoints):
        pts, skipped = zeta_curve(ref_channel, ref_keypoints, 4)
        assert len(pts) == 5 and skipped == 0
