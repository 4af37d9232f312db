"""Command line interface: ``mimo-pareto <command> [options]``.

Commands
--------
keypoints        single-user points, turning points, zero-forcing points and
                 weak-boundary samples
boundary         alternating-algorithm sweep plus key points, Pareto-flagged
iaa              one alternating-algorithm run at a single link-2 target
random-baseline  Pareto envelope of random unit beamformer pairs
balanced         egoistic/altruistic blends on a complex grid and the real
                 egoism-share curve

Without ``--config`` the bundled reference channel is used.
"""

import argparse
import sys

import numpy as np

from . import __version__
from .artifact import BoundaryArtifact, config_hash, dominated_mask, dumps
from .channel import RatePoint, batch_rates, random_unit_vectors, rate_pair
from .config import ConfigError, load_config, reference_config
from .iaa import IaaConfig, run, sweep, sweep_targets
from .keypoints import weak_boundary, key_points, zf_points

DEFAULT_SAMPLES = {"keypoints": 11, "random-baseline": 100_000, "balanced": 100}


def _metadata(cfg, args, **extra):
    meta = {
        "command": args.command,
        "tool_version": __version__,
        "config_source": args.config or "bundled:reference_channels.json",
        "config_hash": config_hash(cfg.channels),
        "seed": args.seed,
    }
    meta.update(extra)
    return meta


def _add_keypoints(art, kp):
    for name in ("su1", "su2", "t1", "t2"):
        art.add("keypoint", getattr(kp, name), label=name)


def cmd_keypoints(cfg, args):
    ch = cfg.channels
    kp = key_points(ch)
    art = BoundaryArtifact()
    _add_keypoints(art, kp)
    zf = zf_points(ch)
    for p in zf:
        art.add("zf", p, label="zf")
    for which in (1, 2):
        for p in weak_boundary(ch, which, args.samples):
            art.add("weak", p, label=f"weak{which}")
    art.metadata = _metadata(cfg, args, r1_bar=kp.r1_bar, r2_bar=kp.r2_bar,
                             r1_under=kp.r1_under, r2_under=kp.r2_under,
                             zf_count=len(zf), zf_diagnostic=zf.diagnostic)
    return art.flagged()


def _iaa_config(args):
    return IaaConfig(epsilon=args.epsilon, max_iters=args.max_iters, rng_seed=args.seed)


def _add_trace(art, t):
    art.add("iaa", t.final, label=f"R2*={t.R2_star:.6g}",
            converged=t.converged, iterations=t.n_iterations)


def cmd_boundary(cfg, args):
    ch = cfg.channels
    kp = key_points(ch)
    traces = sweep(ch, args.targets, _iaa_config(args), workers=args.workers)
    art = BoundaryArtifact()
    _add_keypoints(art, kp)
    failed = []
    for t in traces:
        if t.final is None:
            failed.append({"R2_star": t.R2_star, "status": t.status, "message": t.message})
            continue
        _add_trace(art, t)
        if t.status != "converged":
            failed.append({"R2_star": t.R2_star, "status": t.status, "message": t.message})
    n_conv = sum(t.converged for t in traces)
    art.metadata = _metadata(cfg, args, targets=args.targets, epsilon=args.epsilon,
                             max_iters=args.max_iters, converged_targets=n_conv,
                             flagged_targets=failed)
    if n_conv == 0:
        raise RuntimeError("no target converged")
    return art.flagged()


def cmd_iaa(cfg, args):
    ch = cfg.channels
    kp = key_points(ch)
    if args.r2 is not None:
        R2 = args.r2
    else:
        R2 = kp.r2_under + args.share * (kp.r2_bar - kp.r2_under)
    t = run(ch, R2, _iaa_config(args), kp)
    if t.final is None:
        raise RuntimeError(f"run failed: {t.message}")
    art = BoundaryArtifact()
    _add_trace(art, t)
    art.metadata = _metadata(cfg, args, R2_star=R2, status=t.status,
                             init_stage=t.init.stage if t.init else None,
                             R1_sequence=[float(x) for x in t.R1_sequence],
                             message=t.message)
    return art.flagged()


def random_baseline(ch, n_samples, seed):
    """Rates of ``n_samples`` random unit beamformer pairs (deterministic in ``seed``)."""
    if n_samples < 1:
        raise ValueError("sample count must be at least 1")
    rng = np.random.default_rng(seed)
    W1 = random_unit_vectors(rng, ch.n_t, n_samples)
    W2 = random_unit_vectors(rng, ch.n_t, n_samples)
    R1, R2 = batch_rates(ch, W1, W2)
    return W1, W2, R1, R2


def cmd_random_baseline(cfg, args):
    ch = cfg.channels
    W1, W2, R1, R2 = random_baseline(ch, args.samples, args.seed)
    keep = np.flatnonzero(~dominated_mask(np.column_stack([R1, R2])))
    keep = keep[np.argsort(R2[keep], kind="stable")]
    art = BoundaryArtifact()
    for k in keep:
        art.add("random", RatePoint(R1[k], R2[k], W1[k], W2[k]), label="random")
    stats = {"samples": args.samples, "envelope_size": len(keep),
             "R1_max": float(R1.max()), "R2_max": float(R2.max()),
             "R1_mean": float(R1.mean()), "R2_mean": float(R2.mean()),
             "sum_rate_max": float((R1 + R2).max())}
    art.metadata = _metadata(cfg, args, **stats)
    return art


def _blend(a, b, xa, xb):
    v = xa * a + xb * b
    n = np.linalg.norm(v)
    return None if n <= 1e-12 else v / n


def balanced_cloud(ch, kp, mag_steps, phase_steps):
    """Rate points of complex blends ``xi1 * ego + xi2 * alt`` for both links.

    ``|xi1| = a`` and ``|xi2| = 1 - a`` with ``a`` on an even grid of
    ``mag_steps`` values; the relative phase runs over ``phase_steps``
    values (a common phase does not change rates). Returns the points and
    the number of skipped degenerate blends.
    """
    mags = np.linspace(0.0, 1.0, mag_steps)
    phases = np.exp(2j * np.pi * np.arange(phase_steps) / phase_steps)
    cands = {1: [], 2: []}
    skipped = 0
    for i in (1, 2):
        for a in mags:
            for ph in phases:
                v = _blend(kp.ego(i), kp.alt(i), a, (1.0 - a) * ph)
                if v is None:
                    skipped += 1
                else:
                    cands[i].append(v)
    W1 = np.repeat(np.array(cands[1]), len(cands[2]), axis=0)
    W2 = np.tile(np.array(cands[2]), (len(cands[1]), 1))
    R1, R2 = batch_rates(ch, W1, W2)
    pts = [RatePoint(R1[k], R2[k], W1[k], W2[k]) for k in range(len(R1))]
    return pts, skipped


def zeta_curve(ch, kp, n):
    """Egoism-share curve: ``w2 = blend(zeta)``, ``w1 = blend(1 - zeta)``.

    ``zeta = (k - 1) / n`` for ``k = 1..n+1``; ``zeta = 0`` is the first
    turning point and ``zeta = 1`` the second.
    """
    pts, skipped = [], 0
    for z in np.arange(n + 1) / n:
        w2 = _blend(kp.w2_ego, kp.w2_alt, z, 1.0 - z)
        w1 = _blend(kp.w1_ego, kp.w1_alt, 1.0 - z, z)
        if w1 is None or w2 is None:
            skipped += 1
            continue
        pts.append(rate_pair(ch, w1, w2))
    return pts, skipped


def cmd_balanced(cfg, args):
    ch = cfg.channels
    kp = key_points(ch)
    if args.samples < 1 or args.mag_steps < 2 or args.phase_steps < 1:
        raise ValueError("grid sizes must be positive (at least 2 magnitude steps)")
    art = BoundaryArtifact()
    zeta_pts, z_skip = zeta_curve(ch, kp, args.samples)
    for p in zeta_pts:
        art.add("balanced", p, label="zeta")
    cloud, c_skip = balanced_cloud(ch, kp, args.mag_steps, args.phase_steps)
    for p in cloud:
        art.add("balanced", p, label="xi")
    art.metadata = _metadata(cfg, args, zeta_steps=args.samples, mag_steps=args.mag_steps,
                             phase_steps=args.phase_steps, skipped=z_skip + c_skip)
    return art.flagged()


COMMANDS = {
    "keypoints": cmd_keypoints,
    "boundary": cmd_boundary,
    "iaa": cmd_iaa,
    "random-baseline": cmd_random_baseline,
    "balanced": cmd_balanced,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="mimo-pareto", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="channel configuration JSON (default: bundled reference)")
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int, default=0)
        if name in DEFAULT_SAMPLES:
            p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES[name],
                           help={"keypoints": "weak-boundary samples per segment",
                                 "random-baseline": "random beamformer pairs",
                                 "balanced": "steps N of the egoism-share grid"}[name])
        if name in ("boundary", "iaa"):
            p.add_argument("--epsilon", type=float, default=1e-4)
            p.add_argument("--max-iters", type=int, default=100)
        if name == "boundary":
            p.add_argument("--targets", type=int, default=49)
            p.add_argument("--workers", type=int, default=1)
        if name == "iaa":
            g = p.add_mutually_exclusive_group()
            g.add_argument("--r2", type=float, help="link-2 rate target")
            g.add_argument("--share", type=float, default=0.55,
                           help="target as a fraction of the strict-boundary R2 range")
        if name == "balanced":
            p.add_argument("--mag-steps", type=int, default=11)
            p.add_argument("--phase-steps", type=int, default=8)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else reference_config()
        art = COMMANDS[args.command](cfg, args)
    except (ConfigError, OSError) as exc:
        print(f"mimo-pareto: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"mimo-pareto: {args.command} failed: {exc}", file=sys.stderr)
        return 1
    text = dumps(art, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
