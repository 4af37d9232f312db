"""Closed-form key points of the rate region and the initialization maps.

Single-user points, turning points, the weak boundary segments,
zero-forcing points, and the two egoistic/altruistic blends used to seed
the alternating algorithm.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .channel import RatePoint, rate, rate_pair, random_unit_vectors, effective_channel_matrix
from .linalg import (
    RANK_RTOL,
    canonical_phase,
    direction,
    eigh,
    generalized_eigh,
    hermitian_part,
    orth_projectors,
)
from .subproblems import feasibility_check_w2

ZF_RESIDUAL_TOL = 1e-8
RANDOM_INIT_CAP = 10_000
DEFAULT_NU_STEPS = 20


def _align_to(w, ref):
    """Rotate ``w`` so that ``ref^H w`` is real and nonnegative."""
    c = np.vdot(ref, w)
    if abs(c) <= 1e-14:
        return canonical_phase(w)
    return w * (abs(c) / c)


def egoistic(ch, i):
    """Own-rate-maximizing beamformer of link ``i`` and the rate it reaches.

    Returns
    -------
    w : ndarray
        Top right-singular direction of ``H_ii`` (phase fixed so that the
        largest entry is real positive).
    r_bar : float
        ``log2(1 + lambda_max(H_ii^H H_ii) / sigma_i^2)``.
    """
    H = ch.direct(i)
    if not np.any(H):
        raise ValueError(f"direct channel H{i}{i} is zero")
    vals, vecs = eigh(H.conj().T @ H)
    return canonical_phase(vecs[:, 0]), rate(vals[0] / ch.noise(i))


def interference_direction(ch, i, w_other):
    """``H_ki^H H_kk w_k`` with ``k`` the other link: ``w_i`` must be orthogonal
    to it so that transmitter ``i`` leaves receiver ``k`` interference free."""
    k = 3 - i
    return ch.cross(k).conj().T @ (ch.direct(k) @ np.asarray(w_other, dtype=complex))


def _negligible(x, ch, i):
    k = 3 - i
    scale = np.linalg.norm(ch.cross(k)) * np.linalg.norm(ch.direct(k))
    return np.linalg.norm(x) <= RANK_RTOL * max(scale, 1e-300)


def altruistic(ch, i):
    """Best beamformer of link ``i`` that causes no interference at the other receiver.

    The other transmitter is held at its egoistic beamformer. The rate of
    link ``i`` is maximized over the unit vectors orthogonal to
    :func:`interference_direction`, which is a generalized eigenproblem
    against the complement projector. Without cross-talk the constraint is
    vacuous and the egoistic beamformer is returned.
    """
    k = 3 - i
    w_ego_i, _ = egoistic(ch, i)
    w_ego_k, _ = egoistic(ch, k)
    x = interference_direction(ch, i, w_ego_k)
    if _negligible(x, ch, i):
        return w_ego_i
    _, P_perp = orth_projectors(x)
    A = effective_channel_matrix(ch, i, w_ego_k)
    B = hermitian_part(P_perp @ A @ P_perp)
    pairs = generalized_eigh(B, P_perp)
    w = direction(P_perp @ pairs.vectors[:, 0])
    return _align_to(w, w_ego_i)


@dataclass(frozen=True)
class KeyPointSet:
    """Single-user points, turning points, and the four rate extremes."""

    su1: RatePoint
    su2: RatePoint
    t1: RatePoint
    t2: RatePoint
    r1_bar: float
    r2_bar: float
    r1_under: float
    r2_under: float
    w1_ego: np.ndarray = field(repr=False)
    w2_ego: np.ndarray = field(repr=False)
    w1_alt: np.ndarray = field(repr=False)
    w2_alt: np.ndarray = field(repr=False)

    def ego(self, i):
        return self.w1_ego if i == 1 else self.w2_ego

    def alt(self, i):
        return self.w1_alt if i == 1 else self.w2_alt


def turning_point(ch, which):
    """Turning point ``T1`` (``which=1``) or ``T2`` (``which=2``).

    ``T1`` pairs the egoistic ``w1`` with the altruistic ``w2``; ``T2`` is
    the mirror image.
    """
    if which == 1:
        return rate_pair(ch, egoistic(ch, 1)[0], altruistic(ch, 2))
    if which == 2:
        return rate_pair(ch, altruistic(ch, 1), egoistic(ch, 2)[0])
    raise ValueError(f"which must be 1 or 2, got {which!r}")


def key_points(ch):
    """All closed-form extremes of the region in one pass."""
    w1e, r1b = egoistic(ch, 1)
    w2e, r2b = egoistic(ch, 2)
    w1a, w2a = altruistic(ch, 1), altruistic(ch, 2)
    zero = np.zeros(ch.n_t, dtype=complex)
    t1 = rate_pair(ch, w1e, w2a)
    t2 = rate_pair(ch, w1a, w2e)
    return KeyPointSet(
        su1=rate_pair(ch, w1e, zero),
        su2=rate_pair(ch, zero, w2e),
        t1=t1,
        t2=t2,
        r1_bar=r1b,
        r2_bar=r2b,
        r1_under=t2.R1,
        r2_under=t1.R2,
        w1_ego=w1e,
        w2_ego=w2e,
        w1_alt=w1a,
        w2_alt=w2a,
    )


def weak_boundary(ch, which, n_samples):
    """Samples of the weak boundary segment ending at turning point ``which``.

    The altruistic beamformer of the non-egoistic link is scaled by
    ``sqrt(gamma)`` for ``gamma`` uniform on ``[0, 1]``; rates are evaluated
    exactly. Since that beamformer creates no interference, its SINR is
    linear in ``gamma``: ``R = log2(1 + gamma (2^R_under - 1))``.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")
    if which not in (1, 2):
        raise ValueError(f"which must be 1 or 2, got {which!r}")
    if which == 1:
        w_fixed, w_alt = egoistic(ch, 1)[0], altruistic(ch, 2)
    else:
        w_fixed, w_alt = egoistic(ch, 2)[0], altruistic(ch, 1)
    points = []
    for g in np.linspace(0.0, 1.0, n_samples):
        w = np.sqrt(g) * w_alt
        pair = (w_fixed, w) if which == 1 else (w, w_fixed)
        points.append(rate_pair(ch, *pair))
    return points


@dataclass(frozen=True)
class ZeroForcingResult:
    """Zero-forcing points plus per-basis-vector rates for diagnostics.

    ``basis_rates[j]`` lists the link-2 rate reached by each orthonormal
    basis vector of the admissible subspace for point ``j``.
    """

    points: list
    basis_rates: list
    diagnostic: str = ""

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def _zf_w2(ch, w1):
    # w2 must be orthogonal to both (parallel) directions
    d = np.column_stack([interference_direction(ch, 2, w1), ch.H22.conj().T @ (ch.H12 @ w1)])
    P, P_perp = orth_projectors(d)
    G = ch.H22.conj().T @ ch.H22
    if np.linalg.matrix_rank(P) == 0:
        vals, vecs = eigh(G)
        return canonical_phase(vecs[:, 0]), [rate(v / ch.sigma2_sq) for v in vals]
    pairs = generalized_eigh(hermitian_part(P_perp @ G @ P_perp), P_perp)
    w2 = direction(P_perp @ pairs.vectors[:, 0])
    basis_rates = [rate(max(m, 0.0) / ch.sigma2_sq) for m in pairs.values]
    return canonical_phase(w2), basis_rates


def zf_points(ch, tol=ZF_RESIDUAL_TOL):
    """Operating points with zero interference on both cross links.

    ``w1`` is taken from the eigenvectors of the (non-Hermitian) pencil
    ``(H22^H H12, H21^H H11)``, which make the two interference directions
    parallel so a single orthogonality condition on ``w2`` nulls both. Among
    the admissible ``w2`` the one with the largest link-2 rate is kept.
    """
    A = ch.H22.conj().T @ ch.H12
    B = ch.H21.conj().T @ ch.H11
    if not np.any(A) and not np.any(B):
        w1, _ = egoistic(ch, 1)
        w2, _ = egoistic(ch, 2)
        return ZeroForcingResult([rate_pair(ch, w1, w2)], [[]], "no cross-talk")
    alphas, vecs = scipy.linalg.eig(A, B, homogeneous_eigvals=True)
    alpha, beta = alphas
    scale = max(np.linalg.norm(A), np.linalg.norm(B))
    points, basis, kept = [], [], []
    for j in range(vecs.shape[1]):
        v = vecs[:, j]
        if not np.all(np.isfinite(v)) or np.linalg.norm(v) == 0.0:
            continue
        v = direction(v)
        ab = abs(alpha[j]) + abs(beta[j])
        res = np.linalg.norm(beta[j] * (A @ v) - alpha[j] * (B @ v))
        if ab == 0.0 or res > tol * ab * scale:
            continue
        if any(abs(np.vdot(u, v)) > 1.0 - 1e-10 for u in kept):
            continue
        kept.append(v)
        w1 = canonical_phase(v)
        w2, br = _zf_w2(ch, w1)
        points.append(rate_pair(ch, w1, w2))
        basis.append(br)
    diag = "" if points else "pencil admits no eigenvector meeting the parallelism residual"
    return ZeroForcingResult(points, basis, diag)


def balanced_beamformer(ch, i, xi1, xi2, keypoints=None, tol=1e-9):
    """Normalized blend ``xi1 * w_ego + xi2 * w_alt`` of link ``i``.

    ``|xi1| + |xi2|`` must equal 1. ``keypoints`` may be passed to avoid
    recomputing the egoistic and altruistic beamformers.
    """
    if abs(abs(xi1) + abs(xi2) - 1.0) > tol:
        raise ValueError("|xi1| + |xi2| must equal 1")
    kp = keypoints if keypoints is not None else key_points(ch)
    v = xi1 * kp.ego(i) + xi2 * kp.alt(i)
    norm = np.linalg.norm(v)
    if norm <= 1e-12:
        raise ValueError("degenerate blend: the two strategies cancel")
    return v / norm


@dataclass(frozen=True)
class Initialization:
    """Chosen starting ``w2`` and how it was found.

    ``stage`` is ``"nominal"``, ``"nu"`` or ``"random"``; ``draws`` records
    every random candidate tried so a run can be replayed.
    """

    w2: np.ndarray
    stage: str
    zeta: float
    draws: list = field(default_factory=list, repr=False)


def egoism_share(kp, R2_star):
    """``(R2* - R2_under) / (R2_bar - R2_under)``."""
    return (R2_star - kp.r2_under) / (kp.r2_bar - kp.r2_under)


def initialize_w2(ch, R2_star, nu_steps=DEFAULT_NU_STEPS, rng_seed=0, keypoints=None):
    """Feasible starting beamformer for link 2 with search provenance.

    Tries the nominal egoism share first, then shares shifted by
    ``+-nu`` on an even grid of ``nu_steps`` values up to the distance to
    the nearer end of ``[0, 1]``, and finally seeded random unit vectors.
    """
    kp = keypoints if keypoints is not None else key_points(ch)
    if not kp.r2_under < R2_star < kp.r2_bar:
        raise ValueError(
            f"R2_star={R2_star} must lie strictly inside ({kp.r2_under}, {kp.r2_bar})"
        )
    sinr2 = 2.0**R2_star - 1.0
    zeta = egoism_share(kp, R2_star)

    def blend(z):
        v = z * kp.w2_ego + (1.0 - z) * kp.w2_alt
        n = np.linalg.norm(v)
        return None if n <= 1e-12 else v / n

    w = blend(zeta)
    if w is not None and feasibility_check_w2(ch, w, sinr2):
        return Initialization(w, "nominal", zeta)
    nu_max = min(zeta, 1.0 - zeta)
    for nu in nu_max * np.arange(1, nu_steps + 1) / max(nu_steps, 1):
        for z in (zeta + nu, zeta - nu):
            w = blend(z)
            if w is not None and feasibility_check_w2(ch, w, sinr2):
                return Initialization(w, "nu", z)
    rng = np.random.default_rng(rng_seed)
    draws = []
    for _ in range(RANDOM_INIT_CAP):
        w = random_unit_vectors(rng, ch.n_t)
        draws.append(w)
        if feasibility_check_w2(ch, w, sinr2):
            return Initialization(w, "random", zeta, draws)
    raise RuntimeError(f"no feasible w2 found in {RANDOM_INIT_CAP} random draws")


def initial_w2(ch, R2_star, nu_steps=DEFAULT_NU_STEPS, rng_seed=0, keypoints=None):
    """Feasible starting beamformer for link 2 (see :func:`initialize_w2`)."""
    return initialize_w2(ch, R2_star, nu_steps, rng_seed, keypoints).w2
