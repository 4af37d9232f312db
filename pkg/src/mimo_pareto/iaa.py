"""Alternating optimization of the two transmitters for a fixed link-2 rate.

Link-2 SINR is pinned at ``SINR_2* = 2^R2* - 1`` while link 1's rate is
raised by alternating two relaxed single-beamformer problems:

* transmitter 1 (``w2`` fixed): maximize ``w1^H A_1(w2) w1`` subject to the
  quadratic equality that keeps link 2 on target;
* transmitter 2 (``w1`` fixed): minimize the interference quotient
  ``w2^H C1 w2 / w2^H C2 w2`` with ``w2^H A_2(w1) w2 = SINR_2*``, lifted to
  a linear SDP in ``(Q, s)``.

Each relaxed solution is turned into a beamformer by rank-one
decomposition. The module also builds the perturbation that shows an
interior ``w1`` can never be strictly Pareto optimal.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .channel import RatePoint, rate, rate_pair, sinr
from .keypoints import DEFAULT_NU_STEPS, Initialization, initialize_w2, key_points
from .linalg import direction, null_space, orth_projectors, pseudo_inverse, quad, range_basis
from .rankone import extract_w1, extract_w2
from .sdp import build_p2, build_p5, lifted_scale, solve, w2_matrix_from_p5
from .subproblems import (  # noqa: F401  (re-exported)
    FeasibilityReport,
    a1_matrix,
    feasibility_check_w2,
    leakage_matrix,
    leakage_normalizer,
    null_quadratic_unit_vector,
    sinr2_constraint_matrix,
)

DRIFT_TOL = 1e-5
MONOTONE_SLACK = 1e-12


class SdpFailure(RuntimeError):
    """A relaxed subproblem did not reach an optimal status."""


@dataclass(frozen=True)
class IaaConfig:
    epsilon: float = 1e-4
    max_iters: int = 100
    nu_steps: int = DEFAULT_NU_STEPS
    rng_seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class Tx1Step:
    """Transmitter-1 half step: relaxed optimum and the extracted beamformer."""

    w1: np.ndarray
    sdp_value: float
    value: float  # w1^H A_1 w1
    constraint: float  # w1^H C(w2) w1
    rank: int
    status: str
    sdp_iterations: int
    decomposed: bool


@dataclass(frozen=True)
class Tx2Step:
    """Transmitter-2 half step: lifted optimum, recovered ratio, extracted beamformer."""

    w2: np.ndarray
    sdp_value: float
    fractional_value: float  # Tr(C1 W2) / Tr(C2 W2) with W2 = Q / s
    value: float  # w2^H C1 w2 / w2^H C2 w2
    sinr2: float
    s: float
    rank: int
    status: str
    sdp_iterations: int
    decomposed: bool


def optimize_tx1(ch, w2, sinr2_star, detail=False):
    """Best unit ``w1`` for fixed ``w2`` under the link-2 SINR target."""
    sol = solve(build_p2(ch, w2, sinr2_star))
    if not sol.optimal:
        raise SdpFailure(f"transmitter-1 relaxation ended with status {sol.status}: {sol.message}")
    ext = extract_w1(sol.X, ch, w2, sinr2_star, detail=True)
    w1 = ext.w
    step = Tx1Step(
        w1=w1,
        sdp_value=sol.objective_value,
        value=quad(a1_matrix(ch, w2), w1),
        constraint=quad(sinr2_constraint_matrix(ch, w2, sinr2_star), w1),
        rank=ext.rank,
        status=sol.status,
        sdp_iterations=sol.iterations,
        decomposed=ext.used_decomposition,
    )
    return step if detail else w1


def optimize_tx2(ch, w1, sinr2_star, detail=False):
    """Unit ``w2`` meeting the link-2 target that least disturbs link 1."""
    sol = solve(build_p5(ch, w1, sinr2_star))
    if not sol.optimal:
        raise SdpFailure(f"transmitter-2 relaxation ended with status {sol.status}: {sol.message}")
    W2 = w2_matrix_from_p5(sol)
    C1, C2 = leakage_matrix(ch, w1), leakage_normalizer(ch)
    frac = float(np.real(np.trace(C1 @ W2)) / np.real(np.trace(C2 @ W2)))
    ext = extract_w2(W2, ch, w1, detail=True)
    w2 = ext.w
    step = Tx2Step(
        w2=w2,
        sdp_value=sol.objective_value,
        fractional_value=frac,
        value=quad(C1, w2) / quad(C2, w2),
        sinr2=sinr(ch, 2, w1, w2),
        s=lifted_scale(sol),
        rank=ext.rank,
        status=sol.status,
        sdp_iterations=sol.iterations,
        decomposed=ext.used_decomposition,
    )
    return step if detail else w2


@dataclass(frozen=True)
class IterationRecord:
    index: int
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)
    R1: float
    R2: float
    tx1: Tx1Step = field(repr=False)
    tx2: Tx2Step = field(repr=False)
    kept_w1: bool = False  # candidate rejected, incumbent kept
    kept_w2: bool = False
    restored: bool = False


@dataclass
class IaaTrace:
    """Full record of one run at a fixed link-2 target."""

    R2_star: float
    iterations: list = field(default_factory=list)
    converged: bool = False
    final: RatePoint | None = None
    init: Initialization | None = None
    status: str = "running"
    message: str = ""

    @property
    def R1_sequence(self):
        return np.array([it.R1 for it in self.iterations])

    @property
    def n_iterations(self):
        return len(self.iterations)


def run(ch, R2_star, cfg=None, keypoints=None, w2_init=None):
    """Run the alternating algorithm for one link-2 rate target.

    Parameters
    ----------
    ch : ChannelSet
    R2_star : float
        Target rate of link 2, strictly between the turning-point rates.
    cfg : IaaConfig, optional
    keypoints : KeyPointSet, optional
        Precomputed key points (saves work in sweeps).
    w2_init : array_like, optional
        Starting ``w2``; must be feasible. Defaults to the egoism-share
        blend with its fallbacks.

    Returns
    -------
    IaaTrace
        ``status`` is ``"converged"``, ``"max-iters"`` or ``"failed"``.
    """
    cfg = cfg or IaaConfig()
    kp = keypoints if keypoints is not None else key_points(ch)
    if not kp.r2_under < R2_star < kp.r2_bar:
        raise ValueError(f"R2_star={R2_star} must lie strictly inside ({kp.r2_under}, {kp.r2_bar})")
    sinr2 = 2.0**R2_star - 1.0
    trace = IaaTrace(R2_star)
    if w2_init is None:
        trace.init = initialize_w2(ch, R2_star, cfg.nu_steps, cfg.rng_seed, kp)
    else:
        w = np.asarray(w2_init, dtype=complex)
        if not feasibility_check_w2(ch, w, sinr2):
            raise ValueError("supplied w2_init is not feasible for this target")
        trace.init = Initialization(w, "given", float("nan"))
    w2 = trace.init.w2
    w1 = None
    prev_R1 = None
    try:
        for l in range(1, cfg.max_iters + 1):
            t1 = optimize_tx1(ch, w2, sinr2, detail=True)
            kept_w1 = False
            if w1 is not None and sinr(ch, 1, w1, w2) > sinr(ch, 1, t1.w1, w2) + MONOTONE_SLACK:
                kept_w1 = True
            else:
                w1 = t1.w1
            t2 = optimize_tx2(ch, w1, sinr2, detail=True)
            kept_w2 = sinr(ch, 1, w1, w2) > sinr(ch, 1, w1, t2.w2) + MONOTONE_SLACK
            restored = False
            if not kept_w2:
                w2_new = t2.w2
                if abs(sinr(ch, 2, w1, w2_new) - sinr2) > DRIFT_TOL * sinr2:
                    t2 = optimize_tx2(ch, w1, sinr2, detail=True)
                    w2_new = t2.w2
                    restored = True
                if abs(sinr(ch, 2, w1, w2_new) - sinr2) <= DRIFT_TOL * sinr2:
                    w2 = w2_new
                else:
                    kept_w2 = True
            pt = rate_pair(ch, w1, w2)
            trace.iterations.append(
                IterationRecord(l, pt.w1, pt.w2, pt.R1, pt.R2, t1, t2, kept_w1, kept_w2, restored)
            )
            if prev_R1 is not None and abs(pt.R1 - prev_R1) <= cfg.epsilon:
                trace.converged = True
                break
            prev_R1 = pt.R1
    except (SdpFailure, ArithmeticError, ValueError) as exc:
        trace.status, trace.message = "failed", f"iteration {len(trace.iterations) + 1}: {exc}"
    if trace.iterations:
        last = trace.iterations[-1]
        trace.final = rate_pair(ch, last.w1, last.w2)
    if trace.status != "failed":
        trace.status = "converged" if trace.converged else "max-iters"
    return trace


def sweep_targets(kp, n_targets):
    """Evenly spaced targets strictly inside ``(R2_under, R2_bar)``."""
    if n_targets < 1:
        raise ValueError("n_targets must be at least 1")
    n = np.arange(1, n_targets + 1)
    return kp.r2_under + n / (n_targets + 1) * (kp.r2_bar - kp.r2_under)


def _run_one(args):
    ch, R2, cfg, kp = args
    try:
        return run(ch, R2, cfg, kp)
    except (ValueError, RuntimeError) as exc:
        t = IaaTrace(R2, status="failed", message=str(exc))
        return t


def sweep(ch, n_targets, cfg=None, workers=1):
    """One independent run per target of :func:`sweep_targets`, in target order."""
    cfg = cfg or IaaConfig()
    kp = key_points(ch)
    jobs = [(ch, float(R2), cfg, kp) for R2 in sweep_targets(kp, n_targets)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


# ---------------------------------------------------------------------------
# perturbation of an interior w1


@dataclass(frozen=True)
class PerturbationConditions:
    sinr1_gain: float  # must be > 0
    sinr2_rel_change: float  # must be <= 1e-8
    norm_gain: float  # must be > 0
    final_norm: float  # must be <= 1

    def ok(self, sinr2_tol=1e-8):
        return (
            self.sinr1_gain > 0.0
            and self.sinr2_rel_change <= sinr2_tol
            and self.norm_gain > 0.0
            and self.final_norm <= 1.0
        )


@dataclass(frozen=True)
class Perturbation:
    delta: np.ndarray
    case: str  # "null-space", "eta" or "tangent"
    conditions: PerturbationConditions
    eta: float | None = None
    halvings: int = 0


def perturbation_conditions(ch, w1, w2, delta):
    w1 = np.asarray(w1, dtype=complex)
    new = w1 + delta
    s2_old = sinr(ch, 2, w1, w2)
    s2_new = sinr(ch, 2, new, w2)
    return PerturbationConditions(
        sinr1_gain=sinr(ch, 1, new, w2) - sinr(ch, 1, w1, w2),
        sinr2_rel_change=abs(s2_new - s2_old) / max(abs(s2_old), 1e-300),
        norm_gain=float(np.vdot(new, new).real - np.vdot(w1, w1).real),
        final_norm=float(np.linalg.norm(new)),
    )


def _arc_midpoint(c1, a1, c2, a2):
    """Midpoint of the overlap of arcs ``[c1 - a1, c1 + a1]`` and ``[c2 - a2, c2 + a2]``."""
    d = np.angle(np.exp(1j * (c2 - c1)))
    lo = max(-a1, d - a2)
    hi = min(a1, d + a2)
    return c1 + 0.5 * (lo + hi)


def _phase_for(w1, A1, dhat, m):
    """Phase ``phi`` for ``delta = m e^{j phi} dhat`` meeting the gain and norm conditions."""
    g2 = np.vdot(w1, A1 @ dhat)
    g3 = np.vdot(w1, dhat)
    q = quad(A1, dhat)

    def half_width(coef, curv):
        # admissible set of cos(phi + arg) > -m curv / (2 coef)
        if coef == 0.0:
            return np.pi
        rhs = -0.5 * m * curv / coef
        if rhs <= -1.0:
            return np.pi
        return float(np.arccos(min(rhs, 1.0)))

    a1 = half_width(abs(g2), q)
    a2 = half_width(abs(g3), 1.0)
    return _arc_midpoint(-np.angle(g2), a1, -np.angle(g3), a2)


def _null_space_case(ch, w1, w2, w_norm):
    N = null_space(ch.H12)
    A1 = a1_matrix(ch, w2)
    g = N @ (N.conj().T @ (A1 @ w1))
    if np.linalg.norm(g) > 1e-12 * max(np.linalg.norm(A1), 1.0):
        dhat = direction(g)
    else:
        # gradient vanishes on the null space: use the best curvature direction
        vals, vecs = np.linalg.eigh(N.conj().T @ A1 @ N)
        dhat = N @ vecs[:, -1]
    m = min(1.0 - w_norm, 0.1)
    for k in range(60):
        delta = m * np.exp(1j * _phase_for(w1, A1, dhat, m)) * dhat
        cond = perturbation_conditions(ch, w1, w2, delta)
        if cond.ok():
            return Perturbation(delta, "null-space", cond, None, k)
        m *= 0.5
    return None


def _eta_case(ch, w1, w2, w_norm):
    """Full-column-rank cross channel: move ``H12 w1`` inside ``col(H12)``."""
    s2 = ch.sigma2_sq
    v1 = ch.H12 @ w1
    U, _ = range_basis(ch.H12)
    v2 = U @ (U.conj().T @ (ch.H22 @ w2))  # part of v2 visible from col(H12)
    if np.linalg.norm(v2) == 0.0 or np.linalg.norm(v1) == 0.0:
        return None
    r_side = abs(np.vdot(v1, v2)) ** 2 / (s2 + np.vdot(v1, v1).real)
    P, P_perp = orth_projectors(v2)
    e2 = P @ v1
    if np.linalg.norm(e2) == 0.0:
        return None
    e2 = direction(e2)
    # candidates for the component orthogonal to v2 inside col(H12)
    Q = U - np.outer(direction(v2), direction(v2).conj() @ U)
    Bq, _ = range_basis(Q)
    cands = []
    ortho = P_perp @ v1
    if np.linalg.norm(ortho) > 1e-12 * np.linalg.norm(v1):
        cands.append(direction(ortho))
    Hp = pseudo_inverse(ch.H12)
    A1 = a1_matrix(ch, w2)
    grad = Bq @ (Bq.conj().T @ (Hp.conj().T @ (A1 @ w1)))
    if np.linalg.norm(grad) > 0.0:
        cands.append(direction(grad))
    cands += [Bq[:, j] for j in range(Bq.shape[1])]
    cands = [e if np.real(np.vdot(v1, e)) >= 0.0 else -e for e in cands]

    def lside(eta, rho, e1):
        vd = rho * (np.sqrt(eta) * e1 + np.sqrt(1.0 - eta) * e2)
        u = v1 + vd
        return abs(np.vdot(u, v2)) ** 2 / (s2 + np.vdot(u, u).real)

    rho0 = min(1.0 - w_norm, 0.1) * np.linalg.norm(ch.H12, 2)
    for e1 in cands:
        rho = rho0
        for k in range(60):
            f0, f1 = lside(0.0, rho, e1) - r_side, lside(1.0, rho, e1) - r_side
            if f0 > 0.0 > f1:
                lo, hi = 0.0, 1.0
                while hi - lo > 1e-12:
                    mid = 0.5 * (lo + hi)
                    if lside(mid, rho, e1) - r_side > 0.0:
                        lo = mid
                    else:
                        hi = mid
                eta = 0.5 * (lo + hi)
                vd = rho * (np.sqrt(eta) * e1 + np.sqrt(1.0 - eta) * e2)
                delta = Hp @ vd
                cond = perturbation_conditions(ch, w1, w2, delta)
                if cond.ok():
                    return Perturbation(delta, "eta", cond, eta, k)
            rho *= 0.5
    return None


def _tangent_case(ch, w1, w2, w_norm):
    """Step tangent to the link-2 level set, then restore it along the normal."""
    A1 = a1_matrix(ch, w2)
    target = sinr(ch, 2, w1, w2)

    def g(w):
        return sinr(ch, 2, w, w2) - target

    # real gradient of SINR_2 in w1 by central differences on the 2n reals
    n = len(w1)
    h = 1e-7
    grad = np.zeros(n, dtype=complex)
    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = h
        grad[j] = (g(w1 + e) - g(w1 - e)) / (2 * h)
        e[j] = 1j * h
        grad[j] += 1j * (g(w1 + e) - g(w1 - e)) / (2 * h)
    nrm = direction(grad)

    def tangent(v):
        return v - nrm * np.real(np.vdot(nrm, v))

    a, b = tangent(A1 @ w1), tangent(w1)
    d = direction(direction(a) + direction(b))
    t = min(1.0 - w_norm, 0.1)
    for k in range(60):
        base = w1 + t * d
        f = lambda s: g(base + s * nrm)  # noqa: E731
        span = t
        ok = False
        for _ in range(30):
            if f(-span) * f(span) <= 0.0:
                ok = True
                break
            span *= 2.0
        if ok:
            s = scipy.optimize.brentq(f, -span, span, xtol=1e-15, rtol=1e-15, maxiter=200)
            delta = base + s * nrm - w1
            cond = perturbation_conditions(ch, w1, w2, delta)
            if cond.ok():
                return Perturbation(delta, "tangent", cond, None, k)
        t *= 0.5
    return None


def perturbation(ch, w1, w2, detail=False):
    """Perturbation ``delta`` of an interior ``w1`` that helps link 1 and spares link 2.

    Returns ``delta`` with ``SINR_1`` strictly increased, ``SINR_2``
    unchanged, ``||w1 + delta|| > ||w1||`` and ``||w1 + delta|| <= 1``.
    If ``H12`` has a null space the step lies in it; otherwise the image
    ``H12 w1`` is moved inside ``col(H12)`` along a plane that keeps the
    link-2 SINR fixed, with a tangent-and-restore step as a fallback.
    """
    w1 = np.asarray(w1, dtype=complex)
    w2 = np.asarray(w2, dtype=complex)
    w_norm = float(np.linalg.norm(w1))
    if w_norm == 0.0:
        raise ValueError("w1 must be nonzero")
    if w_norm >= 1.0 - 1e-9:
        raise ValueError("w1 must be strictly inside the unit ball")
    result = None
    if null_space(ch.H12).shape[1] > 0:
        result = _null_space_case(ch, w1, w2, w_norm)
    else:
        result = _eta_case(ch, w1, w2, w_norm)
    if result is None:
        result = _tangent_case(ch, w1, w2, w_norm)
    if result is None:
        raise ArithmeticError("no admissible perturbation found")
    return result if detail else result.delta
