"""Small dense complex SDPs with trace equalities and the two subproblem builders.

Problems have the form::

    optimize  Tr(F0 X)
    s.t.      Tr(F_j X) - c_j s = b_j,   j = 1..m
              X >= 0 (Hermitian PSD),    s in [s_lo, s_hi] (optional)

They are solved through the real symmetric embedding
``X -> [[Re X, -Im X], [Im X, Re X]]``. The optional scalar becomes two
``1 x 1`` PSD blocks ``t1 = s - s_lo`` and ``t2 = s_hi - s`` tied by
``t1 + t2 = s_hi - s_lo``. The solver is an infeasible-start primal-dual
interior-point method with Nesterov-Todd scaling and Mehrotra
predictor-corrector steps.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import check_hermitian, eigh, hermitian_part
from .subproblems import (
    a1_matrix,
    a2_matrix,
    leakage_matrix,
    leakage_normalizer,
    signal_energy,
    sinr2_constraint_matrix,
)

TOL = 1e-9
MAX_ITERS = 200
STEP_FRACTION = 0.98
# verification thresholds for reporting "optimal"
EQ_TOL = 1e-7
PSD_TOL = 1e-8
GAP_TOL = 1e-7
FIXED_SCALAR_RTOL = 1e-12
DIVERGENCE_LIMIT = 1e10

MAXIMIZE = "maximize"
MINIMIZE = "minimize"
OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class Constraint:
    """``Tr(matrix X) - scalar_coef * s = rhs``."""

    matrix: np.ndarray
    rhs: float
    scalar_coef: float = 0.0


@dataclass(frozen=True)
class ScalarVar:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"scalar bounds must satisfy lo <= hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class SdpProblem:
    sense: str
    objective: np.ndarray
    constraints: tuple
    scalar: ScalarVar | None = None
    label: str = ""

    def __post_init__(self):
        if self.sense not in (MAXIMIZE, MINIMIZE):
            raise ValueError(f"sense must be {MAXIMIZE!r} or {MINIMIZE!r}")
        F0 = check_hermitian(self.objective, "objective")
        object.__setattr__(self, "objective", hermitian_part(F0))
        cons = []
        for j, c in enumerate(self.constraints):
            F = check_hermitian(c.matrix, f"constraint {j}")
            if F.shape != F0.shape:
                raise ValueError(f"constraint {j} has shape {F.shape}, objective {F0.shape}")
            if c.scalar_coef != 0.0 and self.scalar is None:
                raise ValueError(f"constraint {j} couples a scalar but no scalar variable is declared")
            cons.append(Constraint(hermitian_part(F), float(c.rhs), float(c.scalar_coef)))
        if not cons:
            raise ValueError("at least one constraint is required")
        object.__setattr__(self, "constraints", tuple(cons))

    @property
    def n(self):
        return self.objective.shape[0]


@dataclass(frozen=True)
class Residuals:
    primal: float  # max_j |Tr(F_j X) - c_j s - b_j| / (1 + |b_j| + |F_j| |X| + |c_j s|)
    psd_margin: float  # lambda_min(X)
    gap: float  # |primal - dual| / (1 + |primal|)
    dual: float = 0.0  # relative dual infeasibility of the embedded problem


@dataclass(frozen=True)
class SdpSolution:
    X: np.ndarray
    s: float | None
    objective_value: float
    status: str
    residuals: Residuals
    iterations: int
    dual_value: float = float("nan")
    y: np.ndarray = field(default=None, repr=False)
    message: str = ""

    @property
    def optimal(self):
        return self.status == OPTIMAL


# ---------------------------------------------------------------------------
# block-diagonal real symmetric helpers; a "block matrix" is a list of arrays


def _embed(F):
    F = np.asarray(F, dtype=complex)
    re, im = F.real, F.imag
    return np.block([[re, -im], [im, re]])


def _unembed(Xr, n):
    re = 0.5 * (Xr[:n, :n] + Xr[n:, n:])
    im = 0.5 * (Xr[n:, :n] - Xr[:n, n:])
    return hermitian_part(re + 1j * im)


def _inner(A, B):
    return sum(float(np.sum(a * b)) for a, b in zip(A, B))


def _sym(M):
    return 0.5 * (M + M.T)


def _fro(A):
    return np.sqrt(_inner(A, A))


@dataclass
class _RealProblem:
    """Standard-form real SDP: min <C, X> s.t. <A_j, X> = b_j, X >= 0 (blocks)."""

    C: list
    A: list  # list over constraints of block lists
    b: np.ndarray
    obj_scale: float
    row_scale: np.ndarray

    def op(self, X):
        return np.array([_inner(Aj, X) for Aj in self.A])

    def adj(self, y):
        out = [np.zeros_like(c) for c in self.C]
        for yj, Aj in zip(y, self.A):
            for k, blk in enumerate(Aj):
                out[k] += yj * blk
        return out


def _to_real(p):
    """Embed, eliminate the scalar if needed, and Frobenius-normalize."""
    n = p.n
    sign = -1.0 if p.sense == MAXIMIZE else 1.0
    use_scalar = p.scalar is not None
    s_fixed = None
    if use_scalar:
        width = p.scalar.hi - p.scalar.lo
        if width <= FIXED_SCALAR_RTOL * max(1.0, abs(p.scalar.hi)):
            s_fixed = 0.5 * (p.scalar.lo + p.scalar.hi)
            use_scalar = False

    def blocks(F, t1=None, t2=None):
        out = [0.5 * _embed(F)]
        if use_scalar:
            out += [np.array([[t1]]), np.array([[t2]])]
        return out

    C = blocks(sign * p.objective, 0.0, 0.0)
    A, b = [], []
    for c in p.constraints:
        rhs = c.rhs
        if use_scalar:
            # s = lo + t1
            A.append(blocks(c.matrix, -c.scalar_coef, 0.0))
            rhs = rhs + c.scalar_coef * p.scalar.lo
        else:
            A.append(blocks(c.matrix))
            if s_fixed is not None:
                rhs = rhs + c.scalar_coef * s_fixed
        b.append(rhs)
    if use_scalar:
        A.append(blocks(np.zeros((n, n)), 1.0, 1.0))
        b.append(p.scalar.hi - p.scalar.lo)
    b = np.array(b, dtype=float)

    row_scale = np.array([_fro(Aj) for Aj in A])
    if np.any(row_scale == 0.0):
        bad = int(np.flatnonzero(row_scale == 0.0)[0])
        raise ValueError(f"constraint {bad} has a zero matrix")
    A = [[blk / r for blk in Aj] for Aj, r in zip(A, row_scale)]
    b = b / row_scale
    obj_scale = _fro(C)
    if obj_scale == 0.0:
        obj_scale = 1.0
    C = [blk / obj_scale for blk in C]
    return _RealProblem(C, A, b, obj_scale, row_scale), use_scalar, s_fixed


def _max_step(X, dX):
    """Largest alpha in (0, inf] with X + alpha dX PSD, given X PD."""
    alpha = np.inf
    for x, d in zip(X, dX):
        lam, Q = np.linalg.eigh(x)
        if lam[0] <= 0.0:
            return 0.0
        R = Q / np.sqrt(lam)[None, :]
        lmin = np.linalg.eigvalsh(_sym(R.T @ d @ R))[0]
        if lmin < 0.0:
            alpha = min(alpha, -1.0 / lmin)
    return alpha


def _is_pd(X):
    try:
        for x in X:
            np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return False
    return True


def _safe_step(X, dX, alpha):
    """Shrink ``alpha`` until ``X + alpha dX`` is numerically PD."""
    for _ in range(60):
        Xn = [_sym(x + alpha * d) for x, d in zip(X, dX)]
        if _is_pd(Xn):
            return Xn, alpha
        alpha *= 0.8
    return X, 0.0


@dataclass
class _Scaling:
    G: list
    Ginv: list
    W: list
    v: list  # diagonal of the scaled point (per block)


def _nt_scaling(X, S):
    G, Ginv, W, v = [], [], [], []
    for x, s in zip(X, S):
        L = np.linalg.cholesky(x)
        lam, Q = np.linalg.eigh(_sym(L.T @ s @ L))
        lam = np.maximum(lam, 1e-300)
        q = lam**-0.25
        g = (L @ Q) * q[None, :]
        Li = scipy.linalg.solve_triangular(L, np.eye(len(x)), lower=True)
        gi = (Q.T @ Li) / q[:, None]
        G.append(g)
        Ginv.append(gi)
        W.append(_sym(g @ g.T))
        v.append(np.sqrt(lam))
    return _Scaling(G, Ginv, W, v)


def _solve_schur(M, h):
    try:
        c = scipy.linalg.cho_factor(M)
        return scipy.linalg.cho_solve(c, h)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(M, h, rcond=None)[0]


def _ipm(rp_, tol, max_iters):
    nbar = sum(len(c) for c in rp_.C)
    m = len(rp_.b)
    # SDPT3-style starting point
    xi, eta = [], []
    for k, c in enumerate(rp_.C):
        nk = len(c)
        a_norms = [np.linalg.norm(Aj[k]) for Aj in rp_.A]
        xi.append(max(10.0, np.sqrt(nk), max(nk * (1 + abs(bj)) / (1 + an) for bj, an in zip(rp_.b, a_norms))))
        eta.append(max(10.0, np.sqrt(nk), max(a_norms), np.linalg.norm(c)))
    X = [x * np.eye(len(c)) for x, c in zip(xi, rp_.C)]
    S = [e * np.eye(len(c)) for e, c in zip(eta, rp_.C)]
    y = np.zeros(m)
    b_norm = 1.0 + np.linalg.norm(rp_.b)
    c_norm = 1.0 + _fro(rp_.C)

    status, message = NUMERICAL_FAILURE, "iteration cap reached"
    it = 0
    for it in range(1, max_iters + 1):
        rp = rp_.b - rp_.op(X)
        Aty = rp_.adj(y)
        Rd = [c - a - s for c, a, s in zip(rp_.C, Aty, S)]
        mu = _inner(X, S) / nbar
        pobj, dobj = _inner(rp_.C, X), float(rp_.b @ y)
        pinf = np.linalg.norm(rp) / b_norm
        dinf = _fro(Rd) / c_norm
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if pinf <= tol and dinf <= tol and gap <= tol:
            status, message = OPTIMAL, "converged"
            it -= 1
            break
        if np.linalg.norm(y) > DIVERGENCE_LIMIT * c_norm:
            message = "dual iterates diverge"
            it -= 1
            break

        try:
            sc = _nt_scaling(X, S)
        except np.linalg.LinAlgError:
            message = "lost positive definiteness"
            break

        M = np.empty((m, m))
        WAW = [[w @ blk @ w for w, blk in zip(sc.W, Aj)] for Aj in rp_.A]
        for j in range(m):
            for k in range(j, m):
                M[j, k] = M[k, j] = _inner(rp_.A[j], WAW[k])
        WRdW = [w @ r @ w for w, r in zip(sc.W, Rd)]
        ARd = rp_.op(WRdW)

        def direction(Rc):
            R = [g @ r @ g.T for g, r in zip(sc.G, Rc)]
            h = rp - rp_.op(R) + ARd
            dy = _solve_schur(M, h)
            dS = [r - a for r, a in zip(Rd, rp_.adj(dy))]
            dX = [_sym(r - w @ d @ w) for r, w, d in zip(R, sc.W, dS)]
            return dX, dy, [_sym(d) for d in dS]

        # predictor
        Rc_aff = [-np.diag(v) for v in sc.v]
        dXa, dya, dSa = direction(Rc_aff)
        ap = min(1.0, STEP_FRACTION * _max_step(X, dXa))
        ad = min(1.0, STEP_FRACTION * _max_step(S, dSa))
        mu_aff = _inner([x + ap * d for x, d in zip(X, dXa)], [s + ad * d for s, d in zip(S, dSa)]) / nbar
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector in the scaled space
        Rc = []
        for v, gi, g, dx, ds in zip(sc.v, sc.Ginv, sc.G, dXa, dSa):
            dxt = gi @ dx @ gi.T
            dst = g.T @ ds @ g
            rhs = 2.0 * sigma * mu * np.eye(len(v)) - 2.0 * np.diag(v**2) - (dxt @ dst + dst @ dxt)
            Rc.append(rhs / (v[:, None] + v[None, :]))
        dX, dy, dS = direction(Rc)
        ap = min(1.0, STEP_FRACTION * _max_step(X, dX))
        ad = min(1.0, STEP_FRACTION * _max_step(S, dS))
        X, ap = _safe_step(X, dX, ap)
        S, ad = _safe_step(S, dS, ad)
        y = y + ad * dy
        if max(ap, ad) < 1e-12:
            message = "step length collapsed"
            break
    return X, y, S, status, message, it


def _primal_ray(rp_, y):
    """Certificate check: A^T y <= 0 and b^T y > 0 proves infeasibility."""
    ny = np.linalg.norm(y)
    if ny == 0.0:
        return False
    yh = y / ny
    Z = [-blk for blk in rp_.adj(yh)]
    lmin = min(np.linalg.eigvalsh(_sym(z))[0] for z in Z)
    return bool(rp_.b @ yh > 1e-8 and lmin >= -1e-6)


def solve(p, tol=TOL, max_iters=MAX_ITERS):
    """Solve an :class:`SdpProblem`.

    Returns
    -------
    SdpSolution
        ``status`` is ``"optimal"`` only if the recovered complex solution
        passes the equality, PSD and duality-gap checks in the original
        (unnormalized) problem; ``"infeasible"`` when a dual ray certifies
        it; ``"numerical-failure"`` otherwise.
    """
    n = p.n
    rp_, use_scalar, s_fixed = _to_real(p)
    X, y, S, status, message, iters = _ipm(rp_, tol, max_iters)

    Xc = _unembed(X[0], n)
    if use_scalar:
        t1, t2 = float(X[1][0, 0]), float(X[2][0, 0])
        s = 0.5 * ((p.scalar.lo + t1) + (p.scalar.hi - t2))
    else:
        s = s_fixed
    sgn = -1.0 if p.sense == MAXIMIZE else 1.0
    y_orig = y * rp_.obj_scale / rp_.row_scale
    b_full = rp_.b * rp_.row_scale
    dual_value = sgn * float(b_full @ y_orig)
    obj = float(np.real(np.trace(p.objective @ Xc)))

    s_val = 0.0 if s is None else s
    # relative to the size of the terms being balanced
    x_norm = np.linalg.norm(Xc)
    eq = max(
        abs(float(np.real(np.trace(c.matrix @ Xc))) - c.scalar_coef * s_val - c.rhs)
        / (1.0 + abs(c.rhs) + np.linalg.norm(c.matrix) * x_norm + abs(c.scalar_coef * s_val))
        for c in p.constraints
    )
    psd = float(eigh(Xc).values[-1])
    gap = abs(obj - dual_value) / (1.0 + abs(obj))
    Rd = [c - a - z for c, a, z in zip(rp_.C, rp_.adj(y), S)]
    dinf = _fro(Rd) / (1.0 + _fro(rp_.C))
    res = Residuals(eq, psd, gap, dinf)

    if status == OPTIMAL:
        if eq > EQ_TOL or psd < -PSD_TOL or gap > GAP_TOL:
            status, message = NUMERICAL_FAILURE, "recovered solution fails verification"
    elif _primal_ray(rp_, y):
        status, message = INFEASIBLE, "dual ray certifies primal infeasibility"
    return SdpSolution(Xc, s, obj, status, res, iters, dual_value, y_orig, message)


def dump(p):
    """Plain-text canonical form of a problem for external cross-checking.

    Matrices are written row-major, one ``re im`` pair per entry.
    """

    def mat(M):
        return "\n".join(" ".join(f"{z.real:.17g} {z.imag:.17g}" for z in row) for row in M)

    lines = [f"sense {p.sense}", f"dimension {p.n}", f"constraints {len(p.constraints)}"]
    if p.scalar is not None:
        lines.append(f"scalar {p.scalar.lo:.17g} {p.scalar.hi:.17g}")
    lines += ["objective", mat(p.objective)]
    for j, c in enumerate(p.constraints):
        lines.append(f"constraint {j} rhs {c.rhs:.17g} scalar_coef {c.scalar_coef:.17g}")
        lines.append(mat(c.matrix))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subproblem builders


class InfeasibleTargetError(ValueError):
    """The fixed beamformer cannot support the requested SINR target."""


def build_p2(ch, w2, sinr2_star, energy_tol=1e-9):
    """Relaxed transmitter-1 problem for fixed ``w2``.

    maximize ``Tr(A_1(w2) W)`` s.t. ``Tr(C(w2) W) = 0``, ``Tr(W) = 1``, ``W >= 0``.
    """
    margin = signal_energy(ch, 2, w2) - ch.sigma2_sq * sinr2_star
    if margin < -energy_tol:
        raise InfeasibleTargetError(
            f"||H22 w2||^2 falls short of sigma_2^2 * SINR_2* by {-margin:.3e}"
        )
    n = ch.n_t
    return SdpProblem(
        MAXIMIZE,
        a1_matrix(ch, w2),
        (
            Constraint(sinr2_constraint_matrix(ch, w2, sinr2_star), 0.0),
            Constraint(np.eye(n), 1.0),
        ),
        label="tx1",
    )


def scalar_bounds(ch):
    """``[1/lambda_max(C2), 1/lambda_min(C2)]``."""
    vals = eigh(leakage_normalizer(ch)).values
    return 1.0 / vals[0], 1.0 / vals[-1]


def build_p5(ch, w1, sinr2_star):
    """Charnes-Cooper lifted transmitter-2 problem for fixed ``w1``.

    minimize ``Tr(C1 Q)`` s.t. ``Tr(A_2(w1) Q) = s SINR_2*``, ``Tr(C2 Q) = 1``,
    ``Tr(Q) = s``, ``Q >= 0``. The scale ``s`` is substituted by ``Tr(Q)``,
    which leaves two equalities in ``Q`` alone; ``s`` is recovered from the
    solution and automatically lies within :func:`scalar_bounds`.
    """
    n = ch.n_t
    return SdpProblem(
        MINIMIZE,
        leakage_matrix(ch, w1),
        (
            Constraint(a2_matrix(ch, w1) - sinr2_star * np.eye(n), 0.0),
            Constraint(leakage_normalizer(ch), 1.0),
        ),
        label="tx2",
    )


def lifted_scale(sol):
    """The Charnes-Cooper scale ``s`` of a transmitter-2 solution."""
    if sol.s is not None:
        return float(sol.s)
    return float(np.real(np.trace(sol.X)))


def w2_matrix_from_p5(sol, s_tol=1e-12):
    """Recover the normalized transmit covariance ``Q / s`` from a lifted solution."""
    s = lifted_scale(sol)
    if s <= s_tol:
        raise ArithmeticError(f"scale of the lifted solution is not positive (s={s})")
    return hermitian_part(sol.X / s)
