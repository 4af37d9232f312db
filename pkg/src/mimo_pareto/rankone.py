"""Rank-one decompositions that turn relaxed SDP solutions into beamformers.

Given a PSD ``X`` and Hermitian ``A_1..A_m`` (``m`` = 3 or 4), find a vector
``y`` with ``y^H A_i y = Tr(A_i X)`` for every ``i``.

The main mechanism is rank reduction inside ``Range(X)``: write
``X = V V^H`` and move along ``V (I + alpha D) V^H`` with a Hermitian ``D``
that is orthogonal to every compressed ``V^H A_i V``, stopping where an
eigenvalue reaches zero. While ``r^2 > m`` such a ``D`` exists, so three
constraints always reach rank one. With four constraints the reduction can
stop at rank two; the remaining system is then solved in the
three-dimensional span of ``Range(X)`` and one auxiliary direction ``z`` by a
damped minimum-norm Gauss-Newton iteration from deterministic starts.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import eigh, hermitian_part, null_space, quad
from .subproblems import (
    a1_matrix,
    a2_matrix,
    leakage_matrix,
    leakage_normalizer,
    sinr2_constraint_matrix,
)

# eigenvalues below this fraction of the largest count as zero when deciding
# whether a relaxed solution is already rank one
SOLUTION_RANK_RTOL = 1e-7
# eigenvalues kept in the factor used for reduction (keeps traces exact)
FACTOR_RTOL = 1e-14
RESIDUAL_TOL = 1e-6
SOLVE_TOL = 1e-13
MAX_NEWTON_ITERS = 200
N_RANDOM_STARTS = 40


class DecompositionError(ArithmeticError):
    """No vector reproducing all requested traces was found within tolerance."""


def trace_residuals(y, matrices, targets):
    """``|y^H A_i y - t_i| / (1 + |t_i|)`` for each constraint."""
    return np.array([abs(quad(A, y) - t) / (1.0 + abs(t)) for A, t in zip(matrices, targets)])


def _factor(X, rtol=FACTOR_RTOL):
    vals, vecs = eigh(X)
    if vals[0] <= 0.0:
        raise ValueError("X must be a nonzero PSD matrix")
    keep = vals > rtol * vals[0]
    return vecs[:, keep] * np.sqrt(vals[keep])[None, :]


def _hermitian_basis(r):
    """Real orthonormal basis of ``r x r`` Hermitian matrices (trace inner product)."""
    basis = []
    for i in range(r):
        E = np.zeros((r, r), dtype=complex)
        E[i, i] = 1.0
        basis.append(E)
    for i in range(r):
        for j in range(i + 1, r):
            E = np.zeros((r, r), dtype=complex)
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            basis.append(E)
            F = np.zeros((r, r), dtype=complex)
            F[i, j], F[j, i] = -1j / np.sqrt(2.0), 1j / np.sqrt(2.0)
            basis.append(F)
    return basis


def _reduction_direction(V, matrices):
    """Hermitian ``D`` with ``Tr(V^H A_i V D) = 0`` for all ``i``, trace-free if possible."""
    r = V.shape[1]
    basis = _hermitian_basis(r)
    compressed = [V.conj().T @ A @ V for A in matrices]
    T = np.array([[np.real(np.trace(B @ E)) for E in basis] for B in compressed])
    _, s, Vt = np.linalg.svd(T)
    tol = 1e-12 * max(s.max() if s.size else 0.0, 1.0)
    rank = int(np.sum(s > tol))
    N = Vt[rank:].T  # coefficient vectors of the null space
    if N.shape[1] == 0:
        return None
    # prefer a trace-free member so the step never collapses X to zero
    tr = np.array([np.real(np.trace(E)) for E in basis])
    proj = tr @ N
    if N.shape[1] >= 2 and np.linalg.norm(proj) > 1e-10:
        coef = N @ np.linalg.svd(proj[None, :])[2][1]
    else:
        coef = N[:, 0]
    D = sum(c * E for c, E in zip(coef, basis))
    vals = np.linalg.eigvalsh(hermitian_part(D))
    if np.ptp(vals) <= 1e-9 * np.abs(vals).max():
        # only a multiple of the identity is admissible
        return None
    return D


def _reduce_once(V, D):
    vals, vecs = np.linalg.eigh(hermitian_part(D))
    # step until the most negative (or, flipping sign, most positive) eigenvalue hits zero
    if abs(vals[0]) >= abs(vals[-1]):
        alpha = -1.0 / vals[0]
    else:
        alpha = -1.0 / vals[-1]
    Z = np.eye(V.shape[1]) + alpha * hermitian_part(D)
    zv, zq = np.linalg.eigh(hermitian_part(Z))
    keep = zv > 1e-12 * zv.max()
    return V @ (zq[:, keep] * np.sqrt(zv[keep])[None, :])


@dataclass(frozen=True)
class ReductionTrace:
    """Ranks visited during reduction (for the monotonicity property)."""

    ranks: tuple
    min_eigenvalues: tuple


def reduce_rank(X, matrices, max_rank=1, trace=False):
    """Lower the rank of ``X`` while keeping ``Tr(A_i X)`` fixed.

    Stops at ``max_rank`` or when no admissible direction is left.
    Returns the factor ``V`` (``X' = V V^H``) and optionally the trace of
    visited ranks.
    """
    V = _factor(X)
    ranks, mins = [V.shape[1]], []
    while V.shape[1] > max_rank:
        D = _reduction_direction(V, matrices)
        if D is None:
            break
        V_new = _reduce_once(V, D)
        if V_new.shape[1] >= V.shape[1]:
            break
        V = V_new
        ranks.append(V.shape[1])
        mins.append(float(eigh(V @ V.conj().T).values[-1]))
    if trace:
        return V, ReductionTrace(tuple(ranks), tuple(mins))
    return V


def _gauss_newton(G, t, c0, tol=SOLVE_TOL, max_iters=MAX_NEWTON_ITERS):
    """Solve ``c^H G_i c = t_i`` for complex ``c`` by damped minimum-norm steps."""
    w = 1.0 / (1.0 + np.abs(t))
    k = len(c0)

    def resid(c):
        return w * (np.array([np.real(np.vdot(c, Gi @ c)) for Gi in G]) - t)

    c = c0.astype(complex)
    f = resid(c)
    lam = 1e-3
    for _ in range(max_iters):
        if np.max(np.abs(f)) <= tol:
            return c, f
        J = np.empty((len(G), 2 * k))
        for i, Gi in enumerate(G):
            g = Gi @ c
            J[i, :k] = 2.0 * w[i] * g.real
            J[i, k:] = 2.0 * w[i] * g.imag
        JJ = J @ J.T
        while True:
            step = -J.T @ np.linalg.solve(JJ + lam * np.eye(len(G)), f)
            c_try = c + step[:k] + 1j * step[k:]
            f_try = resid(c_try)
            if np.linalg.norm(f_try) < np.linalg.norm(f):
                c, f = c_try, f_try
                lam = max(lam / 10.0, 1e-15)
                break
            lam *= 10.0
            if lam > 1e12:
                return c, f
    return c, f


def _solve_in_subspace(B, matrices, targets, seeds, rng_seed=0):
    G = [hermitian_part(B.conj().T @ A @ B) for A in matrices]
    t = np.asarray(targets, dtype=float)
    starts = list(seeds)
    rng = np.random.default_rng(rng_seed)
    scale = np.sqrt(max(abs(x) for x in t)) if np.any(t) else 1.0
    for _ in range(N_RANDOM_STARTS):
        z = rng.standard_normal(B.shape[1]) + 1j * rng.standard_normal(B.shape[1])
        starts.append(scale * z / np.linalg.norm(z))
    best = None
    for c0 in starts:
        c, f = _gauss_newton(G, t, np.asarray(c0, dtype=complex))
        err = float(np.max(np.abs(f)))
        if np.linalg.norm(c) == 0.0:
            continue
        if best is None or err < best[1]:
            best = (c, err)
        if err <= SOLVE_TOL:
            break
    if best is None:
        raise DecompositionError("subspace solve produced only the zero vector")
    return B @ best[0], best[1]


def _positive_member(matrices, targets):
    """Index of a positive definite member with positive target, else ``None``."""
    mins = [eigh(A).values[-1] for A in matrices]
    p = int(np.argmax(mins))
    if mins[p] <= 0.0 or targets[p] <= 0.0:
        return None
    return p


def _decompose(X, matrices, rng_seed=0):
    matrices = [hermitian_part(np.asarray(A, dtype=complex)) for A in matrices]
    X = hermitian_part(np.asarray(X, dtype=complex))
    n = X.shape[0]
    if X.shape != matrices[0].shape:
        raise ValueError("X and the trace matrices must share a shape")
    if n < 3:
        raise ValueError("rank-one decomposition requires dimension N >= 3")
    targets = [float(np.real(np.trace(A @ X))) for A in matrices]
    V0 = _factor(X)
    if V0.shape[1] == 1:
        return V0[:, 0], targets
    V = reduce_rank(X, matrices, max_rank=1)
    if V.shape[1] == 1 and np.max(trace_residuals(V[:, 0], matrices, targets)) <= RESIDUAL_TOL * 1e-2:
        return V[:, 0], targets
    # stuck: solve in span(Range(V), z)
    range_now = np.linalg.svd(V, full_matrices=False)[0]
    if V0.shape[1] > V.shape[1]:
        # pick z inside the original range, outside the reduced one
        U0 = np.linalg.svd(V0, full_matrices=False)[0]
        comp = U0 - range_now @ (range_now.conj().T @ U0)
        Uc, sc, _ = np.linalg.svd(comp, full_matrices=False)
        z = Uc[:, int(np.argmax(sc))]
    else:
        Z = null_space(range_now.conj().T)
        z = Z[:, -1]
    B = np.column_stack([range_now, z])
    B, _ = np.linalg.qr(B)
    # seeds: reduced factor columns rescaled to the PD trace, and mixtures with z
    p = _positive_member(matrices, targets)
    seeds = []
    cols = [B.conj().T @ V[:, j] for j in range(V.shape[1])]
    cz = B.conj().T @ z
    raw = cols + [cols[0] + cz, cols[-1] - cz, cols[0] + 1j * cols[-1]]
    for c in raw:
        if p is not None:
            val = quad(B.conj().T @ matrices[p] @ B, c)
            if val > 0:
                c = c * np.sqrt(targets[p] / val)
        seeds.append(c)
    y, _ = _solve_in_subspace(B, matrices, targets, seeds, rng_seed)
    return y, targets


def _checked(y, matrices, targets, tol):
    res = trace_residuals(y, matrices, targets)
    if np.max(res) > tol:
        raise DecompositionError(f"trace residuals {res} exceed tolerance {tol:g}")
    return y


def rd3(X, A1, A2, A3, tol=RESIDUAL_TOL):
    """Vector ``y`` in ``Range(X)`` with ``y^H A_i y = Tr(A_i X)``, ``i = 1, 2, 3``.

    ``y`` carries the scale needed to match the traces; for ``Tr(X) = 1``
    with the identity among the matrices it is a unit vector.

    Raises
    ------
    ValueError
        For ``N < 3`` or a zero ``X``.
    DecompositionError
        When the residual check fails.
    """
    mats = [A1, A2, A3]
    y, t = _decompose(X, mats)
    return _checked(y, [hermitian_part(np.asarray(A, dtype=complex)) for A in mats], t, tol)


def rd4(X, A1, A2, A3, A4, tol=RESIDUAL_TOL):
    """Vector ``y`` with ``y^H A_i y = Tr(A_i X)`` for four Hermitian matrices.

    One of the matrices should be positive definite (the identity in the
    transmitter-2 subproblem) so that a solution in ``span(Range(X), z)``
    is guaranteed.
    """
    mats = [A1, A2, A3, A4]
    y, t = _decompose(X, mats)
    return _checked(y, [hermitian_part(np.asarray(A, dtype=complex)) for A in mats], t, tol)


def straddle_decomposition(X, G):
    """Split ``X = sum_k x_k x_k^H`` with every ``x_k^H G x_k = Tr(G X) / r``.

    Pairs of eigen-factors whose values straddle the common target are
    rotated by a real angle until one of them hits it exactly. The pair with
    the largest value gap is processed first; of the two roots of the
    rotation equation the smaller one is used.
    """
    G = hermitian_part(np.asarray(G, dtype=complex))
    P = _factor(X, rtol=1e-12)
    r = P.shape[1]
    delta = float(np.real(np.trace(G @ (P @ P.conj().T)))) / r
    pending = [P[:, j].copy() for j in range(r)]
    done = []
    while len(pending) > 1:
        excess = np.array([quad(G, p) - delta for p in pending])
        if np.all(np.abs(excess) <= 1e-14 * max(1.0, np.abs(excess).max())):
            break
        hi, lo = int(np.argmax(excess)), int(np.argmin(excess))
        a, b = pending[hi], pending[lo]
        qa, qb = excess[hi], excess[lo]
        cross = float(np.real(np.vdot(a, G @ b)))
        # x = c1 a + c2 b, x' = -c2 a + c1 b keeps a a^H + b b^H when c1^2 + c2^2 = 1;
        # x^H G x = delta  <=>  qb g^2 + 2 cross g + qa = 0 with g = c2 / c1
        root = np.sqrt(cross**2 - qa * qb)
        roots = np.array([(-cross + root) / qb, (-cross - root) / qb])
        g = roots[int(np.argmin(np.abs(roots)))]
        c1 = 1.0 / np.sqrt(1.0 + g * g)
        c2 = g * c1
        done.append(c1 * a + c2 * b)
        rest = -c2 * a + c1 * b
        pending = [p for k, p in enumerate(pending) if k not in (hi, lo)] + [rest]
    return np.column_stack(done + pending)


def _solution_rank(W):
    vals = eigh(W).values
    return int(np.sum(vals > SOLUTION_RANK_RTOL * vals[0])), vals


@dataclass(frozen=True)
class Extraction:
    """Extracted unit beamformer and the rank of the relaxed solution."""

    w: np.ndarray
    rank: int
    used_decomposition: bool


def _normalize(y):
    return y / np.linalg.norm(y)


def extract_w1(W1, ch, w2, sinr2_star, detail=False):
    """Unit ``w1`` preserving the objective and constraint traces of ``W1``.

    Rank-one solutions give their top eigenvector; otherwise the
    three-matrix decomposition on ``(C(w2), A_1(w2), I)`` is used.
    """
    rank, _ = _solution_rank(W1)
    if rank == 1:
        w = _normalize(eigh(W1).vectors[:, 0])
        used = False
    else:
        if ch.n_t < 3:
            raise ValueError("relaxed solution has rank > 1 and N_T = 2: decomposition unsupported")
        C = sinr2_constraint_matrix(ch, w2, sinr2_star)
        A1 = a1_matrix(ch, w2)
        W = hermitian_part(W1) / np.real(np.trace(W1))
        w = _normalize(rd3(W, C, A1, np.eye(ch.n_t)))
        used = True
    out = Extraction(w, rank, used)
    return out if detail else out.w


def extract_w2(W2, ch, w1, detail=False):
    """Unit ``w2`` preserving the four traces of a normalized lifted solution.

    Uses ``(C1(w1), A_2(w1), C2, I)`` for the four-matrix decomposition.
    """
    rank, _ = _solution_rank(W2)
    if rank == 1:
        w = _normalize(eigh(W2).vectors[:, 0])
        used = False
    else:
        if ch.n_t < 3:
            raise ValueError("relaxed solution has rank > 1 and N_T = 2: decomposition unsupported")
        W = hermitian_part(W2) / np.real(np.trace(W2))
        w = _normalize(
            rd4(W, leakage_matrix(ch, w1), a2_matrix(ch, w1), leakage_normalizer(ch), np.eye(ch.n_t))
        )
        used = True
    out = Extraction(w, rank, used)
    return out if detail else out.w
