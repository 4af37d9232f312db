"""Dense complex linear algebra used throughout the package.

All routines operate on small dense numpy arrays (up to roughly 16x16) and
are pure functions. Eigenvalues are always returned sorted in *descending*
order, so ``vals[0]`` is the largest eigenvalue and ``vecs[:, 0]`` its
eigenvector.
"""

from dataclasses import dataclass

import numpy as np

# Relative cutoff below which singular values / eigenvalues count as zero.
RANK_RTOL = 1e-10
HERMITIAN_RTOL = 1e-10


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues (descending) and the matching unit eigenvectors (columns)."""

    values: np.ndarray
    vectors: np.ndarray

    def __iter__(self):
        # allows ``vals, vecs = eigh(H)``
        yield self.values
        yield self.vectors

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class PencilEigenPairs(EigenPairs):
    """Finite spectrum of a Hermitian pencil plus the deflated directions.

    ``null_vectors`` spans the null space of ``B`` that was removed before
    solving the reduced regular pencil (the infinite or indeterminate part).
    """

    null_vectors: np.ndarray = None


def _as_square(H, name="H"):
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {H.shape}")
    return H


def hermitian_part(H):
    """Return ``(H + H^H) / 2``."""
    H = np.asarray(H, dtype=complex)
    return 0.5 * (H + H.conj().T)


def check_hermitian(H, name="H", rtol=HERMITIAN_RTOL):
    H = _as_square(H, name)
    scale = np.linalg.norm(H)
    if np.linalg.norm(H - H.conj().T) > rtol * max(scale, 1.0):
        raise ValueError(f"{name} is not Hermitian within tolerance {rtol:g}")
    return H


def eigh(H):
    """Eigendecomposition of a Hermitian matrix, largest eigenvalue first.

    Parameters
    ----------
    H : (n, n) array_like
        Hermitian matrix.

    Returns
    -------
    EigenPairs
        ``values`` sorted descending, ``vectors`` with unit-norm columns.

    Raises
    ------
    ValueError
        If ``H`` is not square or not Hermitian.
    """
    H = check_hermitian(H)
    vals, vecs = np.linalg.eigh(hermitian_part(H))
    return EigenPairs(vals[::-1].copy(), vecs[:, ::-1].copy())


def numerical_rank(values, rtol=RANK_RTOL):
    """Count entries of ``values`` larger than ``rtol`` times the largest magnitude."""
    values = np.abs(np.asarray(values, dtype=float))
    if values.size == 0 or values.max() == 0.0:
        return 0
    return int(np.sum(values > rtol * values.max()))


def range_basis(X, rtol=RANK_RTOL):
    """Orthonormal bases of the column space of ``X`` and of its complement."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    U, s, _ = np.linalg.svd(X, full_matrices=True)
    r = numerical_rank(s, rtol)
    return U[:, :r], U[:, r:]


def null_space(X, rtol=RANK_RTOL):
    """Orthonormal basis (columns) of the null space of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    _, s, Vh = np.linalg.svd(X, full_matrices=True)
    r = numerical_rank(s, rtol)
    return Vh[r:].conj().T


def generalized_eigh(A, B, rtol=RANK_RTOL):
    """Solve ``A v = lambda B v`` for Hermitian ``A`` and PSD ``B``.

    A singular ``B`` is handled by deflation: with ``B = V_+ L V_+^H`` on its
    range and ``V_0`` spanning its null space, the null-space component of
    ``v`` is eliminated through the Schur complement of ``V_0^H A V_0``. When
    that block vanishes together with the coupling ``V_0^H A V_+`` (as for a
    projector-compressed ``A``), the pencil decouples and ``V_0`` is simply
    reported as indeterminate.

    Returns
    -------
    PencilEigenPairs
        Finite eigenvalues sorted descending with eigenvectors normalized to
        unit Euclidean norm, and ``null_vectors`` spanning the deflated part.
    """
    A = check_hermitian(A, "A")
    B = check_hermitian(B, "B")
    if A.shape != B.shape:
        raise ValueError("A and B must have the same shape")
    bvals, bvecs = eigh(B)
    bmax = max(abs(bvals[0]), abs(bvals[-1]))
    if bmax == 0.0:
        raise ValueError("B must be nonzero")
    if bvals[-1] < -rtol * bmax:
        raise ValueError("B has a negative-definite direction; PSD required")

    r = int(np.sum(bvals > rtol * bmax))
    Vp, V0 = bvecs[:, :r], bvecs[:, r:]
    lam = bvals[:r]
    App = Vp.conj().T @ A @ Vp
    if V0.shape[1] == 0:
        S = App
        coupling = None
    else:
        A00 = V0.conj().T @ A @ V0
        A0p = V0.conj().T @ A @ Vp
        scale = max(np.linalg.norm(A), 1.0)
        if np.linalg.norm(A00) <= rtol * scale and np.linalg.norm(A0p) <= rtol * scale:
            S = App
            coupling = None
        else:
            # pinv covers a singular A00 in the least-squares sense
            coupling = -np.linalg.pinv(A00) @ A0p
            S = App + A0p.conj().T @ coupling

    # reduced regular pencil S a = mu diag(lam) a, symmetrized by lam^{-1/2}
    d = 1.0 / np.sqrt(lam)
    M = hermitian_part(d[:, None] * S * d[None, :])
    mu, Y = np.linalg.eigh(M)
    mu, Y = mu[::-1], Y[:, ::-1]
    a = d[:, None] * Y
    vecs = Vp @ a
    if coupling is not None:
        vecs = vecs + V0 @ (coupling @ a)
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    return PencilEigenPairs(mu.copy(), vecs, null_vectors=V0.copy())


def orth_projectors(X, rtol=RANK_RTOL):
    """Orthogonal projector onto ``range(X)`` and onto its complement.

    Rank deficiency is handled through the pseudo-inverse, so the zero matrix
    gives ``P = 0`` and ``P_perp = I``.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    Ur, _ = range_basis(X, rtol)
    P = Ur @ Ur.conj().T
    return P, np.eye(n) - P


def pseudo_inverse(X, rtol=RANK_RTOL):
    """Moore-Penrose pseudo-inverse with the package-wide relative rank cutoff."""
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    return np.linalg.pinv(X, rcond=rtol)


def hermitian_angle(a, b):
    """Hermitian angle between two nonzero complex vectors, in ``[0, pi/2]``.

    ``cos(theta) = |a^H b| / (||a|| ||b||)``.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("hermitian_angle is undefined for a zero vector")
    c = min(abs(np.vdot(a, b)) / (na * nb), 1.0)
    return float(np.arccos(c))


def direction(x):
    """Unit vector along ``x``; raises for a (numerically) zero vector."""
    x = np.asarray(x, dtype=complex)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise ValueError("direction of a zero vector is undefined")
    return x / nx


def canonical_phase(x):
    """Rotate ``x`` so its largest-magnitude entry is real and positive."""
    x = np.asarray(x, dtype=complex)
    k = int(np.argmax(np.abs(x)))
    if abs(x[k]) == 0.0:
        return x.copy()
    return x * (abs(x[k]) / x[k])


def quad(A, w):
    """Real part of the Hermitian form ``w^H A w``."""
    return float(np.real(np.vdot(w, A @ w)))
