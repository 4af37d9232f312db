"""Quadratic-form data of the two single-beamformer subproblems.

With one transmitter fixed, the SINR target on link 2 and the SINR of
link 1 become Hermitian forms in the free beamformer. This module builds
those matrices and checks which fixed ``w2`` admit a feasible ``w1``.
"""

from dataclasses import dataclass

import numpy as np

from .channel import effective_channel_matrix
from .linalg import eigh, hermitian_part, quad

NORM_TOL = 1e-9
ENERGY_TOL = 1e-9
SIGN_TOL = 1e-12


def signal_energy(ch, i, w):
    """``||H_ii w||^2``."""
    v = ch.direct(i) @ np.asarray(w, dtype=complex)
    return float(np.vdot(v, v).real)


def sinr2_constraint_matrix(ch, w2, sinr2_star):
    """Hermitian ``C(w2)`` such that ``SINR_2(w1, w2) = SINR_2*`` iff ``w1^H C w1 = 0``.

    Valid for unit-norm ``w1`` and under the energy condition
    ``||H22 w2||^2 >= sigma_2^2 SINR_2*``.
    """
    w2 = np.asarray(w2, dtype=complex)
    g = ch.H12.conj().T @ (ch.H22 @ w2)
    slack = signal_energy(ch, 2, w2) - ch.sigma2_sq * sinr2_star
    M = ch.sigma2_sq * np.eye(ch.n_t) + ch.H12.conj().T @ ch.H12
    return hermitian_part(np.outer(g, g.conj()) - slack * M)


def leakage_matrix(ch, w1):
    """``C1(w1) = H21^H H11 w1 w1^H H11^H H21``; rank one by construction."""
    g = ch.H21.conj().T @ (ch.H11 @ np.asarray(w1, dtype=complex))
    return np.outer(g, g.conj())


def leakage_normalizer(ch):
    """``C2 = sigma_1^2 I + H21^H H21`` (positive definite)."""
    return hermitian_part(ch.sigma1_sq * np.eye(ch.n_t) + ch.H21.conj().T @ ch.H21)


def interference_quotient(ch, w1, w2):
    """``w2^H C1 w2 / w2^H C2 w2``, the part of ``SINR_1`` that ``w2`` controls.

    ``SINR_1 = ||H11 w1||^2 / sigma_1^2 - quotient / sigma_1^2`` for unit ``w2``.
    """
    return quad(leakage_matrix(ch, w1), w2) / quad(leakage_normalizer(ch), w2)


@dataclass(frozen=True)
class FeasibilityReport:
    """Outcome of the membership test for a fixed ``w2`` with its margins.

    ``norm_error`` is ``| ||w2||^2 - 1 |``; ``energy_margin`` is
    ``||H22 w2||^2 - sigma_2^2 SINR_2*``; ``eig_product`` is
    ``lambda_max(C) * lambda_min(C)`` (must be nonpositive).
    """

    feasible: bool
    norm_error: float
    energy_margin: float
    eig_product: float
    lambda_max: float
    lambda_min: float

    def __bool__(self):
        return self.feasible


def feasibility_check_w2(ch, w2, sinr2_star):
    """Whether some unit ``w1`` can meet ``SINR_2 = SINR_2*`` against this ``w2``.

    Parameters
    ----------
    ch : ChannelSet
    w2 : array_like
        Candidate transmit beamformer of link 2.
    sinr2_star : float
        SINR target of link 2 (linear scale).

    Returns
    -------
    FeasibilityReport
        Truthy iff ``w2`` has unit norm, enough direct-link energy, and
        ``C(w2)`` is not definite.
    """
    w2 = np.asarray(w2, dtype=complex).ravel()
    norm_error = abs(float(np.vdot(w2, w2).real) - 1.0)
    energy_margin = signal_energy(ch, 2, w2) - ch.sigma2_sq * sinr2_star
    vals = eigh(sinr2_constraint_matrix(ch, w2, sinr2_star)).values
    lmax, lmin = float(vals[0]), float(vals[-1])
    product = lmax * lmin
    scale = max(abs(lmax), abs(lmin)) ** 2
    ok = (
        norm_error <= NORM_TOL
        and energy_margin >= -ENERGY_TOL
        and product <= SIGN_TOL * scale
    )
    return FeasibilityReport(bool(ok), norm_error, energy_margin, product, lmax, lmin)


def null_quadratic_unit_vector(C, rtol=1e-10):
    """Unit vector ``w`` with ``w^H C w = 0`` for a non-definite Hermitian ``C``.

    If ``C`` has a (numerically) zero eigenvalue the matching eigenvector is
    returned. Otherwise the extreme eigenvectors are mixed so that the
    positive and negative contributions cancel.

    Raises
    ------
    ValueError
        If ``C`` is definite, so no such vector exists.
    """
    vals, vecs = eigh(C)
    lmax, lmin = vals[0], vals[-1]
    scale = max(abs(lmax), abs(lmin))
    if scale == 0.0:
        return vecs[:, 0].copy()
    if lmax * lmin > SIGN_TOL * scale**2:
        raise ValueError("matrix is definite; no unit vector makes the form vanish")
    small = np.abs(vals) <= rtol * scale
    if np.any(small):
        k = int(np.flatnonzero(small)[-1])
        return vecs[:, k].copy()
    gap = lmax - lmin
    return np.sqrt(-lmin / gap) * vecs[:, 0] + np.sqrt(lmax / gap) * vecs[:, -1]


def a1_matrix(ch, w2):
    """Objective matrix of the transmitter-1 subproblem, ``A_1(w2)``."""
    return effective_channel_matrix(ch, 1, w2)


def a2_matrix(ch, w1):
    """Constraint matrix of the transmitter-2 subproblem, ``A_2(w1)``."""
    return effective_channel_matrix(ch, 2, w1)
