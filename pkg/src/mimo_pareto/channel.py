"""Two-user single-beam MIMO interference channel: instance data and rates.

Link ``i`` carries ``TX_i -> RX_i`` over ``H_ii``; the cross-talk from
``TX_k`` into ``RX_i`` uses ``H_ki``. Link indices are 1 and 2 throughout.
Beamformers are plain complex numpy vectors of length ``N_T``.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitian_angle, hermitian_part

POWER_SLACK = 1e-12
FULL_POWER_TOL = 1e-9


@dataclass(frozen=True)
class ChannelSet:
    """The four channel matrices (each ``N_R x N_T``) and the noise powers.

    ``H12`` is the cross-talk from TX1 into RX2 and ``H21`` from TX2 into
    RX1, matching the ``H_ki`` (from ``k`` into ``i``) convention.
    """

    H11: np.ndarray
    H12: np.ndarray
    H21: np.ndarray
    H22: np.ndarray
    sigma1_sq: float
    sigma2_sq: float

    def __post_init__(self):
        mats = {}
        for name in ("H11", "H12", "H21", "H22"):
            M = np.atleast_2d(np.array(getattr(self, name), dtype=complex))
            if M.ndim != 2:
                raise ValueError(f"{name} must be a 2-D matrix")
            M.setflags(write=False)
            mats[name] = M
            object.__setattr__(self, name, M)
        shapes = {M.shape for M in mats.values()}
        if len(shapes) != 1:
            raise ValueError(f"channel matrices must share one shape, got {sorted(shapes)}")
        n_r, n_t = shapes.pop()
        if n_r < 2 or n_t < 2:
            raise ValueError("need N_R >= 2 and N_T >= 2")
        for name in ("sigma1_sq", "sigma2_sq"):
            s = float(getattr(self, name))
            if not np.isfinite(s) or s <= 0.0:
                raise ValueError(f"{name} must be a positive finite number")
            object.__setattr__(self, name, s)

    @classmethod
    def from_snr_db(cls, H11, H12, H21, H22, snr_db):
        """Build an instance with both noise powers ``10^(-SNR/10)``."""
        s = 10.0 ** (-float(snr_db) / 10.0)
        return cls(H11, H12, H21, H22, s, s)

    @property
    def n_r(self):
        return self.H11.shape[0]

    @property
    def n_t(self):
        return self.H11.shape[1]

    def direct(self, i):
        """``H_ii``."""
        return self.H11 if i == 1 else self.H22 if i == 2 else _bad(i)

    def cross(self, i):
        """Cross-talk matrix ``H_ki`` arriving at receiver ``i``."""
        return self.H21 if i == 1 else self.H12 if i == 2 else _bad(i)

    def noise(self, i):
        return self.sigma1_sq if i == 1 else self.sigma2_sq if i == 2 else _bad(i)

    def swapped(self):
        """The same channel with the link labels interchanged."""
        return ChannelSet(self.H22, self.H21, self.H12, self.H11, self.sigma2_sq, self.sigma1_sq)

    def as_dict(self):
        return {
            "H11": self.H11, "H12": self.H12, "H21": self.H21, "H22": self.H22,
            "sigma1_sq": self.sigma1_sq, "sigma2_sq": self.sigma2_sq,
        }


def _bad(i):
    raise ValueError(f"link index must be 1 or 2, got {i!r}")


@dataclass(frozen=True)
class RatePoint:
    """Achieved rate pair in bits/s/Hz together with the beamformers."""

    R1: float
    R2: float
    w1: np.ndarray = field(repr=False)
    w2: np.ndarray = field(repr=False)

    @property
    def rates(self):
        return (self.R1, self.R2)


def as_beamformer(w, n_t=None, name="w"):
    """Validate a transmit beamformer (complex vector, ``||w||^2 <= 1``)."""
    w = np.asarray(w, dtype=complex).ravel()
    if n_t is not None and w.shape[0] != n_t:
        raise ValueError(f"{name} must have length {n_t}, got {w.shape[0]}")
    if np.vdot(w, w).real > 1.0 + POWER_SLACK:
        raise ValueError(f"{name} violates the unit power constraint")
    return w


def is_full_power(w, tol=FULL_POWER_TOL):
    w = np.asarray(w, dtype=complex)
    return abs(np.vdot(w, w).real - 1.0) <= tol


def _vec(ch, w, name):
    w = np.asarray(w, dtype=complex).ravel()
    if w.shape[0] != ch.n_t:
        raise ValueError(f"{name} must have length {ch.n_t}, got {w.shape[0]}")
    return w


def effective_channel_matrix(ch, i, w_k):
    """``A_i(w_k) = H_ii^H (sigma_i^2 I + H_ki w_k w_k^H H_ki^H)^{-1} H_ii``.

    The SINR of link ``i`` is the Hermitian form of this matrix in ``w_i``.
    """
    w_k = _vec(ch, w_k, "w_k")
    Hii, Hki, s = ch.direct(i), ch.cross(i), ch.noise(i)
    v = Hki @ w_k
    M = s * np.eye(ch.n_r) + np.outer(v, v.conj())
    return hermitian_part(Hii.conj().T @ np.linalg.solve(M, Hii))


def effective_channel_matrix_lemma(ch, i, w_k):
    """Same matrix as :func:`effective_channel_matrix` via the inversion lemma."""
    w_k = _vec(ch, w_k, "w_k")
    Hii, Hki, s = ch.direct(i), ch.cross(i), ch.noise(i)
    v = Hki @ w_k
    inv = np.eye(ch.n_r) / s - np.outer(v, v.conj()) / (s * (s + np.vdot(v, v).real))
    return hermitian_part(Hii.conj().T @ inv @ Hii)


def _pair(w1, w2, i):
    return (w1, w2) if i == 1 else (w2, w1)


def mmse_filter(ch, i, w1, w2):
    """MMSE receive vector of link ``i`` for the given transmit pair."""
    w1, w2 = _vec(ch, w1, "w1"), _vec(ch, w2, "w2")
    w_i, w_k = _pair(w1, w2, i)
    if not np.any(w_i):
        raise ValueError(f"w{i} is zero; the MMSE filter is undefined")
    a = ch.direct(i) @ w_i
    b = ch.cross(i) @ w_k
    R = ch.noise(i) * np.eye(ch.n_r) + np.outer(a, a.conj()) + np.outer(b, b.conj())
    return np.linalg.solve(R, a)


def sinr_with_filter(ch, i, w1, w2, g):
    """SINR of link ``i`` for an explicit receive vector ``g`` (may be batched).

    ``g`` may be a single vector of length ``N_R`` or an array whose last
    axis has length ``N_R``; the result then has the leading shape.
    """
    w1, w2 = _vec(ch, w1, "w1"), _vec(ch, w2, "w2")
    w_i, w_k = _pair(w1, w2, i)
    a = ch.direct(i) @ w_i
    b = ch.cross(i) @ w_k
    g = np.asarray(g, dtype=complex)
    sig = np.abs(g.conj() @ a) ** 2
    intf = np.abs(g.conj() @ b) ** 2
    return sig / (ch.noise(i) * np.sum(np.abs(g) ** 2, axis=-1) + intf)


def sinr(ch, i, w1, w2):
    """SINR of link ``i`` with the MMSE receiver: ``w_i^H A_i(w_k) w_i``."""
    w1, w2 = _vec(ch, w1, "w1"), _vec(ch, w2, "w2")
    w_i, w_k = _pair(w1, w2, i)
    A = effective_channel_matrix(ch, i, w_k)
    return max(float(np.vdot(w_i, A @ w_i).real), 0.0)


def sinr_angle_form(ch, i, w1, w2):
    """SINR of link ``i`` written through the Hermitian angle.

    Weighted sum of the interference-free SNR and the fully-aligned SINR
    with weights ``sin^2`` and ``cos^2`` of the angle between the desired
    and interfering receive signatures. Degenerate signatures follow the
    continuous limits: no interference gives the SNR, no signal gives 0.
    """
    w1, w2 = _vec(ch, w1, "w1"), _vec(ch, w2, "w2")
    w_i, w_k = _pair(w1, w2, i)
    a = ch.direct(i) @ w_i
    b = ch.cross(i) @ w_k
    s = ch.noise(i)
    pa = np.vdot(a, a).real
    pb = np.vdot(b, b).real
    if pa == 0.0:
        return 0.0
    if pb == 0.0:
        return pa / s
    theta = hermitian_angle(a, b)
    c2 = np.cos(theta) ** 2
    return (1.0 - c2) * pa / s + c2 * pa / (s + pb)


def rate(sinr_value):
    return float(np.log2(1.0 + sinr_value))


def rate_pair(ch, w1, w2):
    """Rates of both links in bits/s/Hz."""
    w1, w2 = _vec(ch, w1, "w1"), _vec(ch, w2, "w2")
    return RatePoint(rate(sinr(ch, 1, w1, w2)), rate(sinr(ch, 2, w1, w2)), w1.copy(), w2.copy())


def random_unit_vectors(rng, n, count=None):
    """I.i.d. standard complex Gaussian vectors normalized to unit length."""
    shape = (n,) if count is None else (count, n)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def batch_rates(ch, W1, W2):
    """Vectorized MMSE rates for stacks of beamformer pairs (rows).

    Uses the inversion-lemma form, so no per-pair matrix inverse is needed.
    """
    W1 = np.asarray(W1, dtype=complex)
    W2 = np.asarray(W2, dtype=complex)
    out = []
    for i, Wi, Wk in ((1, W1, W2), (2, W2, W1)):
        a = Wi @ ch.direct(i).T
        b = Wk @ ch.cross(i).T
        s = ch.noise(i)
        pa = np.sum(np.abs(a) ** 2, axis=1)
        pb = np.sum(np.abs(b) ** 2, axis=1)
        ab = np.abs(np.sum(a.conj() * b, axis=1)) ** 2
        out.append(np.log2(1.0 + pa / s - ab / (s * (s + pb))))
    return out[0], out[1]
