import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mimo_pareto.rankone import (
    DecompositionError,
    extract_w1,
    extract_w2,
    rd3,
    rd4,
    reduce_rank,
    straddle_decomposition,
    trace_residuals,
)
from mimo_pareto.sdp import build_p2, build_p5, solve, w2_matrix_from_p5
from mimo_pareto.subproblems import (
    a1_matrix,
    a2_matrix,
    leakage_matrix,
    leakage_normalizer,
    signal_energy,
    sinr2_constraint_matrix,
)

from conftest import random_channel, random_unit

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def rand_herm(rng, n):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (Z + Z.conj().T)


def rand_psd(rng, n, r):
    Z = rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))
    X = Z @ Z.conj().T
    return X / np.trace(X).real


def targets(X, mats):
    return [float(np.trace(A @ X).real) for A in mats]


class TestDecompositions:
    @settings(max_examples=80, deadline=None)
    @given(seed=seeds, n=st.integers(3, 6), data=st.data())
    def test_three_matrices(self, seed, n, data):
        r = data.draw(st.integers(1, min(4, n)))
        rng = np.random.default_rng(seed)
        X = rand_psd(rng, n, r)
        mats = [rand_herm(rng, n), rand_herm(rng, n), np.eye(n)]
        y = rd3(X, *mats)
        assert np.max(trace_residuals(y, mats, targets(X, mats))) <= 1e-9
        assert np.linalg.norm(y) == pytest.approx(1.0, abs=1e-9)

    @settings(max_examples=80, deadline=None)
    @given(seed=seeds, n=st.integers(3, 6), data=st.data())
    def test_four_matrices(self, seed, n, data):
        r = data.draw(st.integers(1, min(4, n)))
        rng = np.random.default_rng(seed)
        X = rand_psd(rng, n, r)
        mats = [rand_herm(rng, n), rand_herm(rng, n), rand_herm(rng, n), np.eye(n)]
        y = rd4(X, *mats)
        assert np.max(trace_residuals(y, mats, targets(X, mats))) <= 1e-9

    def test_rank_one_input_returns_its_factor(self):
        rng = np.random.default_rng(0)
        v = random_unit(rng, 4)
        X = np.outer(v, v.conj())
        y = rd3(X, rand_herm(rng, 4), rand_herm(rng, 4), np.eye(4))
        assert abs(np.vdot(v, y)) == pytest.approx(1.0, abs=1e-10)

    def test_impossible_tolerance_raises(self):
        rng = np.random.default_rng(1)
        X = rand_psd(rng, 3, 2)
        with pytest.raises(DecompositionError):
            rd3(X, rand_herm(rng, 3), rand_herm(rng, 3), np.eye(3), tol=-1.0)

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, n=st.integers(3, 6))
    def test_reduction_keeps_traces_and_lowers_rank(self, seed, n):
        rng = np.random.default_rng(seed)
        X = rand_psd(rng, n, n)
        mats = [rand_herm(rng, n), rand_herm(rng, n), np.eye(n)]
        V, tr = reduce_rank(X, mats, trace=True)
        assert all(a > b for a, b in zip(tr.ranks, tr.ranks[1:]))
        assert tr.ranks[-1] == 1
        Xr = V @ V.conj().T
        np.testing.assert_allclose(targets(Xr, mats), targets(X, mats), atol=1e-10)
        assert min(np.linalg.eigvalsh(Xr)) >= -1e-12

    @settings(max_examples=40, deadline=None)
    @given(seed=seeds, n=st.integers(2, 6), data=st.data())
    def test_straddle_split(self, seed, n, data):
        r = data.draw(st.integers(1, n))
        rng = np.random.default_rng(seed)
        X = rand_psd(rng, n, r)
        G = rand_herm(rng, n)
        P = straddle_decomposition(X, G)
        np.testing.assert_allclose(P @ P.conj().T, X, atol=1e-12)
        vals = [np.vdot(p, G @ p).real for p in P.T]
        np.testing.assert_allclose(vals, np.trace(G @ X).real / P.shape[1], atol=1e-10)


class TestExtraction:
    def test_extract_w1_preserves_traces(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            ch = random_channel(rng)
            w2 = random_unit(rng, 3)
            target = 0.5 * signal_energy(ch, 2, w2) / ch.sigma2_sq
            sol = solve(build_p2(ch, w2, target))
            ext = extract_w1(sol.X, ch, w2, target, detail=True)
            w = ext.w
            assert np.linalg.norm(w) == pytest.approx(1.0)
            assert abs(np.vdot(w, sinr2_constraint_matrix(ch, w2, target) @ w)) <= 1e-6
            assert np.vdot(w, a1_matrix(ch, w2) @ w).real == pytest.approx(sol.objective_value, rel=1e-6)

    def test_extract_w2_preserves_traces(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            ch = random_channel(rng)
            w1 = random_unit(rng, 3)
            target = 0.4 * np.linalg.eigvalsh(a2_matrix(ch, w1))[-1]
            sol = solve(build_p5(ch, w1, target))
            W2 = w2_matrix_from_p5(sol)
            w = extract_w2(W2, ch, w1)
            mats = [leakage_matrix(ch, w1), a2_matrix(ch, w1), leakage_normalizer(ch), np.eye(3)]
            # nearly rank-one solutions take the top eigenvector, which is exact
            # only up to the dropped eigenvalues
            assert np.max(trace_residuals(w, mats, targets(W2, mats))) <= 1e-6

    def test_higher_rank_needs_three_antennas(self, ref_channel):
        ch = random_channel(np.random.default_rng(4), 2, 2)
        with pytest.raises(ValueError, match="N_T = 2"):
            extract_w1(np.eye(2) / 2, ch, np.array([1, 0]), 0.1)
