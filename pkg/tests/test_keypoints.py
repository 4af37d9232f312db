import numpy as np
import pytest
import scipy.linalg

from mimo_pareto.channel import ChannelSet, rate, rate_pair, sinr
from mimo_pareto.keypoints import (
    altruistic,
    balanced_beamformer,
    egoism_share,
    egoistic,
    initial_w2,
    initialize_w2,
    key_points,
    turning_point,
    weak_boundary,
    zf_points,
)
from mimo_pareto.subproblems import feasibility_check_w2

from conftest import random_channel
from oracles import sinr_explicit_inverse

# Frozen from the oracle routes below (SVD and explicit null-space search) on
# the bundled reference channel at 10 dB.
REF_R1_BAR = 5.779041143448401
REF_R2_BAR = 6.867599338781322
REF_R1_UNDER = 4.107872032904872
REF_R2_UNDER = 5.495384022857629


def svd_rate(H, noise):
    return np.log2(1 + np.linalg.svd(H, compute_uv=False)[0] ** 2 / noise)


def altruistic_by_search(ch, i):
    """Best own SINR over unit vectors orthogonal to the leakage direction."""
    k = 3 - i
    ego_k = np.linalg.svd(ch.direct(k))[2][0].conj()
    x = ch.cross(k).conj().T @ ch.direct(k) @ ego_k
    N = scipy.linalg.null_space(x.conj()[None, :])
    Hii, Hki = ch.direct(i), ch.cross(i)
    b = Hki @ ego_k
    R = ch.noise(i) * np.eye(ch.n_r) + np.outer(b, b.conj())
    A = Hii.conj().T @ np.linalg.inv(R) @ Hii
    vals, vecs = np.linalg.eigh(N.conj().T @ A @ N)
    return N @ vecs[:, -1], vals[-1]


class TestReferenceKeyPoints:
    def test_frozen_values_match_oracles(self, ref_channel, ref_keypoints):
        kp = ref_keypoints
        assert svd_rate(ref_channel.H11, 0.1) == pytest.approx(REF_R1_BAR, abs=1e-12)
        assert svd_rate(ref_channel.H22, 0.1) == pytest.approx(REF_R2_BAR, abs=1e-12)
        assert kp.r1_bar == pytest.approx(REF_R1_BAR, abs=1e-12)
        assert kp.r2_bar == pytest.approx(REF_R2_BAR, abs=1e-12)
        assert kp.r1_under == pytest.approx(REF_R1_UNDER, abs=1e-10)
        assert kp.r2_under == pytest.approx(REF_R2_UNDER, abs=1e-10)

    @pytest.mark.parametrize("i", [1, 2])
    def test_altruistic_matches_search(self, ref_channel, i):
        w_ref, best = altruistic_by_search(ref_channel, i)
        w = altruistic(ref_channel, i)
        ego_k = egoistic(ref_channel, 3 - i)[0]
        own = sinr(ref_channel, i, *((w, ego_k) if i == 1 else (ego_k, w)))
        assert own == pytest.approx(best, rel=1e-10)
        assert abs(np.vdot(w_ref, w)) == pytest.approx(1.0, abs=1e-9)

    def test_turning_point_nulls_interference(self, ref_channel, ref_keypoints):
        kp = ref_keypoints
        leak = np.vdot(ref_channel.H11 @ kp.w1_ego, ref_channel.H21 @ kp.w2_alt)
        assert abs(leak) <= 1e-9
        assert kp.t1.R1 == pytest.approx(kp.r1_bar, abs=1e-9)
        assert kp.t2.R2 == pytest.approx(kp.r2_bar, abs=1e-9)

    def test_turning_point_function(self, ref_channel, ref_keypoints):
        assert turning_point(ref_channel, 1).rates == pytest.approx(ref_keypoints.t1.rates)
        assert turning_point(ref_channel, 2).rates == pytest.approx(ref_keypoints.t2.rates)
        with pytest.raises(ValueError):
            turning_point(ref_channel, 3)

    def test_single_user_points(self, ref_keypoints):
        kp = ref_keypoints
        assert kp.su1.rates == pytest.approx((kp.r1_bar, 0.0))
        assert kp.su2.rates == pytest.approx((0.0, kp.r2_bar))

    def test_altruistic_phase_alignment(self, ref_keypoints):
        c = np.vdot(ref_keypoints.w1_ego, ref_keypoints.w1_alt)
        assert abs(c.imag) <= 1e-12 and c.real >= 0


class TestSpecialChannels:
    def test_no_cross_talk_rectangle(self):
        rng = np.random.default_rng(0)
        ch = random_channel(rng)
        ch = ChannelSet(ch.H11, 0 * ch.H12, 0 * ch.H21, ch.H22, 0.1, 0.1)
        kp = key_points(ch)
        assert kp.t1.rates == pytest.approx((kp.r1_bar, kp.r2_bar))
        assert kp.t2.rates == pytest.approx((kp.r1_bar, kp.r2_bar))
        zf = zf_points(ch)
        assert zf.points[0].rates == pytest.approx((kp.r1_bar, kp.r2_bar))

    def test_symmetric_channels_mirror(self):
        rng = np.random.default_rng(1)
        ch = random_channel(rng)
        kp, kq = key_points(ch), key_points(ch.swapped())
        assert (kq.t1.R2, kq.t1.R1) == pytest.approx(kp.t2.rates, rel=1e-10)
        assert (kq.r1_bar, kq.r2_under) == pytest.approx((kp.r2_bar, kp.r1_under), rel=1e-10)

    def test_zero_direct_channel(self):
        ch = ChannelSet(np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2), 1.0, 1.0)
        with pytest.raises(ValueError, match="zero"):
            egoistic(ch, 1)


class TestWeakBoundary:
    @pytest.mark.parametrize("which", [1, 2])
    def test_endpoints_and_closed_form(self, ref_channel, ref_keypoints, which):
        kp = ref_keypoints
        pts = weak_boundary(ref_channel, which, 11)
        gam = np.linspace(0, 1, 11)
        if which == 1:
            assert pts[0].rates == pytest.approx(kp.su1.rates)
            assert pts[-1].rates == pytest.approx(kp.t1.rates)
            np.testing.assert_allclose([p.R1 for p in pts], kp.r1_bar, atol=1e-9)
            np.testing.assert_allclose([p.R2 for p in pts],
                                       np.log2(1 + gam * (2**kp.r2_under - 1)), atol=1e-9)
        else:
            assert pts[-1].rates == pytest.approx(kp.t2.rates)
            np.testing.assert_allclose([p.R2 for p in pts], kp.r2_bar, atol=1e-9)

    def test_sample_count_validated(self, ref_channel):
        with pytest.raises(ValueError):
            weak_boundary(ref_channel, 1, 1)


class TestZeroForcing:
    def test_reference_points_null_both_links(self, ref_channel):
        zf = zf_points(ref_channel)
        assert len(zf) >= 1 and zf.diagnostic == ""
        for p in zf:
            for i, (wi, wk) in ((1, (p.w1, p.w2)), (2, (p.w2, p.w1))):
                leak = np.linalg.norm(ref_channel.cross(3 - i) @ wi)
                # the leaked signal is orthogonal to the victim's MMSE direction
                a = ref_channel.direct(3 - i) @ wk
                assert abs(np.vdot(a, ref_channel.cross(3 - i) @ wi)) <= 1e-9 * (1 + leak)
            noise_only = np.linalg.norm(ref_channel.H11 @ p.w1) ** 2 / ref_channel.sigma1_sq
            assert p.R1 == pytest.approx(rate(noise_only), abs=1e-9)
            assert len(zf.basis_rates) == len(zf)

    def test_points_inside_region(self, ref_channel, ref_keypoints):
        for p in zf_points(ref_channel):
            assert p.R1 <= ref_keypoints.r1_bar + 1e-9 and p.R2 <= ref_keypoints.r2_bar + 1e-9


class TestBlends:
    def test_balanced_endpoints(self, ref_channel, ref_keypoints):
        kp = ref_keypoints
        for i in (1, 2):
            np.testing.assert_allclose(balanced_beamformer(ref_channel, i, 1, 0, kp), kp.ego(i))
            np.testing.assert_allclose(balanced_beamformer(ref_channel, i, 0, 1j, kp), 1j * kp.alt(i))
        w = balanced_beamformer(ref_channel, 1, 0.3 * np.exp(1j), 0.7, kp)
        assert np.linalg.norm(w) == pytest.approx(1.0)
        with pytest.raises(ValueError, match="must equal 1"):
            balanced_beamformer(ref_channel, 1, 0.5, 0.6, kp)

    @pytest.mark.parametrize("R2_star", [6.2898, 5.6398])
    def test_nominal_initialization_is_feasible(self, ref_channel, ref_keypoints, R2_star):
        init = initialize_w2(ref_channel, R2_star, keypoints=ref_keypoints)
        assert init.stage == "nominal"
        assert init.zeta == pytest.approx(egoism_share(ref_keypoints, R2_star))
        assert feasibility_check_w2(ref_channel, init.w2, 2**R2_star - 1)
        np.testing.assert_allclose(initial_w2(ref_channel, R2_star, keypoints=ref_keypoints), init.w2)

    def test_target_outside_range(self, ref_channel, ref_keypoints):
        with pytest.raises(ValueError, match="strictly inside"):
            initialize_w2(ref_channel, ref_keypoints.r2_bar + 0.1, keypoints=ref_keypoints)

    def test_share_endpoints(self, ref_keypoints):
        assert egoism_share(ref_keypoints, ref_keypoints.r2_bar) == pytest.approx(1.0)
        assert egoism_share(ref_keypoints, ref_keypoints.r2_under) == pytest.approx(0.0)

    def test_initialization_falls_back(self):
        # a channel where the nominal blend is rarely feasible still yields a feasible start
        rng = np.random.default_rng(11)
        for _ in range(5):
            ch = random_channel(rng, 2, 3)
            kp = key_points(ch)
            if kp.r2_bar - kp.r2_under < 1e-3:
                continue
            R2 = kp.r2_under + 0.9 * (kp.r2_bar - kp.r2_under)
            init = initialize_w2(ch, R2, keypoints=kp)
            assert init.stage in ("nominal", "nu", "random")
            assert feasibility_check_w2(ch, init.w2, 2**R2 - 1)


def test_rate_pair_uses_mmse(ref_channel, ref_keypoints):
    kp = ref_keypoints
    p = rate_pair(ref_channel, kp.w1_ego, kp.w2_ego)
    s1 = sinr_explicit_inverse(ref_channel.H11, ref_channel.H21, 0.1, kp.w1_ego, kp.w2_ego)
    assert p.R1 == pytest.approx(np.log2(1 + s1))
