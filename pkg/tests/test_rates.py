"""Tests for achievable rates, cut-set bounds and the optimality conditions."""

import numpy as np
import pytest

from ctwrc.exceptions import InvalidArgsError
from ctwrc.scheme.matfact import ChannelSet, gen_channels
from ctwrc.scheme.rates import (
    PowerProfile,
    Theorem2Record,
    Weights,
    achievable_tuple,
    check_theorem2,
    clamped_snr,
    cutset_bounds,
    evaluate,
    evaluate_conditions,
    stream_rates,
    weighted_cutset,
)
from ctwrc.scheme.triangulate import Permutation, triangularize


def _unitary_channel(K, seed, P):
    """Random unitary channels so the exact and high-SNR cuts agree quickly."""
    ch = gen_channels(K, seed)
    Qs = [np.linalg.qr(H)[0] for H in (ch.H_BR, ch.H_MR, ch.H_RB, ch.H_RM)]
    return ChannelSet(K=K, H_BR=Qs[0], H_MR=Qs[1], H_RB=Qs[2], H_RM=Qs[3],
                      P_B=P, P_R=P, P_M=P / K)


class TestHelpers:
    def test_clamped_snr(self):
        np.testing.assert_array_equal(clamped_snr([0.5, 1.0, 3.0]), [0.0, 0.0, 2.0])

    def test_equal_profile_splits_budgets(self, channel):
        pw = PowerProfile.equal(channel)
        np.testing.assert_allclose(pw.P_Bk, channel.P_B / 3)
        np.testing.assert_allclose(pw.P_Rk, channel.P_R / 3)

    def test_profile_over_budget_raises(self, channel):
        pw = PowerProfile(np.full(3, 50.0), np.full(3, 1.0))
        with pytest.raises(InvalidArgsError, match="exceeds the budget"):
            pw.validate(channel)

    def test_negative_power_raises(self):
        with pytest.raises(InvalidArgsError):
            PowerProfile(np.array([-1.0]), np.array([1.0]))

    def test_weights_validation(self):
        with pytest.raises(InvalidArgsError):
            Weights(np.zeros(2), np.zeros(2))
        w = Weights.per_direction(2, 0.4, 0.1)
        np.testing.assert_allclose(w.stacked, [0.4, 0.4, 0.1, 0.1])


class TestIdentityChannel:
    """Closed-form rates on identity channels, K = 2, P_B = P_R = 10, P_M = 10."""

    def test_link_rates(self, identity_channel):
        tri = triangularize(identity_channel, Permutation.identity(2))
        report = stream_rates(tri, PowerProfile.equal(identity_channel), identity_channel)
        np.testing.assert_allclose(report.R_BtoR, 0.5 * np.log2(5.0))
        np.testing.assert_allclose(report.R_MtoR, 0.5 * np.log2(10.0))
        np.testing.assert_allclose(report.R_RtoM, 0.5 * np.log2(6.0))
        np.testing.assert_allclose(report.R_RtoB, 0.5 * np.log2(6.0))

    def test_achievable_tuple_takes_minimum(self, identity_channel):
        tri = triangularize(identity_channel, Permutation.identity(2))
        report = stream_rates(tri, PowerProfile.equal(identity_channel), identity_channel)
        R_B, R_M, total, weighted = achievable_tuple(report, Weights.per_direction(2, 1.0, 0.0))
        np.testing.assert_allclose(R_B, 0.5 * np.log2(5.0))
        np.testing.assert_allclose(R_M, 0.5 * np.log2(6.0))
        assert total == pytest.approx(np.log2(30.0))
        assert weighted == pytest.approx(np.log2(5.0))

    def test_exact_cutset(self, identity_channel):
        dl, ul = cutset_bounds(identity_channel)
        assert dl == pytest.approx(np.log2(6.0))
        assert ul == pytest.approx(np.log2(6.0))

    def test_all_conditions_hold(self, identity_channel):
        tri = triangularize(identity_channel, Permutation.identity(2))
        record = check_theorem2(tri, identity_channel)
        assert record.rho_B == pytest.approx(1.0)
        assert record.flags() == {"c1": True, "c2": True, "c3": True, "c4": True}
        assert record.achieves_cutset


class TestRates:
    def test_zero_power_gives_zero_rate(self, channel, tri):
        pw = PowerProfile(np.zeros(3), np.zeros(3))
        report = stream_rates(tri, pw, channel)
        assert np.all(report.R_BtoR == 0)
        assert np.all(report.R_RtoM == 0)
        assert np.all(report.R_RtoB == 0)

    def test_weak_first_hop_clamps_to_zero(self, channel, tri):
        """r^2 P / sigma^2 <= 1 means no downlink rate on that stream."""
        P_B = 0.5 * channel.sigma2 / tri.r_BR2.max()
        pw = PowerProfile(np.full(3, P_B / 3), np.full(3, 1.0))
        report = stream_rates(tri, pw, channel.with_budgets(P_B=P_B))
        assert np.all(report.R_BtoR == 0)

    def test_equal_power_below_exact_cutset(self):
        for seed in range(20):
            ch = gen_channels(3, seed, P_B=100.0, P_R=100.0, P_M=100.0)
            tri = triangularize(ch, Permutation.identity(3))
            report = evaluate(tri, ch)
            assert report.sum_rate <= report.cutset_DL + report.cutset_UL + 1e-6

    def test_evaluate_fills_every_field(self, channel, tri):
        report = evaluate(tri, channel)
        assert report.R_B.shape == (3,)
        assert report.sum_rate == pytest.approx(report.R_B.sum() + report.R_M.sum())
        assert report.weighted_sum_rate == pytest.approx(report.sum_rate)
        assert np.isfinite(report.cutset_DL)
        assert report.theorem2 is not None

    def test_evaluate_rejects_foreign_profile(self, channel, tri):
        with pytest.raises(InvalidArgsError):
            evaluate(tri, channel, PowerProfile(np.ones(2), np.ones(2)))


class TestCutset:
    def test_high_snr_matches_exact_at_high_snr(self):
        ch = _unitary_channel(3, 4, P=1e6)
        exact = cutset_bounds(ch, "exact")
        high = cutset_bounds(ch, "high-snr")
        assert high[0] == pytest.approx(exact[0], abs=1e-4)
        assert high[1] == pytest.approx(exact[1], abs=1e-4)

    def test_high_snr_never_above_exact(self, channel):
        exact = cutset_bounds(channel, "exact")
        high = cutset_bounds(channel, "high-snr")
        assert high[0] <= exact[0] + 1e-12
        assert high[1] <= exact[1] + 1e-12

    def test_unknown_mode(self, channel):
        with pytest.raises(InvalidArgsError):
            cutset_bounds(channel, "loose")

    def test_weighted_cutset(self):
        w = Weights(np.array([0.4, 0.2]), np.array([0.1, 0.3]))
        assert weighted_cutset(2.0, 4.0, w) == pytest.approx(0.4 * 2.0 + 0.3 * 4.0)


class TestConditions:
    def _record(self, rho_B=1.0, rho_M=1.0):
        return Theorem2Record(rho_B=rho_B, rho_Bk=np.array([rho_B, 2 * rho_B]),
                              rho_M=rho_M, rho_Mk=np.array([rho_M, 2 * rho_M]))

    def test_equality_counts_as_satisfied(self):
        record = evaluate_conditions(self._record(), P_B=4.0, P_R=4.0, P_M=[4.0, 4.0])
        assert record.C1 and record.C3

    def test_strong_bs_breaks_c1(self):
        record = evaluate_conditions(self._record(), P_B=5.0, P_R=4.0, P_M=[4.0, 4.0])
        assert not record.C1
        assert not record.C2
        assert not record.achieves_cutset

    def test_c2_needs_the_largest_ratio(self):
        record = evaluate_conditions(self._record(), P_B=8.0, P_R=4.0, P_M=[4.0, 4.0])
        assert record.C2

    def test_c3_uses_geometric_mean(self):
        """rho_M (prod P_M)^(1/K) with P_M = (1, 16) is 4."""
        record = Theorem2Record(rho_B=1.0, rho_Bk=np.ones(2), rho_M=1.0,
                                rho_Mk=np.array([8.0, 1.0]))
        evaluate_conditions(record, P_B=1.0, P_R=4.0, P_M=[1.0, 16.0])
        assert record.C3
        evaluate_conditions(record, P_B=1.0, P_R=4.1, P_M=[1.0, 16.0])
        assert not record.C3
