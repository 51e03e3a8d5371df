"""Tests for the two-phase triangularization and DPC order handling."""

import math

import numpy as np
import pytest

from ctwrc.exceptions import InvalidArgsError, TooLargeError
from ctwrc.scheme.matfact import ChannelSet, gen_channels
from ctwrc.scheme.triangulate import (
    Permutation,
    RandomOrders,
    enumerate_permutations,
    interference_identity_residual,
    triangularize,
)
from ctwrc.utils.seeding import trial_rng


class TestPermutation:
    def test_from_order_builds_inverse(self):
        perm = Permutation.from_order([2, 0, 1])
        assert perm.mu == (2, 0, 1)
        assert perm.q == (1, 2, 0)
        assert all(perm.mu[perm.q[k]] == k for k in range(3))

    def test_label_is_one_based(self):
        assert Permutation.from_order([1, 2, 0]).label == "2-3-1"

    def test_identity(self):
        perm = Permutation.identity(4)
        assert perm.mu == perm.q == (0, 1, 2, 3)
        assert perm.K == 4

    def test_rejects_non_permutation(self):
        with pytest.raises(InvalidArgsError):
            Permutation.from_order([0, 0, 1])

    def test_rejects_mismatched_inverse(self):
        with pytest.raises(InvalidArgsError):
            Permutation(mu=(1, 0), q=(0, 1))


class TestTriangularize:
    """Factor identities of one channel realization."""

    def test_first_phase_factors(self, channel, tri):
        np.testing.assert_allclose(tri.Q_MR @ tri.R_MR, channel.H_MR, atol=1e-10)
        np.testing.assert_allclose(tri.R_BR @ tri.Q_BR, tri.Q_MR.conj().T @ channel.H_BR,
                                   atol=1e-10)

    def test_second_phase_factors_follow_order(self, channel, tri):
        mu = list(tri.perm.mu)
        np.testing.assert_allclose(tri.L_RM @ tri.Q_RM, channel.H_RM[mu, :], atol=1e-10)
        np.testing.assert_allclose(tri.Q_RB @ tri.L_RB, channel.H_RB @ tri.Q_RM.conj().T,
                                   atol=1e-10)

    def test_interference_split(self, tri):
        """R_BR = (I + U_R) R'_BR and R_MR = (I + U_R) D."""
        eye = np.eye(tri.K)
        D = np.diag(tri.d_MR)
        np.testing.assert_allclose((eye + tri.U_R) @ tri.Rp_BR, tri.R_BR, atol=1e-10)
        np.testing.assert_allclose((eye + tri.U_R) @ D, tri.R_MR, atol=1e-10)

    def test_u_r_strictly_upper(self, tri):
        assert np.all(np.tril(tri.U_R) == 0)

    def test_rp_br_keeps_diagonal(self, tri):
        np.testing.assert_allclose(np.diag(tri.Rp_BR), np.diag(tri.R_BR), atol=1e-10)

    def test_alpha_and_effective_noise(self, channel, tri):
        r = np.diag(tri.R_BR).real
        np.testing.assert_allclose(tri.alpha, tri.d_MR / r)
        np.testing.assert_allclose(tri.sigma_k2, channel.sigma2 / r ** 2)

    def test_diagonals_indexed_by_stream(self, tri):
        """l_RM_diag[k] is the diagonal entry at the position of stream k."""
        L = np.diag(tri.L_RM).real
        for k in range(tri.K):
            assert tri.l_RM_diag[k] == L[tri.perm.q[k]]

    def test_first_phase_ignores_order(self, channel):
        a = triangularize(channel, Permutation.identity(3))
        b = triangularize(channel, Permutation.from_order([2, 1, 0]))
        np.testing.assert_allclose(a.R_BR, b.R_BR)
        np.testing.assert_allclose(a.R_MR, b.R_MR)

    def test_stream_gain_product_is_order_free(self, channel):
        """prod l_RM,k^2 = |det H_RM|^2 whatever the DPC order."""
        det2 = abs(np.linalg.det(channel.H_RM)) ** 2
        for perm in enumerate_permutations(3, "exhaustive"):
            tri = triangularize(channel, perm)
            assert np.prod(tri.l_RM2) == pytest.approx(det2, rel=1e-9)

    def test_diagonal_ms_channel_needs_no_precompensation(self):
        """Powers of two keep the diagonal solve exact."""
        rng = trial_rng(8)
        H = (rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))) / np.sqrt(2)
        ch = ChannelSet(K=3, H_BR=H[0], H_MR=np.diag([1.0, 2.0, 0.5]), H_RB=H[1], H_RM=H[2])
        tri = triangularize(ch, Permutation.from_order([2, 0, 1]))
        assert np.all(tri.U_R == 0)
        np.testing.assert_array_equal(tri.Rp_BR, tri.R_BR)
        np.testing.assert_array_equal(tri.d_MR, [1.0, 2.0, 0.5])

    def test_wrong_order_length_raises(self, channel):
        with pytest.raises(InvalidArgsError):
            triangularize(channel, Permutation.identity(2))

    def test_single_stream(self):
        ch = gen_channels(1, 3)
        tri = triangularize(ch, Permutation.identity(1))
        assert tri.U_R.shape == (1, 1)
        assert tri.U_R[0, 0] == 0
        assert tri.r_BR2[0] == pytest.approx(abs(ch.H_BR[0, 0]) ** 2)


class TestInterferenceIdentity:
    def test_residual_vanishes_for_random_signals(self, tri):
        rng = trial_rng(5)
        S_B = rng.standard_normal((3, 16)) + 1j * rng.standard_normal((3, 16))
        S_M = rng.standard_normal((3, 16)) + 1j * rng.standard_normal((3, 16))
        assert interference_identity_residual(tri, S_B, S_M) < 1e-9

    def test_shape_mismatch_raises(self, tri):
        with pytest.raises(InvalidArgsError):
            interference_identity_residual(tri, np.zeros((3, 4)), np.zeros((3, 5)))


class TestEnumeratePermutations:
    @pytest.mark.parametrize("K", [1, 2, 3, 4])
    def test_exhaustive_count_and_uniqueness(self, K):
        perms = enumerate_permutations(K, "exhaustive")
        assert len(perms) == math.factorial(K)
        assert len({p.mu for p in perms}) == len(perms)

    def test_exhaustive_is_lexicographic(self):
        perms = enumerate_permutations(3, "exhaustive")
        assert [p.label for p in perms[:3]] == ["1-2-3", "1-3-2", "2-1-3"]

    def test_exhaustive_too_large(self):
        with pytest.raises(TooLargeError) as exc:
            enumerate_permutations(7, "exhaustive")
        assert exc.value.error_code == "TOO_LARGE"

    def test_random_is_deterministic(self):
        a = enumerate_permutations(8, RandomOrders(count=20, seed=3))
        b = enumerate_permutations(8, RandomOrders(count=20, seed=3))
        assert [p.mu for p in a] == [p.mu for p in b]
        assert len(a) == 20

    def test_random_large_k(self):
        perms = enumerate_permutations(16, RandomOrders(count=5, seed=1))
        assert all(sorted(p.mu) == list(range(16)) for p in perms)

    def test_random_count_must_be_positive(self):
        with pytest.raises(InvalidArgsError):
            enumerate_permutations(3, RandomOrders(count=0, seed=1))

    def test_unknown_strategy(self):
        with pytest.raises(InvalidArgsError):
            enumerate_permutations(3, "greedy")  # type: ignore[arg-type]
