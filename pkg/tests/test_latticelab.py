"""Tests for the noiseless nested-lattice codec."""

import numpy as np
import pytest

from ctwrc.exceptions import InvalidArgsError
from ctwrc.scheme.latticelab import (
    LatticeChain,
    bs_decode,
    dpc_encode,
    draw_codewords,
    encode_bs,
    encode_frame,
    first_phase_signal,
    frame_errors,
    mod_lattice,
    relay_frame,
    relay_transmit,
    run_frame,
    snap_lattice,
)
from ctwrc.scheme.matfact import gen_channels
from ctwrc.scheme.triangulate import Permutation, triangularize
from ctwrc.utils.seeding import trial_rng


def _setup(K=3, seed=4, **spacings):
    rng = trial_rng(seed)
    ch = gen_channels(K, rng)
    tri = triangularize(ch, Permutation.from_order(rng.permutation(K)))
    chain = LatticeChain.draw(rng, tri, T=32, **spacings)
    return rng, ch, tri, chain


class TestModLattice:
    def test_reduces_into_half_open_cell(self):
        x = np.array([-2.0, -1.0, 0.0, 1.0, 1.9, 2.0, 5.5])
        r = mod_lattice(x, 4.0)
        assert np.all(r >= -2.0) and np.all(r < 2.0)
        np.testing.assert_allclose(r, [-2.0, -1.0, 0.0, 1.0, 1.9, -2.0, 1.5])

    def test_complex_parts_reduced_separately(self):
        r = mod_lattice(np.array([3.0 - 5.0j]), 4.0)
        np.testing.assert_allclose(r, [-1.0 - 1.0j])

    def test_nesting_identity(self):
        """(x mod q_M) mod q_B = x mod q_B when q_B divides q_M."""
        rng = trial_rng(1)
        x = rng.uniform(-50, 50, 100) + 1j * rng.uniform(-50, 50, 100)
        np.testing.assert_allclose(mod_lattice(mod_lattice(x, 8.0), 4.0), mod_lattice(x, 4.0),
                                   atol=1e-12)

    def test_snap_to_nearest_point(self):
        np.testing.assert_allclose(snap_lattice(np.array([0.6 - 1.4j]), 0.5), [0.5 - 1.5j])


class TestLatticeChain:
    def test_spacings_nest(self):
        _, _, _, chain = _setup(q_C=0.5, b=3, m=2)
        np.testing.assert_allclose(chain.q_B, 1.5)
        np.testing.assert_allclose(chain.q_M, 3.0)
        np.testing.assert_allclose(chain.q_relay, chain.q_M)

    def test_dithers_lie_in_cells(self):
        _, _, _, chain = _setup()
        for d, q in ((chain.d_B, chain.q_B), (chain.d_M, chain.q_M), (chain.d_R, chain.q_M)):
            half = q[:, np.newaxis] / 2
            assert np.all(np.abs(d.real) <= half) and np.all(np.abs(d.imag) <= half)

    def test_beta_is_one_without_noise(self):
        _, _, _, chain = _setup()
        np.testing.assert_array_equal(chain.beta_M, 1.0)

    def test_mmse_beta_needs_power(self):
        rng, _, tri, _ = _setup()
        with pytest.raises(InvalidArgsError):
            LatticeChain.draw(rng, tri, sigma2=1.0)
        chain = LatticeChain.draw(rng, tri, sigma2=1.0, P_Rk=np.ones(3))
        assert np.all((chain.beta_M > 0) & (chain.beta_M < 1))

    def test_rejects_bad_nesting(self):
        rng, _, tri, _ = _setup()
        with pytest.raises(InvalidArgsError):
            LatticeChain.draw(rng, tri, b=0)


class TestCodewords:
    def test_codewords_are_fine_lattice_points_inside_cells(self):
        rng, _, _, chain = _setup(q_C=0.5, b=4, m=3)
        c_B, c_M = draw_codewords(rng, chain)
        for c, q in ((c_B, chain.q_B), (c_M, chain.q_M)):
            np.testing.assert_allclose(snap_lattice(c, 0.5), c)
            half = q[:, np.newaxis] / 2
            assert np.all(np.abs(c.real) < half) and np.all(np.abs(c.imag) < half)

    def test_unit_ratio_gives_zero_codeword(self):
        rng, _, _, chain = _setup(b=1, m=1)
        c_B, c_M = draw_codewords(rng, chain)
        assert np.all(c_B == 0) and np.all(c_M == 0)

    def test_dither_invariance(self):
        """Adding a Lambda_B point to c_B does not change the BS signal."""
        c = np.array([1.0 + 1.0j])
        a = encode_bs(c, np.array([0.3j]), np.array([0.7]), 4.0)
        b = encode_bs(c + 4.0 - 8.0j, np.array([0.3j]), np.array([0.7]), 4.0)
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestEndToEnd:
    """Exact recovery through both phases."""

    @pytest.mark.parametrize("K", [1, 2, 3, 4])
    def test_run_frame_recovers_everything(self, K):
        rng, ch, tri, chain = _setup(K=K, seed=20 + K)
        frame = run_frame(tri, ch, chain, rng)
        assert frame_errors(frame) == (0, 0)

    @pytest.mark.parametrize("spacings", [
        {"q_C": 1.0, "b": 1, "m": 1},
        {"q_C": 0.25, "b": 5, "m": 1},
        {"q_C": 2.0, "b": 3, "m": 4},
        {"q_C": [0.5, 1.0, 2.0], "b": [2, 6, 1], "m": [3, 1, 2]},
    ])
    def test_recovery_for_any_spacing(self, spacings):
        rng, ch, tri, chain = _setup(seed=8, **spacings)
        frame = run_frame(tri, ch, chain, rng)
        assert frame_errors(frame) == (0, 0)

    def test_relay_reduces_modulo_coarsest_lattice(self):
        rng, ch, tri, chain = _setup(b=4, m=2)
        c_B, c_M = draw_codewords(rng, chain)
        frame = encode_frame(tri, chain, c_B, c_M)
        s_R = relay_frame(tri, chain, frame, first_phase_signal(tri, ch, frame))
        q_M = chain.q_M[:, np.newaxis]
        expected = frame.s_B + frame.v + chain.d_B + c_M
        # compare as cosets; points on the cell edge may land on either side
        np.testing.assert_allclose(mod_lattice(s_R - expected, q_M), 0, atol=1e-9)
        assert np.all(np.abs(s_R.real) <= q_M / 2) and np.all(np.abs(s_R.imag) <= q_M / 2)

    def test_noiseless_synthesized_relay_matches_physical(self):
        rng, ch, tri, chain = _setup()
        c_B, c_M = draw_codewords(rng, chain)
        frame = encode_frame(tri, chain, c_B, c_M)
        physical = relay_frame(tri, chain, frame, first_phase_signal(tri, ch, frame))
        synthesized = relay_frame(tri, chain, frame)
        np.testing.assert_allclose(physical, synthesized, atol=1e-9)

    def test_precancellation_ignores_lattice_shift(self):
        """Shifting c_B of a later stream by a Lambda_B period leaves s_R unchanged."""
        rng, ch, tri, chain = _setup(b=4, m=1)
        c_B, c_M = draw_codewords(rng, chain)
        shifted = c_B.copy()
        shifted[2] += chain.q_B[2]
        a = relay_frame(tri, chain, encode_frame(tri, chain, c_B, c_M))
        b = relay_frame(tri, chain, encode_frame(tri, chain, shifted, c_M))
        np.testing.assert_allclose(a, b, atol=1e-9)

    def test_plain_subtraction_only_exact_without_ms_nesting(self):
        rng, ch, tri, chain = _setup(b=4, m=1)
        c_B, c_M = draw_codewords(rng, chain)
        frame = encode_frame(tri, chain, c_B, c_M)
        s_R = relay_frame(tri, chain, frame, first_phase_signal(tri, ch, frame))
        x, _ = dpc_encode(s_R, tri, chain)
        Y_B = ch.H_RB @ relay_transmit(tri, x)
        np.testing.assert_allclose(bs_decode(Y_B, tri, chain, frame, lifted=False), c_M,
                                   atol=1e-6)

    def test_injected_fault_is_detected(self):
        rng, ch, tri, chain = _setup(b=4, m=2)
        frame = run_frame(tri, ch, chain, rng, inject_fault=True)
        errors_B, errors_M = frame_errors(frame)
        assert errors_B > 0 and errors_M > 0

    def test_frame_errors_requires_decoding(self):
        rng, _, tri, chain = _setup()
        c_B, c_M = draw_codewords(rng, chain)
        with pytest.raises(InvalidArgsError):
            frame_errors(encode_frame(tri, chain, c_B, c_M))
