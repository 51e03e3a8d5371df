"""Tests for DPC order selection and the Monte Carlo sweep."""

import numpy as np
import pytest

from ctwrc.config import SweepConfig
from ctwrc.exceptions import InvalidArgsError, OutputError
from ctwrc.scheme.matfact import gen_channels
from ctwrc.scheme.powalloc import MpProblem, maximize_weighted_sum_rate
from ctwrc.scheme.rates import PowerProfile, Weights
from ctwrc.scheme.triangulate import enumerate_permutations, triangularize
from ctwrc.services.sweep import (
    COLUMNS,
    best_permutation,
    collect_rows,
    read_csv,
    run_sweep,
    summarize,
    write_csv,
)


def _small_config(out, **overrides):
    base = dict(k=2, snr_db=[10.0, 20.0], trials=2, seed=3, dpc="exhaustive", power="mp",
                out=str(out))
    base.update(overrides)
    return SweepConfig(**base).validated()


class TestBestPermutation:
    def test_equal_power_picks_argmax(self, channel):
        perms = enumerate_permutations(3, "exhaustive")
        weights = Weights.uniform(3)
        choice = best_permutation(channel, perms, "equal", weights)
        equal = PowerProfile.equal(channel)
        values = [
            MpProblem.from_triangularization(triangularize(channel, p), channel, weights)
            .weighted_rate(equal)
            for p in perms
        ]
        assert choice.weighted_sum_rate == pytest.approx(max(values))
        assert choice.mp is None

    def test_mp_not_below_equal(self, channel):
        perms = enumerate_permutations(3, "exhaustive")
        weights = Weights.uniform(3)
        equal = best_permutation(channel, perms, "equal", weights)
        mp = best_permutation(channel, perms, "mp", weights)
        assert mp.weighted_sum_rate >= equal.weighted_sum_rate - 1e-12
        assert mp.certified

    def test_skips_orders_that_cannot_win(self):
        """A single stream already sits at its bound, so no search runs."""
        ch = gen_channels(1, 4, P_B=100.0, P_R=100.0, P_M=100.0)
        perms = enumerate_permutations(1, "exhaustive") * 3
        choice = best_permutation(ch, perms, "mp", Weights.uniform(1))
        assert choice.skipped == 3
        assert choice.iterations == 0
        assert choice.mp is None

    def test_cutoff_keeps_the_pick_epsilon_optimal(self, channel):
        """Searching every order on its own finds nothing the cutoff pick misses."""
        perms = enumerate_permutations(3, "exhaustive")
        weights = Weights.uniform(3)
        choice = best_permutation(channel, perms, "mp", weights)
        alone = max(
            maximize_weighted_sum_rate(
                MpProblem.from_triangularization(triangularize(channel, p), channel, weights)
            ).R_ws
            for p in perms
        )
        assert choice.weighted_sum_rate * 1.01 >= alone - 1e-12
        assert choice.weighted_sum_rate <= alone * 1.01 + 1e-12

    def test_rejects_unknown_power(self, channel):
        with pytest.raises(InvalidArgsError):
            best_permutation(channel, enumerate_permutations(3, "exhaustive"), "waterfill",
                             Weights.uniform(3))

    def test_rejects_empty_candidates(self, channel):
        with pytest.raises(InvalidArgsError):
            best_permutation(channel, [], "equal", Weights.uniform(3))


class TestCollectRows:
    def test_row_layout_and_order(self, sweep_out):
        config = _small_config(sweep_out, include_fixed_order=True)
        df = collect_rows(config, show_progress=False)
        assert list(df.columns) == COLUMNS
        assert len(df) == 2 * 2 * 4
        first = df.iloc[:4]
        assert first["scheme"].tolist() == [
            "proposed-equal", "proposed-mp", "proposed-fixed", "cutset"
        ]
        assert (first["snr_db"] == 10.0).all() and (first["trial"] == 0).all()
        assert df.iloc[4]["trial"] == 1

    def test_equal_power_mode_has_no_mp_rows(self, sweep_out):
        df = collect_rows(_small_config(sweep_out, power="equal"), show_progress=False)
        assert set(df["scheme"]) == {"proposed-equal", "cutset"}

    def test_row_invariants(self, sweep_out):
        df = collect_rows(_small_config(sweep_out), show_progress=False)
        summary = summarize(df)
        assert summary.cutset_violations == 0
        assert summary.mp_below_equal == 0
        cut = df[df["scheme"] == "cutset"]
        np.testing.assert_allclose(cut["sum_rate"], cut["cutset_dl"] + cut["cutset_ul"])

    def test_gap_is_unweighted_under_unequal_weights(self, sweep_out):
        config = _small_config(sweep_out, snr_db=[20.0], power="equal", xi_b=0.4, xi_m=0.1)
        df = collect_rows(config, show_progress=False)
        eq = df[df["scheme"] == "proposed-equal"]
        np.testing.assert_allclose(
            eq["gap_to_cutset"], eq["cutset_dl"] + eq["cutset_ul"] - eq["sum_rate"], atol=1e-12
        )
        np.testing.assert_allclose(
            eq["weighted_gap"],
            0.4 * eq["cutset_dl"] + 0.1 * eq["cutset_ul"] - eq["weighted_sum_rate"], atol=1e-12
        )
        assert (eq["gap_to_cutset"] > eq["weighted_gap"]).all()
        assert (eq["gap_to_cutset"] >= -1e-6).all()

    def test_rates_grow_with_snr(self, sweep_out):
        config = _small_config(sweep_out, snr_db=[0.0, 30.0], trials=4, power="equal")
        df = collect_rows(config, show_progress=False)
        eq = df[df["scheme"] == "proposed-equal"].groupby("snr_db")["sum_rate"].mean()
        assert eq[30.0] > eq[0.0]

    def test_random_orders_and_virtual_users(self, sweep_out):
        config = _small_config(sweep_out, k=2, ms_antennas=2, dpc="random:3", power="equal")
        df = collect_rows(config, show_progress=False)
        labels = df[df["scheme"] == "proposed-equal"]["perm"]
        assert all(sorted(label.split("-")) == ["1", "2", "3", "4"] for label in labels)

    def test_channels_shared_across_snr_points(self, sweep_out):
        """The cut-set at a grid point does not depend on the other grid points."""
        a = collect_rows(_small_config(sweep_out, snr_db=[10.0], power="equal"),
                         show_progress=False)
        b = collect_rows(_small_config(sweep_out, snr_db=[5.0, 10.0], power="equal"),
                         show_progress=False)
        cut_a = a[a["scheme"] == "cutset"]["sum_rate"].to_numpy()
        cut_b = b[(b["scheme"] == "cutset") & (b["snr_db"] == 10.0)]["sum_rate"].to_numpy()
        np.testing.assert_array_equal(cut_a, cut_b)


class TestCsv:
    def test_run_sweep_writes_metadata_and_rows(self, sweep_out):
        config = _small_config(sweep_out)
        summary = run_sweep(config, show_progress=False)
        lines = sweep_out.read_text().splitlines()
        assert lines[0].startswith("# ctwrc-cli ")
        assert "# k = 2" in lines
        assert any(line.startswith("# cutset: exact log-det") for line in lines)
        df = read_csv(sweep_out)
        assert len(df) == summary.rows == 2 * 2 * 3
        assert {row["scheme"] for row in summary.summary} == {
            "proposed-equal", "proposed-mp", "cutset"
        }

    def test_output_is_deterministic(self, tmp_path):
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        config = _small_config(first)
        write_csv(collect_rows(config, show_progress=False), config, first)
        write_csv(collect_rows(config, show_progress=False), config, second)
        assert first.read_bytes() == second.read_bytes()

    def test_unwritable_path_raises(self, tmp_path, sweep_out):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        config = _small_config(sweep_out)
        df = collect_rows(config, show_progress=False)
        with pytest.raises(OutputError) as exc:
            write_csv(df, config, blocker / "sub" / "out.csv")
        assert "out.csv" in exc.value.message
