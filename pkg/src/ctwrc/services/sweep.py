"""Monte Carlo SNR sweeps with CSV output."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from pathlib import Path
from typing import Any

import pandas as pd

from ctwrc import __version__
from ctwrc.config import SweepConfig
from ctwrc.exceptions import AcceptanceError, InvalidArgsError, OutputError
from ctwrc.output import notice, output_success, progress
from ctwrc.scheme.matfact import ChannelSet, gen_channels
from ctwrc.scheme.powalloc import (
    DEFAULT_EPSILON,
    DEFAULT_MAX_VERTICES,
    MpProblem,
    MpResult,
    maximize_weighted_sum_rate,
)
from ctwrc.scheme.rates import (
    PowerProfile,
    Weights,
    cutset_bounds,
    evaluate,
    weighted_cutset,
)
from ctwrc.scheme.triangulate import (
    Permutation,
    PermutationStrategy,
    RandomOrders,
    Triangularization,
    enumerate_permutations,
    triangularize,
)
from ctwrc.services.base import BaseService
from ctwrc.utils.seeding import trial_rng

SCHEMES = ("proposed-equal", "proposed-mp", "proposed-fixed", "cutset")
COLUMNS = [
    "snr_db", "trial", "seed", "perm", "scheme",
    "sum_rate", "weighted_sum_rate", "cutset_dl", "cutset_ul", "gap_to_cutset", "weighted_gap",
    "mp_iterations", "mp_certified", "c1", "c2", "c3", "c4",
]
CUTSET_CONVENTION = (
    "exact log-det, equal-power covariances Q_B = P_B/K I, Q_R = P_R/K I, Q_M = diag(P_M)"
)
CUTSET_TOL = 1e-6
MP_TOL = 1e-9
ORDER_STREAM = 1


@dataclass(eq=False)
class OrderChoice:
    """Best DPC order found for one channel and its power profile."""

    perm: Permutation
    tri: Triangularization
    weighted_sum_rate: float
    power: PowerProfile
    mp: MpResult | None = None
    iterations: int = 0
    certified: bool = True
    skipped: int = 0


def best_permutation(
    ch: ChannelSet,
    perms: list[Permutation],
    power: str,
    weights: Weights,
    epsilon: float = DEFAULT_EPSILON,
    max_vertices: int = DEFAULT_MAX_VERTICES,
) -> OrderChoice:
    """Pick the DPC order with the largest weighted sum-rate.

    With ``power="mp"`` the orders are visited in decreasing equal-power
    value, and an order whose initial polyblock bound cannot beat the
    incumbent is skipped without running the search. The incumbent value is
    also the cutoff of every search, so the pick is epsilon-optimal over the
    orders without certifying each order on its own.
    """
    if not perms:
        raise InvalidArgsError("No candidate orders")
    if power not in ("equal", "mp"):
        raise InvalidArgsError(f"Unknown power mode: {power!r} (expected equal or mp)")

    equal = PowerProfile.equal(ch)
    candidates: list[tuple[float, Permutation, Triangularization, MpProblem]] = []
    for perm in perms:
        tri = triangularize(ch, perm)
        problem = MpProblem.from_triangularization(tri, ch, weights)
        candidates.append((problem.weighted_rate(equal), perm, tri, problem))
    # stable, so ties keep enumeration order
    candidates.sort(key=lambda c: -c[0])

    value, perm, tri, _ = candidates[0]
    best = OrderChoice(perm=perm, tri=tri, weighted_sum_rate=value, power=equal)
    if power == "equal":
        return best

    iterations, certified, skipped = 0, True, 0
    for _, perm, tri, problem in candidates:
        if problem.upper_bound() <= best.weighted_sum_rate:
            skipped += 1
            continue
        result = maximize_weighted_sum_rate(problem, epsilon=epsilon, max_vertices=max_vertices,
                                            cutoff=best.weighted_sum_rate)
        iterations += result.iterations
        certified = certified and result.certified
        improves = result.R_ws > best.weighted_sum_rate
        if improves or (best.mp is None and result.R_ws >= best.weighted_sum_rate):
            best = OrderChoice(perm=perm, tri=tri, weighted_sum_rate=result.R_ws,
                               power=result.power, mp=result)
    best.iterations, best.certified, best.skipped = iterations, certified, skipped
    return best


def _strategy(config: SweepConfig, trial: int) -> PermutationStrategy:
    dpc = config.dpc_strategy
    if dpc.kind == "exhaustive":
        return "exhaustive"
    order_seed = int(trial_rng(config.seed, trial, ORDER_STREAM).integers(2**62))
    return RandomOrders(count=dpc.count, seed=order_seed)


def _scheme_row(scheme: str, choice: OrderChoice, ch: ChannelSet, weights: Weights,
                bound: float, base: dict[str, Any]) -> dict[str, Any]:
    report = evaluate(choice.tri, ch, choice.power, weights)
    assert report.theorem2 is not None
    is_mp = scheme == "proposed-mp"
    return {
        **base,
        "perm": choice.perm.label,
        "scheme": scheme,
        "sum_rate": report.sum_rate,
        "weighted_sum_rate": report.weighted_sum_rate,
        "cutset_dl": report.cutset_DL,
        "cutset_ul": report.cutset_UL,
        "gap_to_cutset": report.cutset_DL + report.cutset_UL - report.sum_rate,
        "weighted_gap": bound - report.weighted_sum_rate,
        "mp_iterations": choice.iterations if is_mp else 0,
        "mp_certified": choice.certified if is_mp else None,
        **report.theorem2.flags(),
    }


def snr_point_rows(config: SweepConfig, ch: ChannelSet, perms: list[Permutation],
                   weights: Weights, base: dict[str, Any]) -> list[dict[str, Any]]:
    """All scheme rows of one (snr, trial) point."""
    dl, ul = cutset_bounds(ch)
    bound = weighted_cutset(dl, ul, weights)
    equal = best_permutation(ch, perms, "equal", weights)
    rows = [_scheme_row("proposed-equal", equal, ch, weights, bound, base)]
    if config.power == "mp":
        mp = best_permutation(ch, perms, "mp", weights, config.epsilon, config.max_vertices)
        rows.append(_scheme_row("proposed-mp", mp, ch, weights, bound, base))
    if config.include_fixed_order:
        identity = Permutation.identity(ch.K)
        fixed = OrderChoice(perm=identity, tri=triangularize(ch, identity),
                            weighted_sum_rate=float("nan"), power=PowerProfile.equal(ch))
        rows.append(_scheme_row("proposed-fixed", fixed, ch, weights, bound, base))
    rows.append({
        **base,
        "perm": "",
        "scheme": "cutset",
        "sum_rate": dl + ul,
        "weighted_sum_rate": bound,
        "cutset_dl": dl,
        "cutset_ul": ul,
        "gap_to_cutset": 0.0,
        "weighted_gap": 0.0,
        "mp_iterations": 0,
        "mp_certified": None,
        "c1": None, "c2": None, "c3": None, "c4": None,
    })
    return rows


def trial_rows(config: SweepConfig, trial: int) -> list[dict[str, Any]]:
    """Rows of one trial over the whole SNR grid.

    The channel draw and the candidate orders belong to the trial and are
    shared by every SNR point.
    """
    K = config.streams
    base_ch = gen_channels(K, trial_rng(config.seed, trial), reciprocal=config.reciprocal)
    perms = enumerate_permutations(K, _strategy(config, trial))
    weights = Weights.per_direction(K, config.xi_b, config.xi_m)
    rows: list[dict[str, Any]] = []
    for snr_db in config.snr_db:
        budgets = config.budgets(snr_db)
        ch = base_ch.with_budgets(P_B=budgets.P_B, P_R=budgets.P_R,
                                  P_M=budgets.P_M / config.ms_antennas)
        base = {"snr_db": snr_db, "trial": trial, "seed": config.seed}
        rows.extend(snr_point_rows(config, ch, perms, weights, base))
    return rows


def collect_rows(config: SweepConfig, show_progress: bool = True) -> pd.DataFrame:
    """Run every trial and return the rows in (snr, trial, scheme) order."""
    trials = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(progress(pool.map(trial_rows, repeat(config), trials), "sweep",
                                   total=config.trials, enabled=show_progress))
    else:
        chunks = [trial_rows(config, t)
                  for t in progress(trials, "sweep", total=config.trials, enabled=show_progress)]

    df = pd.DataFrame([row for chunk in chunks for row in chunk], columns=COLUMNS)
    snr_rank = {snr: i for i, snr in enumerate(config.snr_db)}
    scheme_rank = {scheme: i for i, scheme in enumerate(SCHEMES)}
    df = df.assign(
        _snr=df["snr_db"].map(snr_rank), _scheme=df["scheme"].map(scheme_rank)
    ).sort_values(["_snr", "trial", "_scheme"], kind="stable")
    return df.drop(columns=["_snr", "_scheme"]).reset_index(drop=True)


def write_csv(df: pd.DataFrame, config: SweepConfig, path: str | Path) -> Path:
    """Write rows behind a ``#`` metadata header."""
    path = Path(path)
    header = [
        f"# ctwrc-cli {__version__}",
        *(f"# {line}" for line in config.echo()),
        f"# cutset: {CUTSET_CONVENTION}",
    ]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write("\n".join(header) + "\n")
            df.to_csv(fh, index=False, float_format="%.10g", lineterminator="\n")
    except OSError as e:
        raise OutputError(f"Cannot write results to {path}", details=str(e)) from e
    return path


def read_csv(path: str | Path) -> pd.DataFrame:
    """Read a sweep CSV back, skipping the metadata header."""
    return pd.read_csv(path, comment="#")


@dataclass
class SweepSummary:
    """Per-(snr, scheme) means and invariant counters of a sweep."""

    path: Path | None
    rows: int
    summary: list[dict[str, Any]] = field(default_factory=list)
    cutset_violations: int = 0
    mp_below_equal: int = 0
    mp_above_cutset: int = 0
    uncertified: int = 0

    def as_dict(self) -> dict[str, Any]:
        return {
            "out": str(self.path) if self.path else None,
            "rows": self.rows,
            "summary": self.summary,
            "cutset_violations": self.cutset_violations,
            "mp_below_equal": self.mp_below_equal,
            "mp_above_cutset": self.mp_above_cutset,
            "uncertified": self.uncertified,
        }


def summarize(df: pd.DataFrame, path: Path | None = None) -> SweepSummary:
    """Means per (snr, scheme) plus the row-level invariant counters."""
    means = (
        df.groupby(["snr_db", "scheme"], sort=False)[
            ["sum_rate", "weighted_sum_rate", "gap_to_cutset", "weighted_gap"]
        ]
        .mean()
        .reset_index()
    )
    exact_cut = df["cutset_dl"] + df["cutset_ul"]
    over_cut = df["sum_rate"] > exact_cut + CUTSET_TOL
    equal_rows = df["scheme"].isin(["proposed-equal", "proposed-fixed"])
    mp_rows = df["scheme"] == "proposed-mp"

    keys = ["snr_db", "trial"]
    paired = df[df["scheme"] == "proposed-equal"][[*keys, "weighted_sum_rate"]].merge(
        df[mp_rows][[*keys, "weighted_sum_rate"]], on=keys, suffixes=("_equal", "_mp")
    )
    below = paired["weighted_sum_rate_mp"] < paired["weighted_sum_rate_equal"] - MP_TOL

    return SweepSummary(
        path=path,
        rows=len(df),
        summary=means.to_dict(orient="records"),
        cutset_violations=int((over_cut & equal_rows).sum()),
        mp_below_equal=int(below.sum()),
        mp_above_cutset=int((over_cut & mp_rows).sum()),
        uncertified=int((df.loc[mp_rows, "mp_certified"] == False).sum()),  # noqa: E712
    )


def run_sweep(config: SweepConfig, show_progress: bool = True) -> SweepSummary:
    """Run a sweep, write its CSV to ``config.out`` and summarize it."""
    df = collect_rows(config, show_progress=show_progress)
    path = write_csv(df, config, config.out)
    return summarize(df, path)


class SweepService(BaseService):
    """Service behind ``ctwrc-cli sweep``."""

    OPERATION = "sweep"

    def run(self, config_path: str | None = None, **overrides: Any) -> None:
        """Load the config, apply flag overrides, sweep and report.

        Equal-power rows above the exact cut-set, or MP rows below the
        equal-power rows, fail the command after the CSV is written.
        """
        with self.reporting():
            config = SweepConfig.load(config_path) if config_path else SweepConfig()
            config = config.with_overrides(**overrides)
            if not self.quiet:
                notice(f"sweeping {len(config.snr_db)} SNR points x {config.trials} trials, "
                       f"K={config.streams}, dpc={config.dpc_strategy}, power={config.power}")
            summary = run_sweep(config, show_progress=not self.quiet)
            if summary.uncertified and not self.quiet:
                notice(f"{summary.uncertified} MP rows hit the vertex cap (not certified)")
            if summary.cutset_violations or summary.mp_below_equal:
                raise AcceptanceError(
                    "Sweep broke a row-level invariant",
                    details=f"cutset_violations={summary.cutset_violations}, "
                            f"mp_below_equal={summary.mp_below_equal}, out={summary.path}",
                )
        output_success(operation=self.OPERATION, **summary.as_dict())
