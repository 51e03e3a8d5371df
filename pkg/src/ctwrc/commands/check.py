"""Property suite command."""

from typing import Annotated

import typer

from ctwrc.services.checks import CheckService


def check(
    suite: Annotated[
        str,
        typer.Option(
            "--suite", "-s",
            help="invariants, subsolvers, mp-oracle, asymptotic, lattice, equal-budgets, "
                 "bs-sweep or all.",
        ),
    ] = "invariants",
    full: Annotated[
        bool, typer.Option("--full", help="Use the full acceptance sizes (slow).")
    ] = False,
    seed: Annotated[int, typer.Option("--seed", help="Seed of the random instances.")] = 1,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="No notices on stderr.")] = False,
) -> None:
    """Run property suites and report measured values."""
    CheckService(quiet=quiet).run(suite, full=full, seed=seed)
