"""Main CLI application for the cellular two-way relay simulator."""

from typing import Annotated, Optional

import typer

from ctwrc import __version__
from ctwrc.commands.check import check
from ctwrc.commands.latticelab import latticelab
from ctwrc.commands.sweep import sweep
from ctwrc.output import output_json

app = typer.Typer(
    name="ctwrc-cli",
    help="Lattice-precoded MIMO cellular two-way relay simulator.",
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_show_locals=False,
)


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        output_json({"version": __version__})
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        Optional[bool],
        typer.Option(
            "--version",
            "-v",
            help="Show version and exit.",
            callback=version_callback,
            is_eager=True,
        ),
    ] = None,
) -> None:
    """Rates, power allocation and lattice checks for the BS-relay-MS two-way relay channel."""
    pass


app.command("sweep")(sweep)
app.command("latticelab")(latticelab)
app.command("check")(check)


if __name__ == "__main__":
    app()
