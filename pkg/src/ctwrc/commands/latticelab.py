"""Lattice codec lab command."""

from typing import Annotated

import typer

from ctwrc.scheme.latticelab import DEFAULT_FRAME_LENGTH
from ctwrc.services.latticelab import LatticeLabService


def latticelab(
    frames: Annotated[int, typer.Option("--frames", "-n", help="Random frames to run.")] = 1000,
    k: Annotated[int, typer.Option("--k", help="Largest stream count; frames cycle 1..K.")] = 4,
    seed: Annotated[int, typer.Option("--seed", help="Seed of the frame draws.")] = 1,
    length: Annotated[
        int, typer.Option("--length", "-T", help="Symbols per frame.")
    ] = DEFAULT_FRAME_LENGTH,
    inject_fault: Annotated[
        bool,
        typer.Option("--inject-fault", help="Also run a frame with a corrupted relay output."),
    ] = False,
    quiet: Annotated[bool, typer.Option("--quiet", "-q", help="No progress on stderr.")] = False,
) -> None:
    """Check exact codeword recovery through both phases.

    Exits with code 2 when any frame fails. With --inject-fault the
    corrupted frame is expected to be reported, so the exit code is 2.
    """
    LatticeLabService(quiet=quiet).run(frames, k, seed, length, inject_fault)
