"""Monte Carlo sweep command."""

from typing import Annotated, Optional

import typer

from ctwrc.services.sweep import SweepService


def sweep(
    config: Annotated[
        Optional[str],
        typer.Option("--config", "-c", help="Sweep config file (key = value lines)."),
    ] = None,
    k: Annotated[Optional[int], typer.Option("--k", help="Number of MSs.")] = None,
    ms_antennas: Annotated[
        Optional[int],
        typer.Option("--ms-antennas", help="Antennas per MS (virtual single-antenna users)."),
    ] = None,
    snr_db: Annotated[
        Optional[str],
        typer.Option("--snr-db", help="SNR grid in dB: a:b:step or a,b,c."),
    ] = None,
    swept_node: Annotated[
        Optional[str],
        typer.Option("--swept-node", help="Node following the grid: all, bs, relay, ms."),
    ] = None,
    snr_b_db: Annotated[
        Optional[float], typer.Option("--snr-b-db", help="BS budget when not swept (dB).")
    ] = None,
    snr_r_db: Annotated[
        Optional[float], typer.Option("--snr-r-db", help="Relay budget when not swept (dB).")
    ] = None,
    snr_m_db: Annotated[
        Optional[float], typer.Option("--snr-m-db", help="MS budget when not swept (dB).")
    ] = None,
    reciprocal: Annotated[
        Optional[bool],
        typer.Option("--reciprocal/--no-reciprocal", help="Second-phase channels are transposes."),
    ] = None,
    trials: Annotated[Optional[int], typer.Option("--trials", help="Channel draws.")] = None,
    seed: Annotated[Optional[int], typer.Option("--seed", help="Experiment seed.")] = None,
    dpc: Annotated[
        Optional[str],
        typer.Option("--dpc", help="DPC order search: exhaustive or random:N."),
    ] = None,
    power: Annotated[
        Optional[str], typer.Option("--power", help="Power allocation: equal or mp.")
    ] = None,
    xi_b: Annotated[Optional[float], typer.Option("--xi-b", help="Downlink weight.")] = None,
    xi_m: Annotated[Optional[float], typer.Option("--xi-m", help="Uplink weight.")] = None,
    epsilon: Annotated[
        Optional[float], typer.Option("--eps", help="Relative optimality gap of the MP search.")
    ] = None,
    max_vertices: Annotated[
        Optional[int], typer.Option("--max-vertices", help="Vertex cap of the MP search.")
    ] = None,
    include_fixed_order: Annotated[
        Optional[bool],
        typer.Option("--fixed-order/--no-fixed-order",
                     help="Also report the identity order with equal power."),
    ] = None,
    workers: Annotated[
        Optional[int], typer.Option("--workers", "-j", help="Worker processes.")
    ] = None,
    out: Annotated[Optional[str], typer.Option("--out", "-o", help="Output CSV path.")] = None,
    quiet: Annotated[
        bool, typer.Option("--quiet", "-q", help="No progress or notices on stderr.")
    ] = False,
) -> None:
    """Run a Monte Carlo sweep and write per-trial rows to CSV.

    Flags override values from --config. The JSON summary on stdout holds
    per-SNR means for every scheme.
    """
    SweepService(quiet=quiet).run(
        config,
        k=k,
        ms_antennas=ms_antennas,
        snr_db=snr_db,
        swept_node=swept_node,
        snr_b_db=snr_b_db,
        snr_r_db=snr_r_db,
        snr_m_db=snr_m_db,
        reciprocal=reciprocal,
        trials=trials,
        seed=seed,
        dpc=dpc,
        power=power,
        xi_b=xi_b,
        xi_m=xi_m,
        epsilon=epsilon,
        max_vertices=max_vertices,
        include_fixed_order=include_fixed_order,
        workers=workers,
        out=out,
    )
