"""Parsers for compact command-line values."""

from dataclasses import dataclass

import numpy as np

DEFAULT_RANDOM_ORDERS = 100


@dataclass(frozen=True)
class DpcStrategy:
    """DPC order search: every order, or ``count`` random orders."""

    kind: str
    count: int = 0

    def __str__(self) -> str:
        return "exhaustive" if self.kind == "exhaustive" else f"random:{self.count}"


def parse_snr_grid(text: str) -> list[float]:
    """Parse an SNR grid in dB.

    Args:
        text: ``"a:b:step"`` (inclusive of b), ``"a,b,c"`` or a single value.

    Returns:
        Grid values in dB, rounded to 1e-9 to keep float steps clean.

    Raises:
        ValueError: If the text is malformed or the grid is empty.
    """
    text = text.strip()
    if not text:
        raise ValueError("Empty SNR grid")
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, stop, step = parts
            if step <= 0 or stop < start:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [start + i * step for i in range(count)]
        else:
            values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ValueError(f"Invalid SNR grid: {text!r} (expected a:b:step or a,b,c)") from None
    if not values:
        raise ValueError(f"Invalid SNR grid: {text!r} (no points)")
    return [round(v, 9) for v in values]


def parse_dpc_strategy(text: str) -> DpcStrategy:
    """Parse ``exhaustive`` or ``random:N``; a bare ``random`` draws 100 orders.

    Raises:
        ValueError: If the text is not one of these forms or N < 1.
    """
    text = text.strip().lower()
    if text == "exhaustive":
        return DpcStrategy("exhaustive")
    if text == "random":
        return DpcStrategy("random", DEFAULT_RANDOM_ORDERS)
    if text.startswith("random:"):
        try:
            count = int(text.split(":", 1)[1])
        except ValueError:
            count = 0
        if count >= 1:
            return DpcStrategy("random", count)
    raise ValueError(f"Invalid DPC strategy: {text!r} (expected exhaustive, random or random:N)")


def db_to_linear(value_db: float) -> float:
    """Convert a power ratio from dB to linear scale."""
    return float(10.0 ** (value_db / 10.0))
