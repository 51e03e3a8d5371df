"""Sweep configuration for the ctwrc CLI.

Configs are line-oriented ``key = value`` files with ``#`` comments. Every
key is mirrored by a ``sweep`` flag; flags override file values.
"""

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, ClassVar

from ctwrc.exceptions import ConfigError
from ctwrc.utils.parsing import DpcStrategy, db_to_linear, parse_dpc_strategy, parse_snr_grid

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


@dataclass(frozen=True)
class NodeBudgets:
    """Linear power budgets of one SNR point (noise variance 1)."""

    P_B: float
    P_R: float
    P_M: float


@dataclass
class SweepConfig:
    """Monte Carlo sweep over an SNR grid."""

    SWEPT_NODES: ClassVar[tuple[str, ...]] = ("all", "bs", "relay", "ms")
    POWER_MODES: ClassVar[tuple[str, ...]] = ("equal", "mp")

    k: int = 4
    ms_antennas: int = 1
    snr_db: list[float] = field(default_factory=lambda: [25.0, 30.0, 35.0])
    swept_node: str = "all"
    snr_b_db: float = 30.0
    snr_r_db: float = 30.0
    snr_m_db: float = 30.0
    reciprocal: bool = True
    trials: int = 100
    seed: int = 1
    dpc: str = "exhaustive"
    power: str = "mp"
    xi_b: float = 1.0
    xi_m: float = 1.0
    epsilon: float = 0.01
    max_vertices: int = 100_000
    include_fixed_order: bool = False
    workers: int = 1
    out: str = "sweep.csv"

    @property
    def streams(self) -> int:
        """Number of data streams per direction (virtual users included)."""
        return self.k * self.ms_antennas

    @property
    def dpc_strategy(self) -> DpcStrategy:
        return parse_dpc_strategy(self.dpc)

    def budgets(self, snr_db: float) -> NodeBudgets:
        """Budgets at one grid point; the MS budget is per MS, before the antenna split."""
        def level(node: str, fixed_db: float) -> float:
            swept = self.swept_node in ("all", node)
            return db_to_linear(snr_db if swept else fixed_db)

        return NodeBudgets(
            P_B=level("bs", self.snr_b_db),
            P_R=level("relay", self.snr_r_db),
            P_M=level("ms", self.snr_m_db),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SweepConfig":
        """Load a config file.

        Raises:
            ConfigError: If the file is missing, a line is malformed, a key
                is unknown or a value does not parse.
        """
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"Cannot read config {path}", details=str(e)) from e

        data: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'", details=raw)
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in cls._field_names():
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            data[key] = value
        return cls._from_dict(data).validated()

    @classmethod
    def _field_names(cls) -> set[str]:
        return {f.name for f in fields(cls)}

    @classmethod
    def _from_dict(cls, data: dict[str, Any]) -> "SweepConfig":
        """Build from raw values, converting strings per field type."""
        defaults = cls()
        known = cls._field_names()
        converted = {
            key: _coerce(key, value, getattr(defaults, key))
            for key, value in data.items()
            if key in known
        }
        return cls(**converted)

    def with_overrides(self, **overrides: Any) -> "SweepConfig":
        """Copy with the non-None overrides applied and validated."""
        known = self._field_names()
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(sorted(unknown))}")
        changes = {
            key: _coerce(key, value, getattr(self, key))
            for key, value in overrides.items()
            if value is not None
        }
        return replace(self, **changes).validated()

    def validated(self) -> "SweepConfig":
        """Return self after checking every field, or raise ConfigError."""
        problems: list[str] = []
        if self.k < 1:
            problems.append("k must be >= 1")
        if self.ms_antennas < 1:
            problems.append("ms_antennas must be >= 1")
        if not self.snr_db:
            problems.append("snr_db must not be empty")
        if self.swept_node not in self.SWEPT_NODES:
            problems.append(f"swept_node must be one of {', '.join(self.SWEPT_NODES)}")
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if self.seed < 0:
            problems.append("seed must be >= 0")
        try:
            self.dpc_strategy
        except ValueError as e:
            problems.append(str(e))
        if self.power not in self.POWER_MODES:
            problems.append(f"power must be one of {', '.join(self.POWER_MODES)}")
        if self.xi_b < 0 or self.xi_m < 0 or self.xi_b + self.xi_m <= 0:
            problems.append("xi_b and xi_m must be non-negative and not both zero")
        if not self.epsilon > 0:
            problems.append("epsilon must be > 0")
        if self.max_vertices < 1:
            problems.append("max_vertices must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if problems:
            raise ConfigError("Invalid sweep configuration", details="; ".join(problems))
        return self

    def echo(self) -> list[str]:
        """Canonical ``key = value`` lines, in field order."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "snr_db":
                text = ",".join(f"{v:g}" for v in value)
            elif isinstance(value, bool):
                text = str(value).lower()
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return lines


def _coerce(key: str, value: Any, default: Any) -> Any:
    """Convert a raw value to the type of ``default``."""
    if key == "snr_db":
        if isinstance(value, (list, tuple)):
            return [float(v) for v in value]
        try:
            return parse_snr_grid(str(value))
        except ValueError as e:
            raise ConfigError(str(e)) from e
    if not isinstance(value, str):
        return value
    text = value.strip()
    try:
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in _TRUE:
                return True
            if lowered in _FALSE:
                return False
            raise ValueError
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"Invalid value for {key}: {value!r}") from None
    return text
