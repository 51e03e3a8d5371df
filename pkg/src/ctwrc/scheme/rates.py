"""Achievable rates, cut-set benchmarks and high-SNR optimality conditions.

All rates are in bits per channel use and carry the pre-log 1/2 of the
two-phase protocol. The [log x]^+ clamp is computed as log(1 + (x - 1)^+)
so that rates and the power allocator share one code path.
"""

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from ctwrc.exceptions import InvalidArgsError
from ctwrc.scheme.matfact import ChannelSet, CMat, RVec, singular_values_sq
from ctwrc.scheme.triangulate import Triangularization

BUDGET_TOL = 1e-9
CONDITION_RTOL = 1e-9


def clamped_snr(x: npt.ArrayLike) -> RVec:
    """(x - 1)^+, the SNR that turns [1/2 log x]^+ into 1/2 log(1 + snr)."""
    return np.maximum(np.asarray(x, dtype=np.float64) - 1.0, 0.0)


def half_log2_1p(snr: npt.ArrayLike) -> RVec:
    """1/2 log2(1 + snr)."""
    return 0.5 * np.log2(1.0 + np.asarray(snr, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class PowerProfile:
    """Per-stream transmit powers at the BS and the relay."""

    P_Bk: RVec
    P_Rk: RVec

    def __post_init__(self) -> None:
        P_B = np.asarray(self.P_Bk, dtype=np.float64).copy()
        P_R = np.asarray(self.P_Rk, dtype=np.float64).copy()
        if P_B.shape != P_R.shape or P_B.ndim != 1:
            raise InvalidArgsError("P_Bk and P_Rk must be vectors of equal length")
        if np.any(P_B < 0) or np.any(P_R < 0):
            raise InvalidArgsError("Stream powers must be non-negative")
        object.__setattr__(self, "P_Bk", P_B)
        object.__setattr__(self, "P_Rk", P_R)

    @classmethod
    def equal(cls, ch: ChannelSet) -> "PowerProfile":
        return cls(np.full(ch.K, ch.P_B / ch.K), np.full(ch.K, ch.P_R / ch.K))

    def validate(self, ch: ChannelSet) -> None:
        """Raise InvalidArgsError if the profile breaks the budgets of ``ch``."""
        if self.P_Bk.shape != (ch.K,):
            raise InvalidArgsError(f"Power profile has {self.P_Bk.size} streams, expected {ch.K}")
        if self.P_Bk.sum() > ch.P_B + BUDGET_TOL or self.P_Rk.sum() > ch.P_R + BUDGET_TOL:
            raise InvalidArgsError(
                "Power profile exceeds the budget",
                details=f"sum P_B={self.P_Bk.sum():.6g}/{ch.P_B:.6g}, "
                        f"sum P_R={self.P_Rk.sum():.6g}/{ch.P_R:.6g}",
            )


@dataclass(frozen=True, eq=False)
class Weights:
    """Per-stream weights of the downlink (xi_B) and uplink (xi_M) rates."""

    xi_B: RVec
    xi_M: RVec

    def __post_init__(self) -> None:
        b = np.asarray(self.xi_B, dtype=np.float64).copy()
        m = np.asarray(self.xi_M, dtype=np.float64).copy()
        if b.shape != m.shape or b.ndim != 1:
            raise InvalidArgsError("xi_B and xi_M must be vectors of equal length")
        if np.any(b < 0) or np.any(m < 0) or not (b.sum() + m.sum()) > 0:
            raise InvalidArgsError("Weights must be non-negative and not all zero")
        object.__setattr__(self, "xi_B", b)
        object.__setattr__(self, "xi_M", m)

    @classmethod
    def uniform(cls, K: int) -> "Weights":
        return cls(np.ones(K), np.ones(K))

    @classmethod
    def per_direction(cls, K: int, xi_b: float, xi_m: float) -> "Weights":
        return cls(np.full(K, xi_b), np.full(K, xi_m))

    @property
    def stacked(self) -> RVec:
        return np.concatenate([self.xi_B, self.xi_M])


@dataclass
class Theorem2Record:
    """High-SNR optimality ratios and the four conditions for one order."""

    rho_B: float
    rho_Bk: RVec
    rho_M: float
    rho_Mk: RVec
    C1: bool = False
    C2: bool = False
    C3: bool = False
    C4: bool = False

    @property
    def achieves_cutset(self) -> bool:
        return (self.C1 or self.C2) and (self.C3 or self.C4)

    def flags(self) -> dict[str, bool]:
        return {"c1": self.C1, "c2": self.C2, "c3": self.C3, "c4": self.C4}


@dataclass
class RateReport:
    """Link rates, the achievable tuple and benchmarks for one power profile."""

    R_BtoR: RVec
    R_MtoR: RVec
    R_RtoM: RVec
    R_RtoB: RVec
    R_B: RVec = field(default_factory=lambda: np.zeros(0))
    R_M: RVec = field(default_factory=lambda: np.zeros(0))
    sum_rate: float = 0.0
    weighted_sum_rate: float = 0.0
    cutset_DL: float = float("nan")
    cutset_UL: float = float("nan")
    theorem2: Theorem2Record | None = None


def stream_rates(tri: Triangularization, pw: PowerProfile, ch: ChannelSet) -> RateReport:
    """Per-stream link rates of both phases.

    Zero power gives zero rate on every link.
    """
    if pw.P_Bk.shape != (ch.K,) or tri.K != ch.K:
        raise InvalidArgsError("Triangularization, power profile and channel disagree on K")
    s2 = ch.sigma2
    return RateReport(
        R_BtoR=half_log2_1p(clamped_snr(tri.r_BR2 * pw.P_Bk / s2)),
        R_MtoR=half_log2_1p(clamped_snr(tri.r_MR2 * ch.P_M / s2)),
        R_RtoM=half_log2_1p(tri.l_RM2 * pw.P_Rk / s2),
        R_RtoB=half_log2_1p(tri.l_RB2 * pw.P_Rk / s2),
    )


def achievable_tuple(report: RateReport, weights: Weights) -> tuple[RVec, RVec, float, float]:
    """Apply the per-stream min rule; fills the tuple fields of ``report``."""
    if weights.xi_B.shape != report.R_BtoR.shape:
        raise InvalidArgsError("Weights and rates disagree on K")
    R_B = np.minimum(report.R_BtoR, report.R_RtoM)
    R_M = np.minimum(report.R_MtoR, report.R_RtoB)
    total = float(R_B.sum() + R_M.sum())
    weighted = float(weights.xi_B @ R_B + weights.xi_M @ R_M)
    report.R_B, report.R_M = R_B, R_M
    report.sum_rate, report.weighted_sum_rate = total, weighted
    return R_B, R_M, total, weighted


def _half_logdet_eye_plus(A: CMat) -> float:
    sign, logabs = np.linalg.slogdet(np.eye(A.shape[0]) + A)
    return float(0.5 * logabs / np.log(2.0))


def cutset_bounds(ch: ChannelSet, mode: str = "exact") -> tuple[float, float]:
    """Sum-rate cut-set bounds (downlink, uplink) under equal-power covariances.

    ``exact`` evaluates the log-det forms with Q_B = P_B/K I, Q_R = P_R/K I
    and Q_M = diag(P_M). ``high-snr`` drops the identity and evaluates the
    product of squared singular values instead.
    """
    K, s2 = ch.K, ch.sigma2
    if mode == "exact":
        H_BR, H_RM, H_MR, H_RB = ch.H_BR, ch.H_RM, ch.H_MR, ch.H_RB
        dl = min(
            _half_logdet_eye_plus(ch.P_B / (K * s2) * H_BR @ H_BR.conj().T),
            _half_logdet_eye_plus(ch.P_R / (K * s2) * H_RM @ H_RM.conj().T),
        )
        ul = min(
            _half_logdet_eye_plus(H_MR @ np.diag(ch.P_M) @ H_MR.conj().T / s2),
            _half_logdet_eye_plus(ch.P_R / (K * s2) * H_RB @ H_RB.conj().T),
        )
        return dl, ul
    if mode == "high-snr":
        def half_log_prod(lam: RVec, scale: RVec | float) -> float:
            return float(0.5 * np.sum(np.log2(lam * scale)))

        dl = min(
            half_log_prod(singular_values_sq(ch.H_BR), ch.P_B / (K * s2)),
            half_log_prod(singular_values_sq(ch.H_RM), ch.P_R / (K * s2)),
        )
        # det(H diag(P) H^H) = |det H|^2 prod P
        ul = min(
            half_log_prod(singular_values_sq(ch.H_MR), 1.0)
            + float(0.5 * np.sum(np.log2(ch.P_M / s2))),
            half_log_prod(singular_values_sq(ch.H_RB), ch.P_R / (K * s2)),
        )
        return dl, ul
    raise InvalidArgsError(f"Unknown cut-set mode: {mode!r} (expected exact or high-snr)")


def weighted_cutset(dl: float, ul: float, weights: Weights) -> float:
    """Upper bound on the weighted sum-rate from the two sum-rate cuts."""
    return float(weights.xi_B.max() * dl + weights.xi_M.max() * ul)


def _leq(a: float, b: float) -> bool:
    return a <= b * (1.0 + CONDITION_RTOL) + 1e-300


def evaluate_conditions(record: Theorem2Record, P_B: float, P_R: float,
                        P_M: npt.ArrayLike) -> Theorem2Record:
    """Set C1..C4 on ``record`` for the given budgets.

    Comparisons carry a relative tolerance so that equality holds.
    """
    P_M = np.asarray(P_M, dtype=np.float64)
    geo_PM = float(np.exp(np.mean(np.log(P_M))))
    rho_B_min = min(record.rho_B, float(record.rho_Bk.min()))
    rho_B_max = max(record.rho_B, float(record.rho_Bk.max()))
    ms_terms = np.concatenate([[record.rho_M * geo_PM], record.rho_Mk * P_M])
    record.C1 = _leq(P_B, rho_B_min * P_R)
    record.C2 = _leq(rho_B_max * P_R, P_B)
    record.C3 = _leq(P_R, float(ms_terms.min()))
    record.C4 = _leq(float(ms_terms.max()), P_R)
    return record


def check_theorem2(tri: Triangularization, ch: ChannelSet) -> Theorem2Record:
    """Compute the optimality ratios of ``tri`` and test them against ``ch``."""
    lam_RM = singular_values_sq(ch.H_RM)
    lam_BR = singular_values_sq(ch.H_BR)
    lam_MR = singular_values_sq(ch.H_MR)
    lam_RB = singular_values_sq(ch.H_RB)
    record = Theorem2Record(
        rho_B=float(np.exp(np.mean(np.log(lam_RM) - np.log(lam_BR)))),
        rho_Bk=tri.l_RM2 / tri.r_BR2,
        rho_M=float(np.exp(np.mean(np.log(lam_MR) - np.log(lam_RB)))),
        rho_Mk=tri.r_MR2 / tri.l_RB2,
    )
    return evaluate_conditions(record, ch.P_B, ch.P_R, ch.P_M)


def evaluate(tri: Triangularization, ch: ChannelSet, pw: PowerProfile | None = None,
             weights: Weights | None = None, cutset_mode: str = "exact") -> RateReport:
    """Fill every field of a RateReport for one order and power profile."""
    pw = pw or PowerProfile.equal(ch)
    pw.validate(ch)
    weights = weights or Weights.uniform(ch.K)
    report = stream_rates(tri, pw, ch)
    achievable_tuple(report, weights)
    report.cutset_DL, report.cutset_UL = cutset_bounds(ch, cutset_mode)
    report.theorem2 = check_theorem2(tri, ch)
    return report
