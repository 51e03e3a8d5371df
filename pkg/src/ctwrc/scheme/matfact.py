"""Complex linear algebra kernels.

Structured triangular factorizations with a real non-negative diagonal,
squared singular values and seeded random channel generation. All four
factorization modes reuse one Householder QR kernel (LAPACK via numpy)
applied to flipped or conjugate-transposed inputs.
"""

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
import numpy.typing as npt

from ctwrc.exceptions import InvalidArgsError, RankDeficientError
from ctwrc.utils.seeding import trial_rng

CMat = npt.NDArray[np.complex128]
RVec = npt.NDArray[np.float64]
FactorMode = Literal["QR", "RQ", "LQ", "QL"]

RANK_TOL = 1e-9


def check_full_rank(A: CMat, what: str = "matrix") -> None:
    """Raise RankDeficientError unless sigma_min > RANK_TOL * sigma_max."""
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or not np.all(np.isfinite(s)) or s[-1] <= RANK_TOL * s[0]:
        smin = float(s[-1]) if s.size else 0.0
        smax = float(s[0]) if s.size else 0.0
        raise RankDeficientError(
            f"{what} is rank deficient",
            details=f"smallest singular value {smin:.3e} vs largest {smax:.3e}",
        )


def _as_square(A: npt.ArrayLike) -> CMat:
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgsError(f"Expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidArgsError("Matrix has non-finite entries")
    return M


def _qr_normalized(A: CMat) -> tuple[CMat, CMat]:
    Q, R = np.linalg.qr(A)
    d = np.diag(R)
    mag = np.abs(d)
    phase = np.ones_like(d)
    nz = mag > 0
    phase[nz] = d[nz] / mag[nz]
    # A = (Q P)(P^H R) with P = diag(phase); the new diagonal is |d|
    Q = Q * phase[np.newaxis, :]
    R = np.triu(phase.conj()[:, np.newaxis] * R)
    R[np.diag_indices_from(R)] = mag
    return Q, R


def triangular_factor(A: npt.ArrayLike, mode: FactorMode) -> tuple[CMat, CMat]:
    """Factor a square full-rank matrix into unitary and triangular parts.

    Modes: ``QR`` (A = Q R), ``RQ`` (A = R Q), ``LQ`` (A = L Q), ``QL``
    (A = Q L). The triangular factor has a real non-negative diagonal and
    exact zeros off its triangle, which makes the factors unique.

    Returns:
        (unitary, triangular)

    Raises:
        RankDeficientError: If A fails the rank tolerance check.
        InvalidArgsError: If A is not square or mode is unknown.
    """
    M = _as_square(A)
    check_full_rank(M)
    n = M.shape[0]
    J = np.eye(n, dtype=np.complex128)[::-1]
    if mode == "QR":
        return _qr_normalized(M)
    if mode == "LQ":
        Q1, R1 = _qr_normalized(M.conj().T)
        return Q1.conj().T, np.tril(R1.conj().T)
    if mode == "RQ":
        Q1, R1 = _qr_normalized(M.conj().T @ J)
        return J @ Q1.conj().T, np.triu(J @ R1.conj().T @ J)
    if mode == "QL":
        Q1, R1 = _qr_normalized(M @ J)
        return Q1 @ J, np.tril(J @ R1 @ J)
    raise InvalidArgsError(f"Unknown factorization mode: {mode!r}")


def singular_values_sq(A: npt.ArrayLike) -> RVec:
    """Squared singular values of a square matrix, descending."""
    M = _as_square(A)
    s = np.linalg.svd(M, compute_uv=False)
    return np.sort(s.astype(np.float64) ** 2)[::-1]


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One network realization: four K x K channels, noise and budgets."""

    K: int
    H_BR: CMat
    H_MR: CMat
    H_RB: CMat
    H_RM: CMat
    sigma2: float = 1.0
    P_B: float = 1.0
    P_R: float = 1.0
    P_M: RVec = field(default_factory=lambda: np.ones(1))

    def __post_init__(self) -> None:
        if self.K < 1:
            raise InvalidArgsError(f"K must be >= 1, got {self.K}")
        for name in ("H_BR", "H_MR", "H_RB", "H_RM"):
            H = np.asarray(getattr(self, name), dtype=np.complex128)
            if H.shape != (self.K, self.K):
                raise InvalidArgsError(f"{name} must be {self.K}x{self.K}, got {H.shape}")
            if not np.all(np.isfinite(H)):
                raise InvalidArgsError(f"{name} has non-finite entries")
            object.__setattr__(self, name, H)
        P_M = np.broadcast_to(np.asarray(self.P_M, dtype=np.float64), (self.K,)).copy()
        object.__setattr__(self, "P_M", P_M)
        if not self.sigma2 > 0:
            raise InvalidArgsError(f"sigma2 must be > 0, got {self.sigma2}")
        if not (self.P_B > 0 and self.P_R > 0 and np.all(P_M > 0)):
            raise InvalidArgsError("Power budgets must be > 0")

    def with_budgets(
        self,
        *,
        sigma2: float | None = None,
        P_B: float | None = None,
        P_R: float | None = None,
        P_M: float | npt.ArrayLike | None = None,
    ) -> "ChannelSet":
        """Copy with new noise variance and/or budgets, same channels."""
        return replace(
            self,
            sigma2=self.sigma2 if sigma2 is None else sigma2,
            P_B=self.P_B if P_B is None else P_B,
            P_R=self.P_R if P_R is None else P_R,
            P_M=self.P_M if P_M is None else np.asarray(P_M, dtype=np.float64),
        )


def _cn(rng: np.random.Generator, K: int) -> CMat:
    re = rng.standard_normal((K, K))
    im = rng.standard_normal((K, K))
    return ((re + 1j * im) / np.sqrt(2.0)).astype(np.complex128)


def gen_channels(
    K: int,
    seed: int | np.random.Generator,
    *,
    reciprocal: bool = False,
    sigma2: float = 1.0,
    P_B: float = 1.0,
    P_R: float = 1.0,
    P_M: float | npt.ArrayLike = 1.0,
) -> ChannelSet:
    """Draw i.i.d. CN(0, 1) channels.

    In reciprocal mode the second-phase channels are transposes of the
    first-phase ones: H_RB = H_BR^T and H_RM = H_MR^T.
    """
    if K < 1:
        raise InvalidArgsError(f"K must be >= 1, got {K}")
    rng = trial_rng(int(seed)) if isinstance(seed, (int, np.integer)) else seed
    H_BR = _cn(rng, K)
    H_MR = _cn(rng, K)
    if reciprocal:
        H_RB = H_BR.T.copy()
        H_RM = H_MR.T.copy()
    else:
        H_RB = _cn(rng, K)
        H_RM = _cn(rng, K)
    return ChannelSet(
        K=K, H_BR=H_BR, H_MR=H_MR, H_RB=H_RB, H_RM=H_RM,
        sigma2=sigma2, P_B=P_B, P_R=P_R, P_M=np.asarray(P_M, dtype=np.float64),
    )
