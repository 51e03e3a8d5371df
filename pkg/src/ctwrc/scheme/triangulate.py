"""Two-phase channel triangularization and lattice-precoding matrices.

First phase (uplink into the relay):
    H_MR = Q_MR R_MR                  (QR)
    Q_MR^H H_BR = R_BR Q_BR           (RQ)
Second phase (relay broadcast), for a DPC order mu:
    Phi H_RM = L_RM Q_RM              (LQ, Phi reorders rows by mu)
    H_RB Q_RM^H = Q_RB L_RB           (QL)

With D = diag(R_MR), the relay-side interference splits as
R_BR = (I + U_R) R'_BR and R_MR = (I + U_R) D where
U_R = (R_MR - D) D^-1 and R'_BR = D R_MR^-1 R_BR.
"""

import itertools
from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt
from scipy.linalg import solve_triangular

from ctwrc.exceptions import InvalidArgsError, RankDeficientError, TooLargeError
from ctwrc.scheme.matfact import RANK_TOL, ChannelSet, CMat, RVec, triangular_factor
from ctwrc.utils.seeding import trial_rng

MAX_EXHAUSTIVE_K = 6


@dataclass(frozen=True)
class Permutation:
    """DPC encoding order.

    ``mu[p]`` is the stream encoded at position p; ``q[k]`` is the position
    of stream k, so ``mu[q[k]] == k``. Indices are 0-based; ``label`` is the
    1-based canonical string used in CSV output.
    """

    mu: tuple[int, ...]
    q: tuple[int, ...]

    def __post_init__(self) -> None:
        K = len(self.mu)
        if sorted(self.mu) != list(range(K)) or len(self.q) != K:
            raise InvalidArgsError(f"Not a permutation of 0..{K - 1}: {self.mu!r}")
        if any(self.q[m] != p for p, m in enumerate(self.mu)):
            raise InvalidArgsError("Inverse map does not match the order")

    @classmethod
    def from_order(cls, order: npt.ArrayLike) -> "Permutation":
        mu = tuple(int(m) for m in np.asarray(order).ravel())
        if sorted(mu) != list(range(len(mu))):
            raise InvalidArgsError(f"Not a permutation of 0..{len(mu) - 1}: {mu!r}")
        q = [0] * len(mu)
        for p, m in enumerate(mu):
            q[m] = p
        return cls(mu=mu, q=tuple(q))

    @classmethod
    def identity(cls, K: int) -> "Permutation":
        return cls.from_order(range(K))

    @property
    def K(self) -> int:
        return len(self.mu)

    @property
    def label(self) -> str:
        return "-".join(str(m + 1) for m in self.mu)


@dataclass(frozen=True)
class RandomOrders:
    """``count`` uniformly random orders drawn from ``seed``."""

    count: int
    seed: int


PermutationStrategy = Literal["exhaustive"] | RandomOrders


@dataclass(frozen=True, eq=False)
class Triangularization:
    """All factors of one channel realization under one DPC order."""

    Q_MR: CMat
    R_MR: CMat
    Q_BR: CMat
    R_BR: CMat
    Q_RM: CMat
    L_RM: CMat
    Q_RB: CMat
    L_RB: CMat
    U_R: CMat
    Rp_BR: CMat
    perm: Permutation
    alpha: RVec
    sigma_k2: RVec

    @property
    def K(self) -> int:
        return self.perm.K

    @property
    def d_MR(self) -> RVec:
        """Diagonal of R_MR."""
        return np.diag(self.R_MR).real.copy()

    @property
    def r_BR2(self) -> RVec:
        return np.diag(self.R_BR).real ** 2

    @property
    def r_MR2(self) -> RVec:
        return np.diag(self.R_MR).real ** 2

    @property
    def l_RM_diag(self) -> RVec:
        """Per stream k: l_RM(q_k, q_k)."""
        return np.diag(self.L_RM).real[list(self.perm.q)]

    @property
    def l_RB_diag(self) -> RVec:
        """Per stream k: l_RB(q_k, q_k)."""
        return np.diag(self.L_RB).real[list(self.perm.q)]

    @property
    def l_RM2(self) -> RVec:
        return self.l_RM_diag ** 2

    @property
    def l_RB2(self) -> RVec:
        return self.l_RB_diag ** 2


def triangularize(ch: ChannelSet, perm: Permutation) -> Triangularization:
    """Build the full triangularization of ``ch`` for DPC order ``perm``.

    Raises:
        RankDeficientError: If a channel or a diagonal of R_MR is degenerate.
        InvalidArgsError: If ``perm`` does not match the stream count.
    """
    if perm.K != ch.K:
        raise InvalidArgsError(f"Permutation has {perm.K} streams, channel has {ch.K}")

    Q_MR, R_MR = triangular_factor(ch.H_MR, "QR")
    Q_BR, R_BR = triangular_factor(Q_MR.conj().T @ ch.H_BR, "RQ")
    Q_RM, L_RM = triangular_factor(ch.H_RM[list(perm.mu), :], "LQ")
    Q_RB, L_RB = triangular_factor(ch.H_RB @ Q_RM.conj().T, "QL")

    d = np.diag(R_MR).real.copy()
    if np.any(d <= RANK_TOL * d.max()):
        raise RankDeficientError(
            "R_MR has a vanishing diagonal entry",
            details=f"diagonal {np.array2string(d, precision=3)}",
        )

    U_R = np.triu((R_MR - np.diag(d)) / d[np.newaxis, :], k=1)
    Rp_BR = np.triu(d[:, np.newaxis] * solve_triangular(R_MR, R_BR, lower=False))

    r_BR = np.diag(R_BR).real
    return Triangularization(
        Q_MR=Q_MR, R_MR=R_MR, Q_BR=Q_BR, R_BR=R_BR,
        Q_RM=Q_RM, L_RM=L_RM, Q_RB=Q_RB, L_RB=L_RB,
        U_R=U_R.astype(np.complex128), Rp_BR=Rp_BR.astype(np.complex128),
        perm=perm,
        alpha=d / r_BR,
        sigma_k2=ch.sigma2 / r_BR ** 2,
    )


def interference_identity_residual(tri: Triangularization, S_B: npt.ArrayLike,
                                   S_M: npt.ArrayLike) -> float:
    """Max-entry residual of the relay interference identity.

    U_R (R'_BR S_B + D S_M) against (R_BR - R'_BR) S_B + (R_MR - D) S_M.
    """
    SB = np.atleast_2d(np.asarray(S_B, dtype=np.complex128))
    SM = np.atleast_2d(np.asarray(S_M, dtype=np.complex128))
    if SB.shape != SM.shape or SB.shape[0] != tri.K:
        raise InvalidArgsError(
            f"Signals must both be {tri.K}xT, got {SB.shape} and {SM.shape}"
        )
    D = np.diag(tri.d_MR)
    lhs = tri.U_R @ (tri.Rp_BR @ SB + D @ SM)
    rhs = (tri.R_BR - tri.Rp_BR) @ SB + (tri.R_MR - D) @ SM
    if lhs.size == 0:
        return 0.0
    return float(np.max(np.abs(lhs - rhs)))


def enumerate_permutations(K: int, strategy: PermutationStrategy) -> list[Permutation]:
    """List candidate DPC orders.

    ``"exhaustive"`` yields all K! orders in lexicographic order and is
    limited to K <= 6. ``RandomOrders`` yields ``count`` uniform draws
    (duplicates allowed), deterministic in the seed.

    Raises:
        TooLargeError: Exhaustive search requested for K > 6.
    """
    if K < 1:
        raise InvalidArgsError(f"K must be >= 1, got {K}")
    if strategy == "exhaustive":
        if K > MAX_EXHAUSTIVE_K:
            raise TooLargeError(
                f"Exhaustive DPC search needs K <= {MAX_EXHAUSTIVE_K}, got K={K}",
                details="use a random:N strategy",
            )
        return [Permutation.from_order(p) for p in itertools.permutations(range(K))]
    if isinstance(strategy, RandomOrders):
        if strategy.count < 1:
            raise InvalidArgsError(f"Random order count must be >= 1, got {strategy.count}")
        rng = trial_rng(strategy.seed)
        return [Permutation.from_order(rng.permutation(K)) for _ in range(strategy.count)]
    raise InvalidArgsError(f"Unknown permutation strategy: {strategy!r}")
