"""Globally optimal weighted sum-rate power allocation.

The weighted sum-rate is rewritten over the auxiliary vector z (length 2K,
downlink streams first) as Gamma(z) = sum_i xi_i/2 log2 z_i, maximized over
the normal set G of achievable 1 + SNR vectors intersected with z >= 1.
A polyblock outer approximation shrinks a vertex set around G; each step
projects the best vertex onto the boundary of G by solving two decoupled
max-min problems, one per transmitter. Vertices are shrunk against the
current best value before they are searched.
"""

import heapq
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from ctwrc.exceptions import InvalidArgsError
from ctwrc.scheme.matfact import ChannelSet, RVec
from ctwrc.scheme.rates import PowerProfile, Weights, clamped_snr
from ctwrc.scheme.triangulate import Triangularization

DEFAULT_EPSILON = 0.01
DEFAULT_MAX_VERTICES = 100_000
REDUCE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MpProblem:
    """Weighted sum-rate program of one channel realization and DPC order."""

    xi: RVec
    r_BR2: RVec
    r_MR2: RVec
    l_RM2: RVec
    l_RB2: RVec
    sigma2: float
    P_B: float
    P_R: float
    P_M: RVec

    def __post_init__(self) -> None:
        K = np.asarray(self.r_BR2).size
        for name in ("r_BR2", "r_MR2", "l_RM2", "l_RB2", "P_M"):
            value = np.asarray(getattr(self, name), dtype=np.float64).ravel()
            if value.size != K:
                raise InvalidArgsError(f"{name} must have {K} entries, got {value.size}")
            if not np.all(value > 0):
                raise InvalidArgsError(f"{name} must be strictly positive")
            object.__setattr__(self, name, value)
        xi = np.asarray(self.xi, dtype=np.float64).ravel()
        if xi.size != 2 * K or np.any(xi < 0) or not xi.sum() > 0:
            raise InvalidArgsError(f"xi must have {2 * K} non-negative entries, not all zero")
        object.__setattr__(self, "xi", xi)
        if not (self.sigma2 > 0 and self.P_B > 0 and self.P_R > 0):
            raise InvalidArgsError("sigma2, P_B and P_R must be > 0")

    @classmethod
    def from_triangularization(cls, tri: Triangularization, ch: ChannelSet,
                               weights: Weights) -> "MpProblem":
        return cls(
            xi=weights.stacked,
            r_BR2=tri.r_BR2, r_MR2=tri.r_MR2, l_RM2=tri.l_RM2, l_RB2=tri.l_RB2,
            sigma2=ch.sigma2, P_B=ch.P_B, P_R=ch.P_R, P_M=ch.P_M,
        )

    @property
    def K(self) -> int:
        return int(self.r_BR2.size)

    def snr(self, pw: PowerProfile) -> RVec:
        """SNR_i(P) for the 2K streams; 1/2 log2(1 + SNR_i) is the stream rate."""
        s2 = self.sigma2
        bm = np.minimum(clamped_snr(self.r_BR2 * pw.P_Bk / s2), self.l_RM2 * pw.P_Rk / s2)
        mb = np.minimum(clamped_snr(self.r_MR2 * self.P_M / s2), self.l_RB2 * pw.P_Rk / s2)
        return np.concatenate([bm, mb])

    def gamma(self, z: npt.ArrayLike) -> float:
        return float(0.5 * np.log2(np.asarray(z, dtype=np.float64)) @ self.xi)

    def weighted_rate(self, pw: PowerProfile) -> float:
        return self.gamma(1.0 + self.snr(pw))

    def upper_vertex(self) -> RVec:
        """Componentwise maximum of G: every stream alone with the full budgets.

        Coordinates with zero weight are pinned to 1.
        """
        s2 = self.sigma2
        bm = np.minimum(1.0 + clamped_snr(self.r_BR2 * self.P_B / s2),
                        1.0 + self.l_RM2 * self.P_R / s2)
        mb = np.minimum(1.0 + clamped_snr(self.r_MR2 * self.P_M / s2),
                        1.0 + self.l_RB2 * self.P_R / s2)
        z = np.concatenate([bm, mb])
        z[self.xi <= 0] = 1.0
        return z

    def upper_bound(self) -> float:
        """Gamma at the initial vertex; no allocation can exceed it."""
        return self.gamma(self.upper_vertex())


def solve_p1(z: npt.ArrayLike, sigma_k2: npt.ArrayLike, P_B: float) -> tuple[float, RVec]:
    """Max-min split of the BS budget.

    Maximizes min_k max(1, P_k / sigma_k2) / z_k subject to sum P_k <= P_B
    in closed form: with z sorted ascending, find the level l whose bracket
    contains P_B; streams below l get no power.

    Returns:
        (theta1, per-stream BS powers in the original stream order)
    """
    z = np.asarray(z, dtype=np.float64)
    s = np.asarray(sigma_k2, dtype=np.float64)
    if z.shape != s.shape or z.ndim != 1 or z.size == 0:
        raise InvalidArgsError("z and sigma_k2 must be non-empty vectors of equal length")
    K = z.size
    order = np.argsort(z, kind="stable")
    zs = z[order]
    w = zs * s[order]
    # tail[l] = sum_{k >= l} z_k sigma_k^2 in sorted order, tail[K] = 0
    tail = np.concatenate([np.cumsum(w[::-1])[::-1], [0.0]])

    level = K - 1
    for l in range(K):
        lower = tail[l + 1] / zs[l]
        upper = np.inf if l == 0 else tail[l] / zs[l - 1]
        if lower <= P_B < upper:
            level = l
            break

    power = np.zeros(K)
    by_power = P_B / tail[level]
    if by_power >= 1.0 / zs[level]:
        theta = float(by_power)
        power[order[level:]] = theta * w[level:]
    else:
        theta = float(1.0 / zs[level])
        power[order[level + 1:]] = w[level + 1:] / zs[level]
        power[order[level]] = max(P_B - tail[level + 1] / zs[level], 0.0)
    return theta, power


def _p2_power(theta: float | npt.NDArray[np.float64], zB: RVec, zM: RVec, c_RM: RVec,
              c_RB: RVec) -> npt.NDArray[np.float64]:
    return np.maximum(np.maximum((theta * zB - 1.0) * c_RM, (theta * zM - 1.0) * c_RB), 0.0)


def _p2_kinks(zB: RVec, zM: RVec, c_RM: RVec, c_RB: RVec) -> RVec:
    """Points where a stream's relay power leaves zero or switches direction."""
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = (c_RM - c_RB) / (zB * c_RM - zM * c_RB)
    points = np.concatenate([1.0 / zB, 1.0 / zM, cross])
    return np.unique(points[np.isfinite(points) & (points > 0.0)])


def solve_p2(z: npt.ArrayLike, l_RM2: npt.ArrayLike, l_RB2: npt.ArrayLike,
             sigma2: float, P_R: float) -> tuple[float, RVec]:
    """Max-min split of the relay budget.

    Solves sum_k [max((theta z_k - 1) s2 / l_RM2_k, (theta z_{K+k} - 1) s2 / l_RB2_k)]^+ = P_R.
    The left side is piecewise linear and non-decreasing in theta, so a
    bisection over its kinks finds the piece holding P_R, which is then
    solved exactly.

    Returns:
        (theta2, per-stream relay powers)
    """
    z = np.asarray(z, dtype=np.float64)
    l_RM2 = np.asarray(l_RM2, dtype=np.float64)
    l_RB2 = np.asarray(l_RB2, dtype=np.float64)
    K = l_RM2.size
    if z.size != 2 * K or l_RB2.size != K:
        raise InvalidArgsError(f"z must have {2 * K} entries to match {K} streams")
    if not P_R > 0:
        raise InvalidArgsError(f"P_R must be > 0, got {P_R}")
    zB, zM = z[:K], z[K:]
    c_RM, c_RB = sigma2 / l_RM2, sigma2 / l_RB2

    # nothing is spent up to 1 / max z
    start = 1.0 / z.max()
    kinks = _p2_kinks(zB, zM, c_RM, c_RB)
    kinks = np.concatenate([[start], kinks[kinks > start]])
    spent = _p2_power(kinks[:, np.newaxis], zB, zM, c_RM, c_RB).sum(axis=1)
    piece = int(np.searchsorted(spent, P_R, side="right")) - 1
    left = kinks[piece]
    right = kinks[piece + 1] if piece + 1 < kinks.size else left + 1.0

    mid = 0.5 * (left + right)
    to_ms, to_bs = (mid * zB - 1.0) * c_RM, (mid * zM - 1.0) * c_RB
    slopes = np.where(to_ms >= to_bs, zB * c_RM, zM * c_RB)
    slope = float(slopes[np.maximum(to_ms, to_bs) > 0.0].sum())
    theta = float(left + (P_R - spent[piece]) / slope)

    power = _p2_power(theta, zB, zM, c_RM, c_RB)
    total = power.sum()
    if total > P_R:
        power *= P_R / total
    return theta, power


def theta3(z_M: npt.ArrayLike, r_MR2: npt.ArrayLike, P_M: npt.ArrayLike,
           sigma2: float) -> float:
    """Ray scaling allowed by the fixed MS powers."""
    snr = 1.0 + clamped_snr(np.asarray(r_MR2) * np.asarray(P_M) / sigma2)
    return float(np.min(snr / np.asarray(z_M, dtype=np.float64)))


@dataclass(frozen=True, eq=False)
class Projection:
    """Where the ray through z meets the upper boundary of G."""

    theta: float
    y: RVec
    power: PowerProfile


def project(problem: MpProblem, z: npt.ArrayLike) -> Projection:
    """Project z onto the upper boundary of G along the ray from 0."""
    z = np.asarray(z, dtype=np.float64)
    K = problem.K
    if z.size != 2 * K or np.any(z <= 0):
        raise InvalidArgsError(f"z must be a positive vector with {2 * K} entries")
    t1, P_Bk = solve_p1(z[:K], problem.sigma2 / problem.r_BR2, problem.P_B)
    t2, P_Rk = solve_p2(z, problem.l_RM2, problem.l_RB2, problem.sigma2, problem.P_R)
    t3 = theta3(z[K:], problem.r_MR2, problem.P_M, problem.sigma2)
    theta = min(t1, t2, t3)
    return Projection(theta=theta, y=theta * z, power=PowerProfile(P_Bk, P_Rk))


def reduce_vertex(problem: MpProblem, v: npt.ArrayLike, threshold: float) -> RVec | None:
    """Shrink vertex v to the part of its box that can still beat ``threshold``.

    Every z <= v with Gamma(z) > threshold lies above the corner where each
    coordinate alone uses up the slack Gamma(v) - threshold. Reaching that
    corner takes a minimum of BS and relay power per stream; what the
    budgets leave beyond the other streams' minimum caps each coordinate.

    Returns:
        The shrunk vertex, or None when the corner is out of reach or the
        shrunk vertex cannot beat ``threshold``.
    """
    v = np.asarray(v, dtype=np.float64)
    slack = problem.gamma(v) - threshold
    if not slack > 0:
        return None
    K, s2, xi = problem.K, problem.sigma2, problem.xi
    corner = np.ones_like(v)
    weighted = xi > 0
    corner[weighted] = np.maximum(v[weighted] * np.exp2(-2.0 * slack / xi[weighted]), 1.0)
    cB, cM = corner[:K], corner[K:]

    need_B = np.where(cB > 1.0, s2 * cB / problem.r_BR2, 0.0)
    need_R = np.maximum(np.maximum((cB - 1.0) * s2 / problem.l_RM2,
                                   (cM - 1.0) * s2 / problem.l_RB2), 0.0)
    ms_cap = 1.0 + clamped_snr(problem.r_MR2 * problem.P_M / s2)
    over = 1.0 + REDUCE_TOL
    if (need_B.sum() > problem.P_B * over or need_R.sum() > problem.P_R * over
            or np.any(cM > ms_cap * over)):
        return None

    spare_B = problem.P_B - (need_B.sum() - need_B)
    spare_R = problem.P_R - (need_R.sum() - need_R)
    reduced = v.copy()
    reduced[:K] = np.minimum(v[:K], np.minimum(np.maximum(problem.r_BR2 * spare_B / s2, 1.0),
                                               1.0 + problem.l_RM2 * spare_R / s2))
    reduced[K:] = np.minimum(v[K:], np.minimum(ms_cap, 1.0 + problem.l_RB2 * spare_R / s2))
    np.maximum(reduced, 1.0, out=reduced)
    if problem.gamma(reduced) <= threshold:
        return None
    return reduced


@dataclass
class MpState:
    """Vertex pool and incumbent of a running polyblock search.

    The pool is a heap of (-Gamma, z): the top is the vertex with the
    largest Gamma, ties going to the lexicographically smallest z. Pruning
    is lazy. Once the top cannot beat the threshold, nothing below it can.
    """

    cbv: float
    incumbent_z: RVec
    incumbent_power: PowerProfile
    epsilon: float
    cutoff: float = -np.inf
    pool: list[tuple[float, tuple[float, ...]]] = field(default_factory=list)
    iterations: int = 0
    generated: int = 0
    high_water: int = 0
    cbv_trace: list[float] = field(default_factory=list)

    @property
    def threshold(self) -> float:
        """Vertices at or below this Gamma are pruned."""
        return max(self.cbv, self.cutoff) * (1.0 + self.epsilon)

    def push(self, z: RVec, value: float, new: bool = True) -> None:
        """Add a vertex; ``new=False`` puts back a shrunk copy of a popped one."""
        heapq.heappush(self.pool, (-value, tuple(np.asarray(z, dtype=np.float64).tolist())))
        if new:
            self.generated += 1
        self.high_water = max(self.high_water, len(self.pool))

    def pop_best(self) -> tuple[float, RVec] | None:
        """Remove and return (Gamma, z) of the best vertex.

        Returns None, and empties the pool, when no vertex beats the threshold.
        """
        if self.pool and -self.pool[0][0] > self.threshold:
            key, z = heapq.heappop(self.pool)
            return -key, np.array(z)
        self.pool.clear()
        return None


@dataclass
class MpResult:
    """Outcome of the polyblock search."""

    power: PowerProfile
    R_ws: float
    certified: bool
    iterations: int
    cbv_trace: list[float]
    z: RVec
    high_water: int


def maximize_weighted_sum_rate(problem: MpProblem, epsilon: float = DEFAULT_EPSILON,
                               max_vertices: int = DEFAULT_MAX_VERTICES,
                               cutoff: float = -np.inf) -> MpResult:
    """Polyblock outer approximation for the weighted sum-rate.

    Starts from the single vertex ``upper_vertex()`` with the equal power
    split as incumbent. The result is epsilon-optimal,
    (1 + epsilon) R_ws >= optimum, unless more than ``max_vertices``
    vertices get generated, in which case the best incumbent comes back
    with ``certified=False``.

    ``cutoff`` is a value already reached elsewhere, for instance under
    another DPC order. Vertices that cannot beat it by the factor
    (1 + epsilon) are pruned too, so a certified result is then either
    epsilon-optimal or proof that the optimum is within that factor of
    ``cutoff``.
    """
    if not epsilon > 0:
        raise InvalidArgsError(f"epsilon must be > 0, got {epsilon}")
    if max_vertices < 1:
        raise InvalidArgsError(f"max_vertices must be >= 1, got {max_vertices}")

    K = problem.K
    equal = PowerProfile(np.full(K, problem.P_B / K), np.full(K, problem.P_R / K))
    z_eq = 1.0 + problem.snr(equal)
    state = MpState(cbv=problem.gamma(z_eq), incumbent_z=z_eq, incumbent_power=equal,
                    epsilon=epsilon, cutoff=cutoff)
    state.cbv_trace.append(state.cbv)
    z0 = problem.upper_vertex()
    state.push(z0, problem.gamma(z0))
    certified = True

    while True:
        item = state.pop_best()
        if item is None:
            break
        if state.generated > max_vertices:
            certified = False
            break
        value, z = item
        reduced = reduce_vertex(problem, z, state.threshold)
        if reduced is None:
            continue
        reduced_value = problem.gamma(reduced)
        if reduced_value < value - REDUCE_TOL * max(1.0, value):
            state.push(reduced, reduced_value, new=False)
            continue

        z = reduced
        state.iterations += 1
        proj = project(problem, z)

        # 1 + SNR at the projection's power dominates max(y, 1), so it is a
        # feasible point at least as good as y.
        z_feas = 1.0 + problem.snr(proj.power)
        value = problem.gamma(z_feas)
        if value > state.cbv:
            state.cbv = value
            state.incumbent_z = z_feas
            state.incumbent_power = proj.power
        state.cbv_trace.append(state.cbv)

        if proj.theta >= 1.0:
            continue
        threshold = state.threshold
        for i in range(2 * K):
            if proj.y[i] < 1.0:
                continue
            child = z.copy()
            child[i] = proj.y[i]
            child = reduce_vertex(problem, child, threshold)
            if child is not None:
                state.push(child, problem.gamma(child))

    return MpResult(
        power=state.incumbent_power,
        R_ws=problem.weighted_rate(state.incumbent_power),
        certified=certified,
        iterations=state.iterations,
        cbv_trace=state.cbv_trace,
        z=state.incumbent_z,
        high_water=state.high_water,
    )
