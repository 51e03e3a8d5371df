"""Noiseless nested-lattice codec for the two-way relay scheme.

Complex lattices are independent real and imaginary scaled-integer
lattices, one chain per stream: Lambda_M (spacing q_M = m q_B) inside
Lambda_B (q_B = b q_C) inside Lambda_C (q_C). Codewords are Lambda_C points
strictly inside the shaping cell, so every congruence check has at least
q_C/2 of margin against rounding.

The relay reduces the decoded lattice sum modulo Lambda_M, the coarsest
lattice of the chain, and DPC-encodes modulo the same lattice. The MS then
recovers c_B modulo Lambda_B and the BS recovers c_M modulo Lambda_M by
subtracting its own lifted codeword c_B + v + d_B. With m = 1 this is the
plain Lambda_B chain and the BS may subtract c_B itself.
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy.linalg import solve_triangular

from ctwrc.exceptions import InvalidArgsError
from ctwrc.scheme.matfact import ChannelSet, CMat, RVec
from ctwrc.scheme.triangulate import Triangularization

DEFAULT_FRAME_LENGTH = 64
RECOVERY_TOL = 1e-6

IVec = npt.NDArray[np.int64]


def mod_lattice(x: npt.ArrayLike, q: npt.ArrayLike) -> npt.NDArray[np.generic]:
    """Reduce real and imaginary parts into [-q/2, q/2)."""
    arr = np.asarray(x)
    step = np.asarray(q, dtype=np.float64)

    def reduce(v: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return v - step * np.floor(v / step + 0.5)

    if np.iscomplexobj(arr):
        return reduce(arr.real) + 1j * reduce(arr.imag)
    return reduce(arr.astype(np.float64))


def snap_lattice(x: npt.ArrayLike, q: npt.ArrayLike) -> CMat:
    """Nearest point of the scaled complex integer lattice q(Z + iZ)."""
    arr = np.asarray(x, dtype=np.complex128)
    step = np.asarray(q, dtype=np.float64)
    return (step * np.round(arr.real / step) + 1j * step * np.round(arr.imag / step)).astype(
        np.complex128
    )


def _col(v: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.asarray(v, dtype=np.float64).reshape(-1, 1)


def _uniform_cell(rng: np.random.Generator, q: RVec, T: int) -> CMat:
    shape = (q.size, T)
    re = rng.uniform(-0.5, 0.5, size=shape)
    im = rng.uniform(-0.5, 0.5, size=shape)
    return (_col(q) * (re + 1j * im)).astype(np.complex128)


@dataclass(frozen=True, eq=False)
class LatticeChain:
    """Per-stream spacings, dithers and MMSE coefficients."""

    q_C: RVec
    b: IVec
    m: IVec
    d_B: CMat
    d_M: CMat
    d_R: CMat
    beta_M: RVec

    def __post_init__(self) -> None:
        K = np.asarray(self.q_C).size
        if np.any(np.asarray(self.q_C) <= 0):
            raise InvalidArgsError("q_C must be > 0")
        if np.any(np.asarray(self.b) < 1) or np.any(np.asarray(self.m) < 1):
            raise InvalidArgsError("Nesting ratios b and m must be integers >= 1")
        for name in ("d_B", "d_M", "d_R"):
            if np.asarray(getattr(self, name)).shape[0] != K:
                raise InvalidArgsError(f"{name} must have {K} rows")

    @property
    def K(self) -> int:
        return int(np.asarray(self.q_C).size)

    @property
    def T(self) -> int:
        return int(self.d_B.shape[1])

    @property
    def q_B(self) -> RVec:
        return np.asarray(self.q_C, dtype=np.float64) * self.b

    @property
    def q_M(self) -> RVec:
        return self.q_B * self.m

    @property
    def q_relay(self) -> RVec:
        """Spacing of the relay's combining and DPC lattice (Lambda_M)."""
        return self.q_M

    @classmethod
    def draw(
        cls,
        rng: np.random.Generator,
        tri: Triangularization,
        T: int = DEFAULT_FRAME_LENGTH,
        q_C: float | npt.ArrayLike = 1.0,
        b: int | npt.ArrayLike = 4,
        m: int | npt.ArrayLike = 2,
        sigma2: float = 0.0,
        P_Rk: npt.ArrayLike | None = None,
    ) -> "LatticeChain":
        """Draw dithers for a chain; beta_M is 1 in the noiseless case."""
        K = tri.K
        if T < 1:
            raise InvalidArgsError(f"Frame length must be >= 1, got {T}")
        qC = np.broadcast_to(np.asarray(q_C, dtype=np.float64), (K,)).copy()
        bb = np.broadcast_to(np.asarray(b, dtype=np.int64), (K,)).copy()
        mm = np.broadcast_to(np.asarray(m, dtype=np.int64), (K,)).copy()
        if sigma2 == 0.0:
            beta = np.ones(K)
        else:
            if P_Rk is None:
                raise InvalidArgsError("P_Rk is required for the MMSE coefficient when sigma2 > 0")
            gain = tri.l_RM2 * np.asarray(P_Rk, dtype=np.float64)
            beta = gain / (gain + sigma2)
        qB = qC * bb
        qM = qB * mm
        return cls(
            q_C=qC, b=bb, m=mm,
            d_B=_uniform_cell(rng, qB, T),
            d_M=_uniform_cell(rng, qM, T),
            d_R=_uniform_cell(rng, qM, T),
            beta_M=beta,
        )


@dataclass
class LatticeFrame:
    """Signals of one frame, filled in stage by stage."""

    c_B: CMat
    c_M: CMat
    s_B: CMat
    s_M: CMat
    v: CMat
    w_isi: CMat | None = None
    s_tilde: CMat | None = None
    c_sum: CMat | None = None
    s_R: CMat | None = None
    x_dpc: CMat | None = None
    t_M: CMat | None = None
    c_B_hat: CMat | None = None
    c_M_hat: CMat | None = None


def draw_codewords(rng: np.random.Generator, chain: LatticeChain) -> tuple[CMat, CMat]:
    """Uniform Lambda_C points strictly inside the Lambda_B and Lambda_M cells."""
    shape = (chain.K, chain.T)

    def draw(ratio: npt.NDArray[np.int64]) -> CMat:
        n_max = _col(np.ceil(ratio / 2.0) - 1).astype(np.int64)
        re = rng.integers(-n_max, n_max + 1, size=shape)
        im = rng.integers(-n_max, n_max + 1, size=shape)
        return (_col(chain.q_C) * (re + 1j * im)).astype(np.complex128)

    return draw(chain.b), draw(chain.b * chain.m)


def encode_bs(c_B: npt.ArrayLike, v: npt.ArrayLike, d_B: npt.ArrayLike,
              q_B: npt.ArrayLike) -> CMat:
    """Lattice-precoded BS stream: (c_B - v - d_B) mod Lambda_B."""
    return np.asarray(mod_lattice(np.asarray(c_B) - np.asarray(v) - np.asarray(d_B), q_B),
                      dtype=np.complex128)


def encode_ms(c_M: npt.ArrayLike, d_M: npt.ArrayLike, alpha: npt.ArrayLike,
              q_M: npt.ArrayLike) -> CMat:
    """MS stream pre-scaled by 1/alpha: ((c_M - d_M) mod Lambda_M) / alpha."""
    reduced = mod_lattice(np.asarray(c_M) - np.asarray(d_M), q_M)
    return np.asarray(reduced / np.asarray(alpha, dtype=np.float64), dtype=np.complex128)


def encode_frame(tri: Triangularization, chain: LatticeChain, c_B: CMat,
                 c_M: CMat) -> LatticeFrame:
    """Encode both first-phase transmitters.

    The BS encodes streams K..1 so that v_k only involves streams already
    encoded.
    """
    K, T = chain.K, chain.T
    if tri.K != K or c_B.shape != (K, T) or c_M.shape != (K, T):
        raise InvalidArgsError(f"Codewords must be {K}x{T} to match the chain")
    r = np.diag(tri.R_BR).real
    s_B = np.zeros((K, T), dtype=np.complex128)
    v = np.zeros((K, T), dtype=np.complex128)
    for k in reversed(range(K)):
        v[k] = tri.Rp_BR[k, k + 1:] @ s_B[k + 1:] / r[k]
        s_B[k] = encode_bs(c_B[k], v[k], chain.d_B[k], chain.q_B[k])
    s_M = encode_ms(c_M, chain.d_M, _col(tri.alpha), _col(chain.q_M))
    return LatticeFrame(c_B=c_B, c_M=c_M, s_B=s_B, s_M=s_M, v=v)


def first_phase_signal(tri: Triangularization, ch: ChannelSet, frame: LatticeFrame) -> CMat:
    """Relay observation H_BR Q_BR^H S_B + H_MR S_M."""
    return np.asarray(ch.H_BR @ (tri.Q_BR.conj().T @ frame.s_B) + ch.H_MR @ frame.s_M)


def relay_frame(tri: Triangularization, chain: LatticeChain, frame: LatticeFrame,
                y_R: CMat | None = None) -> CMat:
    """Relay SIC and lattice combining; returns s_R per stream.

    ``y_R`` is the received first-phase block; without it the rotated
    noiseless observation R_BR S_B + R_MR S_M is synthesized.
    """
    K, T = chain.K, chain.T
    if y_R is None:
        rotated = tri.R_BR @ frame.s_B + tri.R_MR @ frame.s_M
    else:
        if y_R.shape != (K, T):
            raise InvalidArgsError(f"Relay observation must be {K}x{T}, got {y_R.shape}")
        rotated = tri.Q_MR.conj().T @ y_R
    r = np.diag(tri.R_BR).real
    q_relay = chain.q_relay

    w_isi = np.zeros((K, T), dtype=np.complex128)
    s_tilde = np.zeros((K, T), dtype=np.complex128)
    c_sum = np.zeros((K, T), dtype=np.complex128)
    s_R = np.zeros((K, T), dtype=np.complex128)
    for k in reversed(range(K)):
        w_isi[k] = tri.U_R[k, k + 1:] @ s_tilde[k + 1:]
        y_k = (rotated[k] - w_isi[k]) / r[k]
        w_k = y_k + chain.d_B[k] + chain.d_M[k]
        c_sum[k] = snap_lattice(w_k, chain.q_C[k])
        s_R[k] = mod_lattice(c_sum[k], q_relay[k])
        # rebuild the interference this stream causes on the ones above it
        s_tilde[k] = r[k] * (c_sum[k] - chain.d_B[k] - chain.d_M[k])

    frame.w_isi, frame.s_tilde, frame.c_sum, frame.s_R = w_isi, s_tilde, c_sum, s_R
    return s_R


def dpc_encode(s_R: CMat, tri: Triangularization, chain: LatticeChain) -> tuple[CMat, CMat]:
    """Second-phase DPC in position order.

    Returns:
        (x_dpc indexed by position, t_M indexed by stream)
    """
    K, T = chain.K, chain.T
    L = tri.L_RM
    x = np.zeros((K, T), dtype=np.complex128)
    t = np.zeros((K, T), dtype=np.complex128)
    for p, k in enumerate(tri.perm.mu):
        t[k] = L[p, :p] @ x[:p]
        shifted = s_R[k] - chain.beta_M[k] * t[k] / L[p, p].real - chain.d_R[k]
        x[p] = mod_lattice(shifted, chain.q_relay[k])
    return x, t


def relay_transmit(tri: Triangularization, x_dpc: CMat) -> CMat:
    """Relay antenna signal Q_RM^H x."""
    return np.asarray(tri.Q_RM.conj().T @ x_dpc)


def ms_decode(y_M: CMat, tri: Triangularization, chain: LatticeChain, c_M: CMat,
              d_M: CMat) -> CMat:
    """Recover c_B at every MS from its own received stream and its own message.

    ``y_M`` is indexed by stream (row k is what MS k receives).
    """
    K = chain.K
    c_B_hat = np.zeros_like(c_M, dtype=np.complex128)
    for k in range(K):
        p = tri.perm.q[k]
        l = tri.L_RM[p, p].real
        s_hat = mod_lattice(
            snap_lattice(chain.beta_M[k] * y_M[k] / l + chain.d_R[k], chain.q_C[k]),
            chain.q_relay[k],
        )
        own = mod_lattice(c_M[k] - d_M[k], chain.q_M[k]) + d_M[k]
        c_B_hat[k] = mod_lattice(s_hat - own, chain.q_B[k])
    return c_B_hat


def bs_decode(Y_B: CMat, tri: Triangularization, chain: LatticeChain, frame: LatticeFrame,
              lifted: bool = True) -> CMat:
    """Recover every c_M at the BS.

    Forward substitution on L_RB gives the DPC streams, the known
    interference t_M is rebuilt from them and the DPC shift is undone.
    With ``lifted=False`` the BS subtracts c_B instead of its lifted
    codeword, which is exact only when m = 1.
    """
    K = chain.K
    rotated = tri.Q_RB.conj().T @ Y_B
    x_hat = solve_triangular(tri.L_RB, rotated, lower=True)
    # s_B + v + d_B equals c_B plus a Lambda_B point
    own = frame.s_B + frame.v + chain.d_B if lifted else frame.c_B
    L = tri.L_RM
    c_M_hat = np.zeros_like(frame.c_M, dtype=np.complex128)
    for p, k in enumerate(tri.perm.mu):
        t_k = L[p, :p] @ x_hat[:p]
        s_prime = mod_lattice(
            snap_lattice(x_hat[p] + chain.beta_M[k] * t_k / L[p, p].real + chain.d_R[k],
                         chain.q_C[k]),
            chain.q_relay[k],
        )
        c_M_hat[k] = mod_lattice(s_prime - own[k], chain.q_M[k])
    return c_M_hat


def frame_errors(frame: LatticeFrame, tol: float = RECOVERY_TOL) -> tuple[int, int]:
    """Count symbols where c_B or c_M was not recovered."""
    if frame.c_B_hat is None or frame.c_M_hat is None:
        raise InvalidArgsError("Frame has not been decoded")
    errors_B = int(np.count_nonzero(np.abs(frame.c_B_hat - frame.c_B) > tol))
    errors_M = int(np.count_nonzero(np.abs(frame.c_M_hat - frame.c_M) > tol))
    return errors_B, errors_M


def run_frame(tri: Triangularization, ch: ChannelSet, chain: LatticeChain,
              rng: np.random.Generator, inject_fault: bool = False) -> LatticeFrame:
    """Carry one random frame through both phases over the physical channels.

    ``inject_fault`` shifts the relay output of stream 1 by one Lambda_C
    step before DPC, a corruption both receivers must detect when b, m > 1.
    """
    c_B, c_M = draw_codewords(rng, chain)
    frame = encode_frame(tri, chain, c_B, c_M)
    s_R = relay_frame(tri, chain, frame, first_phase_signal(tri, ch, frame))
    if inject_fault:
        s_R = s_R.copy()
        s_R[0] += chain.q_C[0]
        frame.s_R = s_R
    x, t = dpc_encode(s_R, tri, chain)
    frame.x_dpc, frame.t_M = x, t
    X_R = relay_transmit(tri, x)
    frame.c_B_hat = ms_decode(ch.H_RM @ X_R, tri, chain, c_M, chain.d_M)
    frame.c_M_hat = bs_decode(ch.H_RB @ X_R, tri, chain, frame)
    return frame
