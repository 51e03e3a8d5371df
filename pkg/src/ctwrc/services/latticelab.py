"""End-to-end lattice codec property runs."""

from dataclasses import dataclass, field
from typing import Any

from ctwrc.exceptions import AcceptanceError, InvalidArgsError
from ctwrc.output import notice, output_success, progress
from ctwrc.scheme.latticelab import DEFAULT_FRAME_LENGTH, LatticeChain, frame_errors, run_frame
from ctwrc.scheme.matfact import gen_channels
from ctwrc.scheme.triangulate import Permutation, triangularize
from ctwrc.services.base import BaseService
from ctwrc.utils.seeding import trial_rng

FINE_SPACINGS = (0.25, 0.5, 1.0, 2.0)
FAULT_STREAM = 1


@dataclass
class FrameFailure:
    """A frame whose decoded codewords did not match."""

    id: str
    K: int
    errors_B: int
    errors_M: int
    injected: bool = False


@dataclass
class LabReport:
    frames: int
    k_max: int
    seed: int
    length: int
    per_k: dict[int, int] = field(default_factory=dict)
    failures: list[FrameFailure] = field(default_factory=list)
    fault_detected: bool | None = None

    @property
    def passed(self) -> bool:
        return not any(not f.injected for f in self.failures)

    def as_dict(self) -> dict[str, Any]:
        return {
            "frames": self.frames,
            "k_max": self.k_max,
            "seed": self.seed,
            "length": self.length,
            "frames_per_k": {str(k): n for k, n in sorted(self.per_k.items())},
            "failures": [vars(f) for f in self.failures],
            "fault_detected": self.fault_detected,
            "passed": self.passed,
        }


def _random_frame(seed: int, index: int, K: int, length: int) -> FrameFailure | None:
    rng = trial_rng(seed, index)
    ch = gen_channels(K, rng, reciprocal=bool(rng.integers(2)))
    perm = Permutation.from_order(rng.permutation(K))
    tri = triangularize(ch, perm)
    chain = LatticeChain.draw(
        rng, tri, T=length,
        q_C=rng.choice(FINE_SPACINGS, size=K),
        b=rng.integers(1, 7, size=K),
        m=rng.integers(1, 5, size=K),
    )
    errors_B, errors_M = frame_errors(run_frame(tri, ch, chain, rng))
    if errors_B or errors_M:
        return FrameFailure(id=f"{seed}:{index}", K=K, errors_B=errors_B, errors_M=errors_M)
    return None


def _fault_frame(seed: int, K: int, length: int) -> FrameFailure:
    # default spacings (b = 4, m = 2) so a one-step shift cannot alias
    rng = trial_rng(seed, 0, FAULT_STREAM)
    ch = gen_channels(K, rng)
    tri = triangularize(ch, Permutation.identity(K))
    chain = LatticeChain.draw(rng, tri, T=length)
    errors_B, errors_M = frame_errors(run_frame(tri, ch, chain, rng, inject_fault=True))
    return FrameFailure(id=f"{seed}:fault", K=K, errors_B=errors_B, errors_M=errors_M,
                        injected=True)


def run_latticelab(
    frames: int,
    k_max: int,
    seed: int,
    length: int = DEFAULT_FRAME_LENGTH,
    inject_fault: bool = False,
    show_progress: bool = False,
) -> LabReport:
    """Carry random frames through the codec and record every mismatch.

    Frame i uses K = 1 + (i mod k_max) and draws its own channel, order,
    spacings, dithers and codewords from (seed, i).
    """
    if frames < 1:
        raise InvalidArgsError(f"frames must be >= 1, got {frames}")
    if k_max < 1:
        raise InvalidArgsError(f"k must be >= 1, got {k_max}")
    if length < 1:
        raise InvalidArgsError(f"length must be >= 1, got {length}")
    if seed < 0:
        raise InvalidArgsError(f"seed must be >= 0, got {seed}")

    report = LabReport(frames=frames, k_max=k_max, seed=seed, length=length)
    for i in progress(range(frames), "latticelab", total=frames, enabled=show_progress):
        K = 1 + i % k_max
        report.per_k[K] = report.per_k.get(K, 0) + 1
        failure = _random_frame(seed, i, K, length)
        if failure is not None:
            report.failures.append(failure)

    if inject_fault:
        fault = _fault_frame(seed, k_max, length)
        report.fault_detected = bool(fault.errors_B or fault.errors_M)
        if report.fault_detected:
            report.failures.append(fault)
    return report


class LatticeLabService(BaseService):
    """Service behind ``ctwrc-cli latticelab``."""

    OPERATION = "latticelab"

    def run(self, frames: int, k_max: int, seed: int, length: int = DEFAULT_FRAME_LENGTH,
            inject_fault: bool = False) -> None:
        """Run the lab; any reported failure ends with the acceptance exit code."""
        with self.reporting():
            report = run_latticelab(frames, k_max, seed, length, inject_fault,
                                    show_progress=not self.quiet)
            if inject_fault and not report.fault_detected:
                raise AcceptanceError("Injected relay fault went undetected",
                                      details=f"seed={seed}, K={k_max}")
            if report.failures:
                ids = ", ".join(f.id for f in report.failures[:10])
                real = [f for f in report.failures if not f.injected]
                if not self.quiet:
                    notice(f"{len(report.failures)} frame(s) failed: {ids}")
                raise AcceptanceError(
                    f"{len(real)} of {frames} frames not recovered"
                    if real else "Injected relay fault reported",
                    details=f"failures={ids}; frames_per_k={report.as_dict()['frames_per_k']}",
                )
        output_success(operation=self.OPERATION, **report.as_dict())
