"""Stage timing and throughput accounting.

Three stages are tracked: ``mutation`` (selection, mutation, translation),
``simulation`` (driving the model) and ``coverage_corpus`` (merging results
into the corpus). Throughput is simulated input cycles per wall second.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import ContractViolation

MUTATION = "mutation"
SIMULATION = "simulation"
COVERAGE_CORPUS = "coverage_corpus"
STAGES = (COVERAGE_CORPUS, MUTATION, SIMULATION)


@dataclass
class StageTimer:
    durations: dict = field(default_factory=lambda: {s: 0.0 for s in STAGES})
    iterations: int = 0
    cycles: int = 0
    wall_seconds: float = 0.0
    # contiguous timers start each span where the previous one ended, so the
    # bookkeeping between stages is charged to the next stage instead of lost;
    # only valid when the timed stages never overlap
    contiguous: bool = False
    _last: float | None = field(default=None, repr=False, compare=False)

    def record(self, stage: str, duration: float) -> None:
        if stage not in self.durations:
            raise ContractViolation(f"unknown stage {stage!r}")
        if duration < 0:
            raise ContractViolation("durations must be >= 0")
        self.durations[stage] += duration

    def time(self, stage: str) -> "_Span":
        """Context manager charging the enclosed block to ``stage``."""
        if stage not in self.durations:
            raise ContractViolation(f"unknown stage {stage!r}")
        return _Span(self, stage)

    def start_clock(self, t0: float) -> None:
        """Anchor a contiguous timer at ``t0`` (the campaign start)."""
        self._last = t0

    def add_cycles(self, n: int) -> None:
        self.cycles += int(n)

    def merge(self, other: "StageTimer") -> None:
        for stage, d in other.durations.items():
            self.durations[stage] += d
        self.cycles += other.cycles
        self.iterations += other.iterations

    @property
    def attributed(self) -> float:
        return sum(self.durations.values())


class _Span:
    # a plain class: generator-based context managers cost more than the
    # smallest stages they time
    __slots__ = ("timer", "stage", "t0")

    def __init__(self, timer, stage):
        self.timer = timer
        self.stage = stage

    def __enter__(self):
        timer = self.timer
        if timer.contiguous and timer._last is not None:
            self.t0 = timer._last
        else:
            self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        now = time.perf_counter()
        self.timer.durations[self.stage] += now - self.t0
        self.timer._last = now
        return False


def throughput(timer: StageTimer, wall_seconds: float | None = None) -> float:
    """Input cycles per second of wall time."""
    wall = timer.wall_seconds if wall_seconds is None else wall_seconds
    if wall <= 0:
        raise ContractViolation("throughput needs elapsed wall time > 0")
    return timer.cycles / wall


def shares(timer: StageTimer, wall_seconds: float | None = None) -> dict:
    """Per-stage fractions.

    Without ``wall_seconds`` the fractions are of the attributed total and sum
    to 1. With it they are utilizations of wall time, which may sum above 1
    when stages overlap.
    """
    total = timer.attributed if wall_seconds is None else wall_seconds
    if total <= 0:
        return {s: 0.0 for s in STAGES}
    return {s: timer.durations[s] / total for s in STAGES}
