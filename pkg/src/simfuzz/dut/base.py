"""The cycle-stepping model contract and the single-run driver."""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import kernels
from ..coverage import COUNTER_DTYPE, parse_coverage_report, write_coverage_report
from ..errors import ContractViolation
from ..grammar import RAW, GrammarMode, Stimulus


@dataclass(frozen=True)
class DutDescriptor:
    name: str
    input_width_bits: int
    coverpoint_count: int
    grammar: GrammarMode = RAW
    cycle_delay_us: float = 0.0

    def __post_init__(self):
        if self.input_width_bits < 1:
            raise ContractViolation("input width must be >= 1 bit")
        if self.coverpoint_count < 1:
            raise ContractViolation("a design must declare at least one coverpoint")


@dataclass(frozen=True)
class CheckResult:
    passed: bool = True
    message: str = ""


PASS = CheckResult()


class Dut:
    """Base class for models honouring the contract.

    Subclasses implement :meth:`reset`, :meth:`step`, :meth:`read_coverage`
    and optionally :meth:`check`. :meth:`run_cycles` may be overridden with a
    faster whole-stimulus path; it must be equivalent to stepping each word.
    """

    descriptor: DutDescriptor
    coverpoint_names: Sequence[str] = ()

    def reset(self) -> None:
        raise NotImplementedError

    def step(self, word: int) -> None:
        raise NotImplementedError

    def read_coverage(self) -> np.ndarray:
        raise NotImplementedError

    def check(self) -> CheckResult:
        return PASS

    def run_cycles(self, cycles) -> int:
        for word in cycles:
            self.step(int(word))
        return len(cycles)

    def close(self) -> None:
        pass

    def names(self) -> list[str]:
        if self.coverpoint_names:
            return list(self.coverpoint_names)
        return [f"cp{i}" for i in range(self.descriptor.coverpoint_count)]


class KernelDut(Dut):
    """A model whose cycle loop lives in a kernel function.

    State is a flat int64 array and coverage a uint32 counter array, so the
    kernel can run a whole stimulus without returning to Python.
    """

    state_size = 0
    bug_slot = -1
    bug_message = ""

    def __init__(self, backend: str | None = None):
        self.kernels = kernels.get(backend)
        self.state = np.zeros(self.state_size, dtype=np.int64)
        self.cov = np.zeros(self.descriptor.coverpoint_count, dtype=COUNTER_DTYPE)
        self._one = np.zeros(1, dtype=np.uint64)
        self.reset()

    def reset(self):
        self.state.fill(0)
        self.cov.fill(0)

    def _kernel(self, words: np.ndarray) -> int:
        raise NotImplementedError

    def step(self, word):
        mask = (1 << self.descriptor.input_width_bits) - 1
        self._one[0] = int(word) & mask
        self._kernel(self._one)

    def run_cycles(self, cycles):
        words = np.ascontiguousarray(cycles, dtype=np.uint64)
        return self._kernel(words)

    def read_coverage(self):
        return self.cov.copy()

    def check(self):
        if self.bug_slot >= 0 and self.state[self.bug_slot]:
            return CheckResult(False, self.bug_message)
        return PASS


@dataclass
class RunResult:
    coverage: np.ndarray
    check: CheckResult
    cycles: int
    sim_seconds: float = 0.0
    collect_seconds: float = 0.0


class ReportFileCollector:
    """Collect coverage by writing and re-parsing a text report per run."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def collect(self, dut: Dut) -> np.ndarray:
        names = dut.names()
        write_coverage_report(self.path, dut.descriptor.name, names, dut.read_coverage())
        return parse_coverage_report(self.path, names)


def run_stimulus(dut: Dut, stimulus: Stimulus, collector: ReportFileCollector | None = None) -> RunResult:
    """Reset, drive every cycle, read coverage once, then evaluate the check."""
    if stimulus.width != dut.descriptor.input_width_bits:
        raise ContractViolation(
            f"stimulus width {stimulus.width} does not match {dut.descriptor.name} "
            f"input width {dut.descriptor.input_width_bits}"
        )
    t0 = time.perf_counter()
    dut.reset()
    cycles = dut.run_cycles(stimulus.cycles)
    t1 = time.perf_counter()
    coverage = dut.read_coverage() if collector is None else collector.collect(dut)
    coverage.flags.writeable = False
    t2 = time.perf_counter()
    result = dut.check()
    t3 = time.perf_counter()
    return RunResult(coverage, result, cycles, (t1 - t0) + (t3 - t2), t2 - t1)
