"""Designs under test: the model contract, bundled models, external adapter."""

from importlib import resources
from pathlib import Path

from .base import (PASS, CheckResult, Dut, DutDescriptor, KernelDut, ReportFileCollector,
                   RunResult, run_stimulus)
from .periph import PeriphFsm
from .synth import SynthDelay
from .toycpu import ToyCpu
from .wire import SubprocessDut

BUNDLED = {
    "periph-fsm": PeriphFsm,
    "toy-cpu": ToyCpu,
    "synth-delay": SynthDelay,
}

SUMMARIES = {
    "periph-fsm": "I2C-style master controller with register file (64-bit bus word, raw-bits grammar)",
    "toy-cpu": "32-bit accumulator CPU fed from the stimulus stream (35-bit word, transaction grammar)",
    "synth-delay": "scaling probe with configurable coverpoints and per-cycle delay (8-bit word)",
}


def list_duts() -> list[str]:
    return list(BUNDLED)


def create_dut(name: str, backend=None, **options) -> Dut:
    try:
        cls = BUNDLED[name]
    except KeyError:
        raise KeyError(f"unknown design {name!r}; bundled: {', '.join(BUNDLED)}") from None
    return cls(backend=backend, **options)


def bundled_dir(name: str, kind: str) -> Path:
    """Path of a bundled corpus directory (``kind`` is ``seeds`` or ``witness``)."""
    return Path(str(resources.files("simfuzz") / "data" / name / kind))


__all__ = [
    "BUNDLED", "PASS", "CheckResult", "Dut", "DutDescriptor", "KernelDut", "PeriphFsm",
    "ReportFileCollector", "RunResult", "SubprocessDut", "SynthDelay", "ToyCpu",
    "bundled_dir", "create_dut", "list_duts", "run_stimulus",
]
