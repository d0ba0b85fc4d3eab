"""Throughput sweep over execution modes and thread counts.

Each configuration runs a campaign for a fixed wall-time budget and reports
simulated input cycles per second, normalized to the serial run.
"""

from __future__ import annotations

import csv
import io
import os
import warnings
from dataclasses import dataclass

from .executor import FuzzConfig, run_campaign

CSV_COLUMNS = ("mode", "threads", "throughput_cycles_per_sec", "speedup")


@dataclass
class BenchRow:
    mode: str
    threads: int
    throughput: float
    speedup: float = 1.0

    @property
    def label(self) -> str:
        if self.mode == "serial":
            return "Serial"
        if self.mode == "batch":
            return f"{self.threads} Thread"
        return f"Pipelined {self.threads} Thread"


def core_count() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def plan(threads, modes=("batch", "pipelined")) -> list[tuple[str, int]]:
    """Configurations to measure; serial always comes first."""
    configs = [("serial", 1)]
    for mode in modes:
        for t in threads:
            configs.append((mode, t))
    return configs


def sweep(base: FuzzConfig, threads=(1, 2, 4), modes=("batch", "pipelined"), budget: float = 5.0) -> list[BenchRow]:
    cores = core_count()
    if max(threads) > cores:
        warnings.warn(f"thread counts up to {max(threads)} exceed the {cores} available cores", stacklevel=2)
    rows = []
    for mode, t in plan(threads, modes):
        values = dict(base.__dict__)
        values.update(mode=mode, threads=t, batch_size=None, time_budget=budget,
                      max_iterations=None, stagnation_window=None, out_dir=None)
        report = run_campaign(FuzzConfig(**values))
        rows.append(BenchRow(mode, t, report.timing["throughput_cycles_per_sec"]))
    base_tp = rows[0].throughput
    for row in rows:
        row.speedup = row.throughput / base_tp if base_tp > 0 else 0.0
    return rows


def to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.mode, r.threads, f"{r.throughput:.3f}", f"{r.speedup:.2f}"])
    return buf.getvalue()


def from_csv(text: str) -> list[BenchRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"expected columns {','.join(CSV_COLUMNS)}")
    return [BenchRow(r["mode"], int(r["threads"]), float(r["throughput_cycles_per_sec"]), float(r["speedup"]))
            for r in reader]


def format_table(rows) -> str:
    width = max(len(r.label) for r in rows)
    lines = [f"{'configuration':<{width}}  {'cycles/s':>14}  speedup"]
    for r in rows:
        lines.append(f"{r.label:<{width}}  {r.throughput:>14.3f}  {r.speedup:.2f}x")
    return "\n".join(lines) + "\n"
