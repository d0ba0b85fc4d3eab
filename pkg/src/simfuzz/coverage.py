"""Coverage vectors and campaign-wide coverage bookkeeping.

A coverage vector is a flat array of per-coverpoint hit counts read straight
out of the model after a run. Only identity-by-index matters: permuting the
coverpoints consistently changes nothing the fuzzer decides.

This module also carries the report-file collection path (write a
line-oriented text report, parse it back), which exists so the cost of the
direct readout can be compared against the conventional route.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractViolation

COUNTER_DTYPE = np.uint32
TOTAL_DTYPE = np.uint64
TOTAL_MAX = np.iinfo(TOTAL_DTYPE).max

NewCoverageReport = frozenset


def coverage_vector(hits: Iterable[int] | np.ndarray) -> np.ndarray:
    """Freeze ``hits`` into a read-only counter array."""
    vec = np.array(hits, dtype=COUNTER_DTYPE)
    if vec.ndim != 1:
        raise ContractViolation(f"coverage vector must be 1-D, got shape {vec.shape}")
    vec.flags.writeable = False
    return vec


class CumulativeCoverage:
    """Per-coverpoint hit totals plus how many retained seeds cover each point.

    ``hit_totals`` saturate at the uint64 maximum. ``covering_seed_counts`` is
    maintained by the corpus, never by :func:`observe`.
    """

    def __init__(self, size: int):
        if size < 1:
            raise ContractViolation("a design must declare at least one coverpoint")
        self.hit_totals = np.zeros(size, dtype=TOTAL_DTYPE)
        self.covering_seed_counts = np.zeros(size, dtype=np.int64)
        self.covered_count = 0

    @property
    def size(self) -> int:
        return len(self.hit_totals)

    def covered_mask(self) -> np.ndarray:
        return self.hit_totals > 0

    def copy(self) -> "CumulativeCoverage":
        other = CumulativeCoverage(self.size)
        other.hit_totals[:] = self.hit_totals
        other.covering_seed_counts[:] = self.covering_seed_counts
        other.covered_count = self.covered_count
        return other


def _check_length(cumulative: CumulativeCoverage, run) -> None:
    if len(run) != cumulative.size:
        raise ContractViolation(
            f"coverage length mismatch: run has {len(run)} coverpoints, "
            f"cumulative has {cumulative.size}"
        )


def observe(cumulative: CumulativeCoverage, run) -> NewCoverageReport:
    """Fold one run into ``cumulative`` and return the newly covered indices.

    A point is new when its total was zero before this run and the run hit it.
    """
    _check_length(cumulative, run)
    run = np.asarray(run, dtype=TOTAL_DTYPE)
    totals = cumulative.hit_totals
    new = np.flatnonzero((totals == 0) & (run > 0))
    np.minimum(totals, TOTAL_MAX - run, out=totals)
    totals += run
    cumulative.covered_count += len(new)
    return frozenset(new.tolist())


def merge_batch(cumulative: CumulativeCoverage, runs: Sequence) -> list[NewCoverageReport]:
    """Apply :func:`observe` to ``runs`` in order (worker-index order)."""
    for run in runs:
        _check_length(cumulative, run)
    return [observe(cumulative, run) for run in runs]


def coverage_rate(cumulative: CumulativeCoverage) -> float:
    if cumulative.size == 0:
        raise ContractViolation("coverage rate undefined for zero coverpoints")
    return cumulative.covered_count / cumulative.size


def run_rate(run) -> float:
    """Fraction of coverpoints a single run hit."""
    run = np.asarray(run)
    if run.size == 0:
        raise ContractViolation("coverage rate undefined for zero coverpoints")
    return np.count_nonzero(run) / run.size


# -- snapshot export ---------------------------------------------------------

def export_snapshot(cumulative: CumulativeCoverage) -> str:
    lines = [f"coverpoints={cumulative.size} covered={cumulative.covered_count}"]
    for i, (total, seeds) in enumerate(zip(cumulative.hit_totals, cumulative.covering_seed_counts)):
        lines.append(f"{i}\t{int(total)}\t{int(seeds)}")
    return "\n".join(lines) + "\n"


def parse_snapshot(text: str) -> CumulativeCoverage:
    lines = text.splitlines()
    m = re.fullmatch(r"coverpoints=(\d+) covered=(\d+)", lines[0].strip()) if lines else None
    if m is None:
        raise ContractViolation("coverage snapshot is missing its header line")
    cum = CumulativeCoverage(int(m.group(1)))
    for line in lines[1:]:
        if not line.strip():
            continue
        idx, total, seeds = (int(x) for x in line.split("\t"))
        cum.hit_totals[idx] = total
        cum.covering_seed_counts[idx] = seeds
    cum.covered_count = int(np.count_nonzero(cum.hit_totals))
    if cum.covered_count != int(m.group(2)):
        raise ContractViolation("coverage snapshot header disagrees with its rows")
    return cum


# -- report-file collection path ---------------------------------------------
# Mimics a simulator that can only emit a full textual coverage database:
# one record per coverpoint with its source-level description and count.

_REPORT_HEADER = "# SystemC::Coverage-3\n"
_RECORD = re.compile(r"^C '(?P<key>.*)' (?P<count>\d+)$")
_FIELD = re.compile("\x01([a-z]+)\x02([^\x01]*)")


def write_coverage_report(path: str | Path, design: str, names: Sequence[str], hits) -> None:
    parts = [_REPORT_HEADER]
    for i, (name, count) in enumerate(zip(names, hits)):
        key = (
            f"\x01t\x02branch\x01page\x02v_branch/{design}\x01f\x02{design}.v"
            f"\x01l\x02{100 + i}\x01n\x02{i}\x01o\x02{name}\x01h\x02TOP.{design}\x01"
        )
        parts.append(f"C '{key}' {int(count)}\n")
    Path(path).write_text("".join(parts), encoding="utf-8")


def parse_coverage_report(path: str | Path, names: Sequence[str]) -> np.ndarray:
    """Rebuild a coverage vector from a text report, matching records by name."""
    index = {name: i for i, name in enumerate(names)}
    hits = np.zeros(len(names), dtype=COUNTER_DTYPE)
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            m = _RECORD.match(line.rstrip("\n"))
            if m is None:
                continue
            fields = dict(_FIELD.findall(m.group("key")))
            i = index.get(fields.get("o"))
            if i is not None:
                hits[i] = int(m.group("count"))
    return hits
