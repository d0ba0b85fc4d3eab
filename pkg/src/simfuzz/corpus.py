"""Seed pool, fitness, roulette selection and the corpus update step.

A retained seed's base fitness is the fraction of coverpoints its own run
hit. When it is the only retained seed covering some coverpoint its fitness
is multiplied by ``favor``. Selection is fitness-proportional.

The corpus is append-only. Uniqueness is maintained incrementally through a
per-coverpoint owner table, and :func:`brute_force_fitness` recomputes
everything from scratch for checking.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .coverage import CumulativeCoverage, observe, run_rate
from .errors import ContractViolation, CorpusError, CorpusFullError, NoSeedsError

INITIAL = "initial-seed"
HAVOC = "havoc"
SPLICE = "splice"
RANDOM = "random"
ORIGINS = (INITIAL, HAVOC, SPLICE, RANDOM)

MANIFEST = "manifest.txt"
SEED_FILE = re.compile(r"^seed-(\d+)\.bin$")


@dataclass(frozen=True)
class Chromosome:
    data: bytes
    origin: str
    id: int
    parent_ids: tuple = ()

    def __len__(self):
        return len(self.data)


@dataclass(frozen=True)
class FitnessParams:
    favor: float = 4.0
    epsilon_fitness: float = 1e-6

    def __post_init__(self):
        if not self.favor > 1:
            raise ContractViolation(f"favor must be > 1, got {self.favor}")
        if not self.epsilon_fitness > 0:
            raise ContractViolation(f"epsilon_fitness must be > 0, got {self.epsilon_fitness}")


@dataclass
class Seed:
    chromosome: Chromosome
    run_coverage: np.ndarray | None
    base_fitness: float
    effective_fitness: float
    covered: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), repr=False)

    @property
    def executed(self) -> bool:
        return self.run_coverage is not None


@dataclass
class UpdateSummary:
    retained: int = 0
    new_points: int = 0
    retained_ids: list = field(default_factory=list)


def compute_fitness(seed_run, uniquely_covers: bool, params: FitnessParams = FitnessParams()) -> float:
    """``max(rate, epsilon) * (favor if uniquely_covers else 1)``."""
    rate = run_rate(seed_run)
    value = max(rate, params.epsilon_fitness)
    return value * params.favor if uniquely_covers else value


class CorpusState:
    """The seed list plus cumulative coverage, owned by one coordinator thread."""

    def __init__(self, coverpoints: int, params: FitnessParams = FitnessParams(), max_size: int = 100_000):
        self.params = params
        self.max_size = max_size
        self.seeds: list[Seed] = []
        self.cumulative = CumulativeCoverage(coverpoints)
        self.stagnation_counter = 0
        # owner[p] is the index of the sole covering seed when count == 1
        self._owner = np.full(coverpoints, -1, dtype=np.int64)
        self._unique_points: list[int] = []
        self._fitness = np.zeros(16, dtype=np.float64)
        self._cumsum: np.ndarray | None = None
        self._pending_initial: dict[int, int] = {}
        self.skipped: list = []

    def __len__(self):
        return len(self.seeds)

    @property
    def coverpoints(self) -> int:
        return self.cumulative.size

    def fitness(self) -> np.ndarray:
        return self._fitness[:len(self.seeds)].copy()

    def uniquely_covers(self, index: int) -> bool:
        return self._unique_points[index] > 0

    def pending_initial(self) -> list[Chromosome]:
        """Initial seeds not yet executed, in load order."""
        return [self.seeds[i].chromosome for i in sorted(self._pending_initial.values())]

    def find(self, chromosome_id: int) -> Seed | None:
        for seed in self.seeds:
            if seed.chromosome.id == chromosome_id:
                return seed
        return None

    # -- mutation helpers ------------------------------------------------
    def _append(self, seed: Seed) -> int:
        if len(self.seeds) >= self.max_size:
            raise CorpusFullError(f"corpus reached max_corpus_size={self.max_size}")
        idx = len(self.seeds)
        self.seeds.append(seed)
        self._unique_points.append(0)
        if idx >= len(self._fitness):
            grown = np.zeros(2 * len(self._fitness), dtype=np.float64)
            grown[:idx] = self._fitness[:idx]
            self._fitness = grown
        self._fitness[idx] = seed.effective_fitness
        self._cumsum = None
        return idx

    def _refresh(self, idx: int) -> None:
        seed = self.seeds[idx]
        value = max(seed.base_fitness, self.params.epsilon_fitness)
        if self._unique_points[idx] > 0:
            value *= self.params.favor
        seed.effective_fitness = value
        self._fitness[idx] = value
        self._cumsum = None

    def _credit(self, idx: int, run) -> None:
        """Record that seed ``idx`` covers the nonzero points of ``run``."""
        seed = self.seeds[idx]
        run = np.asarray(run)
        covered = np.flatnonzero(run)
        seed.run_coverage = run
        seed.covered = covered
        seed.base_fitness = len(covered) / len(run)
        counts = self.cumulative.covering_seed_counts
        touched = {idx}
        for p in covered.tolist():
            counts[p] += 1
            if counts[p] == 1:
                self._owner[p] = idx
                self._unique_points[idx] += 1
            elif counts[p] == 2:
                prev = int(self._owner[p])
                self._owner[p] = -1
                self._unique_points[prev] -= 1
                touched.add(prev)
        for i in touched:
            self._refresh(i)

    # -- public ----------------------------------------------------------
    def add_initial(self, chromosome: Chromosome) -> None:
        """Queue an unexecuted initial seed (selectable at epsilon fitness)."""
        eps = self.params.epsilon_fitness
        idx = self._append(Seed(chromosome, None, 0.0, eps))
        self._pending_initial[chromosome.id] = idx

    def add_executed(self, chromosome: Chromosome, run) -> None:
        """Append an already-run seed unconditionally (corpus reload)."""
        observe(self.cumulative, run)
        idx = self._append(Seed(chromosome, None, 0.0, self.params.epsilon_fitness))
        self._credit(idx, run)

    def select_table(self) -> np.ndarray:
        if not self.seeds:
            raise ContractViolation("cannot select from an empty corpus")
        if self._cumsum is None:
            self._cumsum = np.cumsum(self._fitness[:len(self.seeds)])
        return self._cumsum


def select(corpus: CorpusState, rng: np.random.Generator, table: np.ndarray | None = None) -> Seed:
    """Roulette-wheel choice: P(seed) = effective_fitness / total."""
    cumsum = corpus.select_table() if table is None else table
    r = rng.random() * cumsum[-1]
    idx = int(np.searchsorted(cumsum, r, side="right"))
    return corpus.seeds[min(idx, len(corpus.seeds) - 1)]


def update_seed_corpus(corpus: CorpusState, batch: Iterable[tuple[Chromosome, object]]) -> UpdateSummary:
    """Merge one iteration's results in worker-index order.

    Initial seeds are always kept: their first result fills in their coverage
    in place. Any other run is retained iff it revealed a new coverpoint.
    """
    batch = list(batch)
    for _, run in batch:
        if len(run) != corpus.coverpoints:
            raise ContractViolation(
                f"coverage length mismatch: run has {len(run)} coverpoints, "
                f"cumulative has {corpus.coverpoints}"
            )
    summary = UpdateSummary()
    for chromosome, run in batch:
        new = observe(corpus.cumulative, run)
        summary.new_points += len(new)
        pending = corpus._pending_initial.pop(chromosome.id, None) if chromosome.origin == INITIAL else None
        if pending is not None:
            corpus._credit(pending, run)
        elif new:
            idx = corpus._append(Seed(chromosome, None, 0.0, corpus.params.epsilon_fitness))
            corpus._credit(idx, run)
            summary.retained += 1
            summary.retained_ids.append(chromosome.id)
    if summary.new_points:
        corpus.stagnation_counter = 0
    else:
        corpus.stagnation_counter += 1
    return summary


def brute_force_fitness(corpus: CorpusState) -> np.ndarray:
    """Recompute every effective fitness from the seeds alone."""
    n, m = len(corpus.seeds), corpus.coverpoints
    hits = np.zeros((n, m), dtype=bool)
    for i, seed in enumerate(corpus.seeds):
        if seed.executed:
            hits[i] = np.asarray(seed.run_coverage) > 0
    unique_cols = hits.sum(axis=0) == 1
    out = np.empty(n)
    for i, seed in enumerate(corpus.seeds):
        if seed.executed:
            out[i] = compute_fitness(seed.run_coverage, bool((hits[i] & unique_cols).any()), corpus.params)
        else:
            out[i] = corpus.params.epsilon_fitness
    return out


# -- persistence -------------------------------------------------------------

def save_corpus(corpus_or_chromosomes, directory: str | Path) -> int:
    """Write ``seed-<id>.bin`` files plus ``manifest.txt``; returns the count."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = corpus_or_chromosomes
    if isinstance(items, CorpusState):
        items = [s.chromosome for s in items.seeds]
    lines = []
    for chrom in items:
        (directory / f"seed-{chrom.id}.bin").write_bytes(chrom.data)
        lines.append(f"{chrom.id}\t{len(chrom.data)}\n")
    (directory / MANIFEST).write_text("".join(lines), encoding="utf-8")
    return len(lines)


@dataclass
class LoadResult:
    chromosomes: list
    skipped: list = field(default_factory=list)


def load_chromosomes(directory: str | Path, max_chromosome_bytes: int | None = None) -> LoadResult:
    """Read a seeds directory.

    With a manifest, its order and ids are authoritative. Without one every
    regular file is a seed, in name order; ``seed-<id>.bin`` names keep their
    id and other names are numbered after the largest id seen. Oversized
    files are skipped with a warning.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError("seeds directory not found", directory)
    manifest = directory / MANIFEST
    entries: list[tuple[int, Path]] = []
    if manifest.exists():
        for lineno, line in enumerate(_read_text(manifest).splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            try:
                sid, length = int(parts[0]), int(parts[1])
            except (IndexError, ValueError):
                raise CorpusError(f"corrupt manifest line {lineno}", manifest) from None
            path = directory / f"seed-{sid}.bin"
            if not path.is_file():
                raise CorpusError("manifest names a missing seed file", path)
            if path.stat().st_size != length:
                raise CorpusError(f"length mismatch with manifest ({length} bytes listed)", path)
            entries.append((sid, path))
    else:
        files = sorted(p for p in directory.iterdir() if p.is_file() and not p.name.startswith("."))
        named = {p: int(m.group(1)) for p in files if (m := SEED_FILE.match(p.name))}
        next_id = max(named.values(), default=-1) + 1
        for p in files:
            if p in named:
                entries.append((named[p], p))
            else:
                entries.append((next_id, p))
                next_id += 1
    if not entries:
        raise NoSeedsError("no seeds found", directory)
    result = LoadResult([])
    seen = set()
    for sid, path in entries:
        if sid in seen:
            raise CorpusError(f"duplicate seed id {sid}", path)
        seen.add(sid)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise CorpusError(f"unreadable seed ({exc.strerror})", path) from None
        if max_chromosome_bytes is not None and len(data) > max_chromosome_bytes:
            warnings.warn(f"skipping {path}: {len(data)} bytes exceeds max_chromosome_bytes={max_chromosome_bytes}",
                          stacklevel=2)
            result.skipped.append(path)
            continue
        result.chromosomes.append(Chromosome(data, INITIAL, sid))
    if not result.chromosomes:
        raise NoSeedsError("no usable seeds found", directory)
    return result


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CorpusError(f"unreadable file ({exc})", path) from None


def load_corpus(directory, dut, max_chromosome_bytes: int | None = None,
                params: FitnessParams = FitnessParams(), max_size: int = 100_000) -> CorpusState:
    """Load chromosomes and rebuild their coverage by re-running each one."""
    from .dut import run_stimulus
    from .grammar import translate

    loaded = load_chromosomes(directory, max_chromosome_bytes)
    desc = dut.descriptor
    corpus = CorpusState(desc.coverpoint_count, params, max_size)
    for chrom in loaded.chromosomes:
        result = run_stimulus(dut, translate(chrom.data, desc.input_width_bits, desc.grammar, chrom.id))
        corpus.add_executed(chrom, result.coverage)
    corpus.skipped = loaded.skipped
    return corpus


def chromosome_ids(seeds: Sequence[Seed]) -> list[int]:
    return [s.chromosome.id for s in seeds]
