"""Havoc and splice over byte chromosomes, and batch input generation.

Only two operators exist. Havoc stacks ``2**k`` value edits (``k`` uniform in
``[0, max_stack_exp]``) without changing the length; splice joins a prefix of
one seed to a suffix of another and is the only way lengths change.

Every generated chromosome draws from its own stream keyed by
``(master_seed, iteration, slot)``, so a batch is the same no matter which
thread later simulates it.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels, rng as rngmod
from .corpus import HAVOC, INITIAL, RANDOM, SPLICE, Chromosome, CorpusState, select
from .errors import ContractViolation

FLIP = "flip"
SET = "set"
ARITH = "arith"
_KIND_CODES = {FLIP: 0, SET: 1, ARITH: 2}


@dataclass(frozen=True)
class HavocParams:
    max_stack_exp: int = 6
    kinds: tuple = (FLIP, SET, ARITH)

    def __post_init__(self):
        if self.max_stack_exp < 0:
            raise ContractViolation("max_stack_exp must be >= 0")
        if not self.kinds:
            raise ContractViolation("at least one havoc edit kind must be enabled")
        unknown = set(self.kinds) - set(_KIND_CODES)
        if unknown:
            raise ContractViolation(f"unknown havoc edit kinds: {sorted(unknown)}")


@dataclass(frozen=True)
class MutationParams:
    havoc: HavocParams = HavocParams()
    p_splice: float = 0.25
    max_chromosome_bytes: int = 512

    def __post_init__(self):
        if not 0.0 <= self.p_splice <= 1.0:
            raise ContractViolation(f"p_splice must be in [0, 1], got {self.p_splice}")
        if self.max_chromosome_bytes < 1:
            raise ContractViolation("max_chromosome_bytes must be >= 1")


@dataclass(frozen=True)
class HavocPlan:
    kinds: np.ndarray
    positions: np.ndarray
    rnd: np.ndarray


@functools.lru_cache(maxsize=None)
def _kind_codes(kinds: tuple) -> np.ndarray:
    return np.array([_KIND_CODES[kind] for kind in kinds], dtype=np.int64)


def draw_havoc_plan(length: int, params: HavocParams, rng: np.random.Generator) -> HavocPlan:
    """Draw the stacked edit list for a ``length``-byte input."""
    k = int(rng.integers(0, params.max_stack_exp + 1))
    n = 1 << k
    codes = _kind_codes(params.kinds)
    kinds = codes[rng.integers(0, len(codes), n)]
    positions = rng.integers(0, length, n).astype(np.int64)
    rnd = rng.integers(0, 1 << 32, n, dtype=np.uint64).astype(np.uint32)
    return HavocPlan(kinds, positions, rnd)


def havoc(data: bytes, params: HavocParams = HavocParams(), rng: np.random.Generator | None = None) -> bytes:
    """Length-preserving stacked byte edits; empty input is returned as is."""
    if not data:
        return b""
    if rng is None:
        raise ContractViolation("havoc needs a random stream")
    plan = draw_havoc_plan(len(data), params, rng)
    buf = bytearray(data)
    kernels.default().havoc_apply(buf, plan.kinds, plan.positions, plan.rnd)
    return bytes(buf)


def splice(a: bytes, b: bytes, rng: np.random.Generator, max_bytes: int | None = None) -> bytes:
    """``a[:i] + b[j:]`` for uniform cuts ``i`` and ``j``, truncated to ``max_bytes``."""
    i = int(rng.integers(0, len(a) + 1))
    j = int(rng.integers(0, len(b) + 1))
    out = a[:i] + b[j:]
    if max_bytes is not None:
        out = out[:max_bytes]
    return out


def mutate_one(corpus: CorpusState, params: MutationParams, rng: np.random.Generator,
               cid: int, table=None) -> Chromosome:
    first = select(corpus, rng, table).chromosome
    if rng.random() < params.p_splice:
        second = select(corpus, rng, table).chromosome
        data = splice(first.data, second.data, rng, params.max_chromosome_bytes)
        return Chromosome(data, SPLICE, cid, (first.id, second.id))
    data = havoc(first.data[:params.max_chromosome_bytes], params.havoc, rng)
    return Chromosome(data, HAVOC, cid, (first.id,))


def get_inputs(corpus: CorpusState, n: int, params: MutationParams,
               rng: np.random.Generator | Callable[[int], np.random.Generator],
               first_id: int = 0, emitted=frozenset()) -> list[Chromosome]:
    """Produce ``n`` chromosomes from ``corpus``.

    Unexecuted initial seeds not in ``emitted`` come first, unmutated, in load
    order. Remaining slots select and mutate. ``rng`` is either one generator
    used for every slot or a callable mapping a slot index to its stream.
    Ids are assigned ``first_id``, ``first_id + 1``, ... to mutated outputs.
    """
    if n < 1:
        raise ContractViolation(f"n must be >= 1, got {n}")
    if not len(corpus):
        raise ContractViolation("cannot generate inputs from an empty corpus")
    out = [c for c in corpus.pending_initial() if c.id not in emitted][:n]
    table = corpus.select_table()
    cid = first_id
    for slot in range(len(out), n):
        stream = rng(slot) if callable(rng) else rng
        out.append(mutate_one(corpus, params, stream, cid, table))
        cid += 1
    return out


class InputGenerator:
    """Stateful wrapper that numbers chromosomes and keys the streams."""

    def __init__(self, params: MutationParams, master_seed: int, next_id: int = 0):
        self.params = params
        self.master_seed = master_seed
        self.next_id = next_id
        self.emitted: set[int] = set()

    def get_inputs(self, corpus: CorpusState, n: int, iteration: int) -> list[Chromosome]:
        batch = get_inputs(corpus, n, self.params,
                           lambda slot: rngmod.stream(self.master_seed, rngmod.MUTATE, iteration, slot),
                           self.next_id, self.emitted)
        for c in batch:
            if c.origin == INITIAL:
                self.emitted.add(c.id)
            else:
                self.next_id = max(self.next_id, c.id + 1)
        return batch


class RandomGenerator:
    """Baseline: fresh uniform-random chromosomes instead of mutations.

    Initial seeds still run first, unmutated, so both generators start from
    the same coverage. Lengths are uniform in ``[1, max_chromosome_bytes]``.
    """

    def __init__(self, params: MutationParams, master_seed: int, next_id: int = 0):
        self.params = params
        self.master_seed = master_seed
        self.next_id = next_id
        self.emitted: set[int] = set()

    def get_inputs(self, corpus: CorpusState, n: int, iteration: int) -> list[Chromosome]:
        out = [c for c in corpus.pending_initial() if c.id not in self.emitted][:n]
        self.emitted.update(c.id for c in out)
        for slot in range(len(out), n):
            r = rngmod.stream(self.master_seed, rngmod.RANDOM_BASELINE, iteration, slot)
            length = int(r.integers(1, self.params.max_chromosome_bytes + 1))
            out.append(Chromosome(r.bytes(length), RANDOM, self.next_id))
            self.next_id += 1
        return out
