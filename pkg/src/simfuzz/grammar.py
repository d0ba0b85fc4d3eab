"""Byte chromosome to per-cycle stimulus translation.

Translation is total: any byte string yields a valid stimulus, which is what
lets the mutators work on untyped bytes.

raw-bits
    Each cycle consumes ``ceil(width / 8)`` bytes, packed little-endian; bits
    above ``width`` are dropped and a short final group is zero padded.

transaction
    The first byte, modulo the table size, picks a template. The template's
    payload bytes follow (zero padded when the chromosome runs out). The
    payload is split into one equal little-endian chunk per template cycle and
    each cycle word is ``template_index | chunk << 8``, masked to ``width``.

Both modes are a deliberately minimal design. Protocol-aware stimulus
generation belongs in user-supplied template tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, ContractViolation

RAW_BITS = "raw-bits"
TRANSACTION = "transaction"
OPCODE_BITS = 8


@dataclass(frozen=True)
class Template:
    index: int
    name: str
    payload_bytes: int
    cycles: int = 1

    def __post_init__(self):
        if self.payload_bytes < 0 or self.cycles < 1:
            raise ConfigError(f"bad template {self.name!r}: payload >= 0 and cycles >= 1 required")

    @property
    def chunk_bytes(self) -> int:
        return -(-self.payload_bytes // self.cycles)


@dataclass(frozen=True)
class GrammarMode:
    kind: str = RAW_BITS
    templates: tuple[Template, ...] = ()
    _payload: np.ndarray = field(default=None, init=False, repr=False, compare=False)
    _cycles: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in (RAW_BITS, TRANSACTION):
            raise ConfigError(f"unknown grammar mode {self.kind!r}")
        if self.kind == TRANSACTION:
            if not self.templates:
                raise ConfigError("transaction grammar needs a non-empty template table")
            if [t.index for t in self.templates] != list(range(len(self.templates))):
                raise ConfigError("template indices must run 0..n-1 in table order")
            object.__setattr__(self, "_payload", np.array([t.payload_bytes for t in self.templates], dtype=np.int64))
            object.__setattr__(self, "_cycles", np.array([t.cycles for t in self.templates], dtype=np.int64))


RAW = GrammarMode(RAW_BITS)


def transaction_grammar(rows) -> GrammarMode:
    """Build a transaction grammar from ``(name, payload_bytes, cycles)`` rows."""
    return GrammarMode(TRANSACTION, tuple(Template(i, *row) for i, row in enumerate(rows)))


def load_templates(path: str | Path) -> GrammarMode:
    """Read ``opcode-index<TAB>name<TAB>payload-bytes<TAB>cycles`` lines."""
    templates = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ConfigError(f"{path}:{lineno}: expected 4 tab-separated fields")
        try:
            templates.append(Template(int(parts[0]), parts[1], int(parts[2]), int(parts[3])))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    templates.sort(key=lambda t: t.index)
    return GrammarMode(TRANSACTION, tuple(templates))


def dump_templates(mode: GrammarMode) -> str:
    return "".join(f"{t.index}\t{t.name}\t{t.payload_bytes}\t{t.cycles}\n" for t in mode.templates)


@dataclass(frozen=True, eq=False)
class Stimulus:
    """Per-cycle input words for one run.

    ``cycles`` is a uint64 array when ``width <= 64`` and an object array of
    Python ints otherwise.
    """

    cycles: np.ndarray
    width: int
    mode: GrammarMode = RAW
    source_chromosome_id: int | None = None

    def __len__(self):
        return len(self.cycles)

    def __eq__(self, other):
        return (
            isinstance(other, Stimulus)
            and self.width == other.width
            and len(self.cycles) == len(other.cycles)
            and all(int(a) == int(b) for a, b in zip(self.cycles, other.cycles))
        )

    def words(self) -> list[int]:
        return [int(w) for w in self.cycles]


def bytes_per_cycle(width: int) -> int:
    return -(-width // 8)


def translate(data: bytes, width: int, mode: GrammarMode = RAW, source_id: int | None = None) -> Stimulus:
    if width < 1:
        raise ContractViolation(f"input width must be >= 1, got {width}")
    data = bytes(data)
    if mode.kind == RAW_BITS:
        cycles = _translate_raw(data, width)
    else:
        cycles = _translate_txn(data, width, mode)
    return Stimulus(cycles, width, mode, source_id)


def _translate_raw(data: bytes, width: int) -> np.ndarray:
    nb = bytes_per_cycle(width)
    n_cycles = -(-len(data) // nb)
    padded = data + bytes(n_cycles * nb - len(data))
    if width > 64:
        mask = (1 << width) - 1
        out = np.empty(n_cycles, dtype=object)
        for c in range(n_cycles):
            out[c] = int.from_bytes(padded[c * nb:(c + 1) * nb], "little") & mask
        return out
    groups = np.frombuffer(padded, dtype=np.uint8).reshape(n_cycles, nb).astype(np.uint64)
    shifts = (np.arange(nb, dtype=np.uint64) * np.uint64(8))
    words = np.bitwise_or.reduce(groups << shifts, axis=1) if nb > 1 else groups[:, 0].copy()
    if width < 64:
        words &= np.uint64((1 << width) - 1)
    return words.astype(np.uint64)


def _translate_txn(data: bytes, width: int, mode: GrammarMode) -> np.ndarray:
    if width <= 64:
        return kernels.default().txn_expand(
            np.frombuffer(data, dtype=np.uint8), mode._payload, mode._cycles, width
        )
    mask = (1 << width) - 1
    words = []
    pos, n, table = 0, len(data), mode.templates
    while pos < n:
        t = table[data[pos] % len(table)]
        payload = data[pos + 1:pos + 1 + t.payload_bytes]
        payload += bytes(t.payload_bytes - len(payload))
        pos += 1 + t.payload_bytes
        chunk = t.chunk_bytes
        for c in range(t.cycles):
            value = int.from_bytes(payload[c * chunk:(c + 1) * chunk], "little")
            words.append((t.index | (value << OPCODE_BITS)) & mask)
    out = np.empty(len(words), dtype=object)
    out[:] = words
    return out


def decode_report(stimulus: Stimulus) -> str:
    """Readable listing: one line per cycle (raw) or per transaction."""
    n = len(stimulus.cycles)
    lines = [f"# stimulus source={stimulus.source_chromosome_id} width={stimulus.width} "
             f"mode={stimulus.mode.kind} cycles={n}"]
    hexdigits = bytes_per_cycle(stimulus.width) * 2
    if stimulus.mode.kind == RAW_BITS:
        for c, word in enumerate(stimulus.cycles):
            lines.append(f"{c:6d}  {int(word):0{hexdigits}x}")
        return "\n".join(lines) + "\n"
    table = stimulus.mode.templates
    c = 0
    while c < n:
        word = int(stimulus.cycles[c])
        t = table[(word & 0xFF) % len(table)]
        span = [int(w) for w in stimulus.cycles[c:c + t.cycles]]
        chunk_bits = 8 * t.chunk_bytes
        payload = 0
        for i, w in enumerate(span):
            payload |= (w >> OPCODE_BITS & ((1 << chunk_bits) - 1)) << (chunk_bits * i)
        if t.payload_bytes:
            lines.append(f"{c:6d}  {t.name} 0x{payload:0{2 * t.payload_bytes}x}")
        else:
            lines.append(f"{c:6d}  {t.name}")
        c += t.cycles
    return "\n".join(lines) + "\n"
