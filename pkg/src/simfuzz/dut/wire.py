"""Framed stdin/stdout protocol for out-of-process simulators.

Every frame, in both directions, is ``tag: u8, length: u32, body``; all
integers are little-endian. Requests and their reply bodies:

=======  ===  ==========================================  =====================================
name     tag  request body                                reply body
=======  ===  ==========================================  =====================================
HELLO    1    (empty)                                     u32 width, u32 coverpoints,
                                                          u8 grammar (0 raw, 1 transaction),
                                                          u16 name length, name (utf-8)
RESET    2    (empty)                                     (empty)
STEP     3    u32 count, count * ceil(width/8) bytes      (empty)
GETCOV   4    (empty)                                     u32 count, count * u32 hits
CHECK    5    (empty)                                     u8 (1 pass, 0 fail)
BYE      6    (empty)                                     (empty); the child then exits
=======  ===  ==========================================  =====================================

A reply carries the request's tag. A child that cannot serve a request
replies with tag ``0xFF`` and a utf-8 message body.
"""

from __future__ import annotations

import os
import select
import struct
import subprocess
import sys

import numpy as np

from ..coverage import COUNTER_DTYPE
from ..errors import ConfigError, SubprocessDutError
from ..grammar import RAW, RAW_BITS, TRANSACTION, GrammarMode, bytes_per_cycle
from .base import CheckResult, Dut, DutDescriptor, PASS

HELLO, RESET, STEP, GETCOV, CHECK, BYE = 1, 2, 3, 4, 5, 6
ERROR = 0xFF
HEADER = struct.Struct("<BI")
GRAMMAR_CODES = {RAW_BITS: 0, TRANSACTION: 1}


def pack_frame(tag: int, body: bytes = b"") -> bytes:
    return HEADER.pack(tag, len(body)) + body


def pack_hello(desc: DutDescriptor) -> bytes:
    name = desc.name.encode("utf-8")
    return struct.pack("<IIBH", desc.input_width_bits, desc.coverpoint_count,
                       GRAMMAR_CODES[desc.grammar.kind], len(name)) + name


def unpack_hello(body: bytes) -> tuple[str, int, int, str]:
    width, count, gcode, nlen = struct.unpack_from("<IIBH", body)
    name = body[11:11 + nlen].decode("utf-8")
    kinds = {v: k for k, v in GRAMMAR_CODES.items()}
    if gcode not in kinds:
        raise SubprocessDutError(f"HELLO carries unknown grammar code {gcode}")
    return name, width, count, kinds[gcode]


def pack_step(words, width: int) -> bytes:
    nb = bytes_per_cycle(width)
    if width <= 64 and isinstance(words, np.ndarray) and words.dtype == np.uint64:
        raw = words.astype("<u8").tobytes()
        if nb < 8:
            raw = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 8)[:, :nb].tobytes()
        payload = raw
    else:
        payload = b"".join(int(w).to_bytes(nb, "little") for w in words)
    return struct.pack("<I", len(words)) + payload


def unpack_step(body: bytes, width: int) -> np.ndarray:
    (count,) = struct.unpack_from("<I", body)
    nb = bytes_per_cycle(width)
    payload = body[4:]
    if len(payload) != count * nb:
        raise SubprocessDutError(f"STEP payload is {len(payload)} bytes, expected {count * nb}")
    if width > 64:
        out = np.empty(count, dtype=object)
        out[:] = [int.from_bytes(payload[i * nb:(i + 1) * nb], "little") for i in range(count)]
        return out
    padded = np.zeros((count, 8), dtype=np.uint8)
    padded[:, :nb] = np.frombuffer(payload, dtype=np.uint8).reshape(count, nb)
    return padded.view("<u8").reshape(count).astype(np.uint64)


def pack_coverage(hits) -> bytes:
    hits = np.asarray(hits, dtype="<u4")
    return struct.pack("<I", len(hits)) + hits.tobytes()


def unpack_coverage(body: bytes) -> np.ndarray:
    (count,) = struct.unpack_from("<I", body)
    if len(body) != 4 + 4 * count:
        raise SubprocessDutError(f"GETCOV body is {len(body)} bytes, expected {4 + 4 * count}")
    return np.frombuffer(body, dtype="<u4", offset=4, count=count).astype(COUNTER_DTYPE)


class SubprocessDut(Dut):
    """Client side: drives a child process speaking the framed protocol."""

    def __init__(self, argv, grammar: GrammarMode | None = None, timeout: float = 30.0, names=None):
        self.argv = list(argv)
        self.timeout = timeout
        try:
            self.proc = subprocess.Popen(self.argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)
        except OSError as exc:
            raise SubprocessDutError(f"cannot start simulator {self.argv!r}: {exc}") from exc
        name, width, count, kind = unpack_hello(self._call(HELLO))
        if kind == TRANSACTION:
            if grammar is None or grammar.kind != TRANSACTION:
                self.close()
                raise ConfigError(f"{name} expects a transaction grammar; supply a template table")
        else:
            grammar = RAW
        self.descriptor = DutDescriptor(name, width, count, grammar)
        if names is not None:
            self.coverpoint_names = tuple(names)

    def _read_exact(self, n: int) -> bytes:
        fd = self.proc.stdout.fileno()
        chunks, got = [], 0
        while got < n:
            ready, _, _ = select.select([fd], [], [], self.timeout)
            if not ready:
                raise SubprocessDutError(f"simulator timed out after {self.timeout}s")
            chunk = os.read(fd, n - got)
            if not chunk:
                raise SubprocessDutError(f"simulator closed its output (exit code {self.proc.poll()})")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def _call(self, tag: int, body: bytes = b"") -> bytes:
        try:
            self.proc.stdin.write(pack_frame(tag, body))
        except (BrokenPipeError, ValueError, OSError) as exc:
            raise SubprocessDutError(f"broken pipe to simulator: {exc}") from exc
        rtag, length = HEADER.unpack(self._read_exact(HEADER.size))
        reply = self._read_exact(length) if length else b""
        if rtag == ERROR:
            raise SubprocessDutError(f"simulator error: {reply.decode('utf-8', 'replace')}")
        if rtag != tag:
            raise SubprocessDutError(f"reply tag {rtag} does not answer request tag {tag}")
        return reply

    def reset(self):
        self._call(RESET)

    def step(self, word):
        self._call(STEP, pack_step([int(word)], self.descriptor.input_width_bits))

    def run_cycles(self, cycles):
        self._call(STEP, pack_step(cycles, self.descriptor.input_width_bits))
        return len(cycles)

    def read_coverage(self):
        return unpack_coverage(self._call(GETCOV))

    def check(self):
        (ok,) = self._call(CHECK)
        return PASS if ok else CheckResult(False, f"{self.descriptor.name}: external check failed")

    def close(self):
        if self.proc.poll() is None:
            try:
                self._call(BYE)
            except SubprocessDutError:
                pass
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()
        for stream in (self.proc.stdin, self.proc.stdout):
            if stream is not None:
                stream.close()


def serve(dut: Dut, inp=None, out=None) -> int:
    """Server side: answer frames on ``inp``/``out`` until BYE or EOF."""
    inp = inp if inp is not None else sys.stdin.buffer
    out = out if out is not None else sys.stdout.buffer
    width = dut.descriptor.input_width_bits

    def read_exact(n):
        buf = b""
        while len(buf) < n:
            chunk = inp.read(n - len(buf))
            if not chunk:
                return None
            buf += chunk
        return buf

    while True:
        header = read_exact(HEADER.size)
        if header is None:
            return 0
        tag, length = HEADER.unpack(header)
        body = read_exact(length) if length else b""
        try:
            if tag == HELLO:
                reply = pack_hello(dut.descriptor)
            elif tag == RESET:
                dut.reset()
                reply = b""
            elif tag == STEP:
                dut.run_cycles(unpack_step(body, width))
                reply = b""
            elif tag == GETCOV:
                reply = pack_coverage(dut.read_coverage())
            elif tag == CHECK:
                reply = bytes([1 if dut.check().passed else 0])
            elif tag == BYE:
                out.write(pack_frame(BYE))
                out.flush()
                return 0
            else:
                raise SubprocessDutError(f"unknown request tag {tag}")
        except Exception as exc:  # reported to the client, never fatal here
            out.write(pack_frame(ERROR, str(exc).encode("utf-8")))
        else:
            out.write(pack_frame(tag, reply))
        out.flush()
