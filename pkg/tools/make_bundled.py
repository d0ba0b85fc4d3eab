"""Regenerate the bundled seed corpora, witness corpora and golden files.

    python3 tools/make_bundled.py [--check]

Seeds are small known-good regression programs. Witness corpora are
hand-written to reach every coverpoint and to trip each design's planted
check. ``golden.tsv`` records the coverage vector of the first periph-fsm
seed. With ``--check`` nothing is written; the script only verifies that the
files on disk match what it would produce.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from simfuzz.corpus import INITIAL, Chromosome, save_corpus
from simfuzz.dut import create_dut, run_stimulus
from simfuzz.dut import periph as P
from simfuzz.dut.toycpu import GRAMMAR, assemble
from simfuzz.grammar import dump_templates, translate

DATA = Path(__file__).resolve().parents[1] / "src" / "simfuzz" / "data"


# ---------------------------------------------------------------- toy-cpu

def _rep(program, n):
    return list(program) * n


TOY_SEEDS = [
    _rep([("LDI", 5), ("ADD", 7), ("SUB", 3), ("LDI", 0x1234), ("XOR", 0x55), ("SHF", 2), ("AND", 0xF0F), "NOP"], 6),
    [x for a in range(4) for x in [("LDI", a + 1), ("ST", a), ("LD", a), "NOP"]] * 3,
    _rep([("LDI", 0), ("BZ", 0), "NOP", ("LDI", 3), ("BNZ", 0), "NOP", ("BZ", 0), "NOP"], 6),
    _rep([("LDI", 7), "PUSH", ("LDI", 8), "PUSH", "POP", "POP", "NOP"], 8),
]


def _toy_witness():
    arith = [
        ("LDI", 0), ("LDI", 0xFFFFFF), ("SHF", 0x28), ("ADD", 0x100),          # carry + zero
        ("LDI", 0x7FFFFF), ("SHF", 0x28), ("ADD", 0x100),                      # negative
        ("LDI", 1), ("SUB", 2), ("LDI", 3), ("SUB", 3), ("SUB", 0),             # borrow, zero
        ("LDI", 0x0F), ("AND", 0xF0), ("LDI", 0x0F), ("AND", 0x0F),             # and zero / nonzero
        ("LDI", 6), ("XOR", 6), ("XOR", 9),                                    # xor zero / nonzero
        ("SHF", 0), ("LDI", 3), ("SHF", 1),                                    # by zero, right + carry
        ("LDI", 1), ("SHF", 0x3F),                                             # left + carry
    ]
    nibbles = [x for v in range(16) for x in [("LDI", v), ("SHF", 0x3C)]]
    memory = [("LD", 3)] + [x for a in range(16) for x in [("LDI", a + 1), ("ST", a)]] + \
        [("LD", a) for a in range(16)] + [("ST", 0)]
    branches = []
    for skip in range(4):
        branches += [("LDI", 0), ("BZ", skip)] + ["NOP"] * (skip + 1)
    branches += [("LDI", 1), ("BZ", 0), ("BNZ", 0), "NOP", ("LDI", 0), ("BNZ", 0),
                 ("LDI", 1), ("SUB", 2), ("BC", 0), "NOP", ("LDI", 0), ("ADD", 1), ("BC", 0)]
    branches += [("LDI", 0), ("BZ", 0), "NOP"] * 4
    stack = [("LDI", 1), ("SUB", 2)] + ["PUSH"] * 8 + ["POP"] * 8 + ["POP"]  # bug, then underflow
    overflow = ["PUSH"] * 9 + ["NOP"]
    ldw = [("LDW", 0x00010002), ("LDW", 0x00000005), ("LDI", 0), ("BZ", 0), ("LDW", 0x00030004), "NOP",
           ("ILL", 0), "NOP"]
    long_run = ["NOP"] * 70
    return [arith, nibbles, memory, branches, stack, overflow, ldw, long_run]


# --------------------------------------------------------------- periph-fsm

def _wait(n=4, sda=0, rx=0):
    return [P.idle(sda, rx)] * n


def _txn_prologue(ctrl=1, presc=4, addr=0x50, read=False):
    return [P.wr(P.CTRL, ctrl), P.wr(P.PRESC, presc), P.wr(P.TXR, (addr << 1) | int(read)),
            P.wr(P.CMD, P.STA)] + _wait(4)


PERIPH_SEEDS = [
    # the controller samples SDA and the slave byte on the cycle a phase completes,
    # which with PRESC=4 is the command cycle itself
    # one-byte register write
    _txn_prologue() + [P.wr(P.TXR, 0x12), P.wr(P.CMD, P.WR)] + _wait(3) + [P.wr(P.CMD, P.STO)] + _wait(3),
    # single-byte read with NACK
    _txn_prologue(read=True) + [P.wr(P.CMD, P.RD | P.ACK, rx=0x5A)] + _wait(3) + [P.rd(P.RXR), P.wr(P.CMD, P.STO)]
    + _wait(3),
    # two-byte read, ACK then NACK
    _txn_prologue(read=True) + [P.wr(P.CMD, P.RD, rx=0x11)] + _wait(2) + [P.rd(P.RXR), P.wr(P.CMD, P.RD | P.ACK, rx=0x22)]
    + _wait(2) + [P.rd(P.RXR), P.wr(P.CMD, P.STO)] + _wait(3),
    # register poke and readback
    [P.wr(6, 0x1), P.rd(6), P.rd(P.STATUS), P.wr(P.CTRL, 1), P.rd(P.CTRL)],
]


def _periph_witness():
    progs = []
    regs = [P.wr(a, a + 1) for a in range(16)] + [P.rd(a) for a in range(16)]
    progs.append(regs)
    # disabled command, start without clock, no-start command
    progs.append([P.wr(P.CMD, P.STA), P.wr(P.CTRL, 1), P.wr(P.CMD, P.STA), P.wr(P.CMD, P.WR),
                  P.wr(P.CMD, P.IACK)])
    # every prescaler tick count and address bucket, address NACK, busy writes
    for b in range(8):
        presc = 4 + (b % 4)
        progs.append([P.wr(P.CTRL, 1), P.wr(P.PRESC, presc), P.wr(P.TXR, b << 5), P.wr(P.CMD, P.STA),
                      P.wr(P.TXR, b << 5), P.rd(P.STATUS), P.wr(P.PRESC, presc)] + _wait(6, sda=1))
    # write burst of 8 with all data classes, data NACK, irq raised, iack, stop with IF pending
    burst = _txn_prologue(ctrl=3)
    for i, v in enumerate([0x00, 0xFF, 0x12, 0x34, 0x56, 0x78, 0x9A, 0xBC]):
        burst += [P.wr(P.CMD, P.IACK), P.wr(P.TXR, v), P.wr(P.CMD, P.WR)] + _wait(1)
    burst += [P.wr(P.TXR, 1), P.wr(P.CMD, P.WR, sda=1)] + _wait(3) + [P.wr(P.CMD, P.STO)] + _wait(3)
    progs.append(burst)
    # read burst of 8 with data classes, overrun, master ack/nack, fresh/stale RXR
    rb = _txn_prologue(read=True)
    for i, v in enumerate([0x00, 0xFF, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88]):
        rb += [P.wr(P.CMD, P.RD | (P.ACK if i == 7 else 0), rx=v)] + _wait(3)
        if i % 2 == 0:
            rb += [P.rd(P.RXR)]
    rb += [P.rd(P.RXR), P.rd(P.RXR), P.wr(P.CMD, P.STO)] + _wait(3)
    progs.append(rb)
    # mixed direction via restarts: write -> read -> write -> same
    mixed = _txn_prologue() + [P.wr(P.TXR, 0x7), P.wr(P.CMD, P.WR)] + _wait(3)
    mixed += [P.wr(P.TXR, 0xA1), P.wr(P.CMD, P.STA)] + _wait(4)
    mixed += [P.wr(P.CMD, P.RD)] + _wait(3, rx=1)
    mixed += [P.wr(P.TXR, 0xA0), P.wr(P.CMD, P.STA)] + _wait(4)
    mixed += [P.wr(P.TXR, 0xA0), P.wr(P.CMD, P.STA)] + _wait(4)
    mixed += [P.wr(P.CMD, P.STO)] + _wait(3)
    progs.append(mixed)
    # errors: write while reading, read while writing, ignored command, recovery, disable in hold
    err = _txn_prologue(read=True) + [P.wr(P.CMD, P.WR), P.wr(P.CMD, P.RD), P.wr(P.CMD, P.STO)] + _wait(3)
    err += _txn_prologue() + [P.wr(P.CMD, P.RD), P.wr(P.CTRL, 0)]
    err += _txn_prologue() + [P.wr(P.CTRL, 0)]
    progs.append(err)
    # abort while busy and arbitration loss
    progs.append([P.wr(P.CTRL, 1), P.wr(P.PRESC, 7), P.wr(P.CMD, P.STA), P.wr(P.CTRL, 0),
                  P.wr(P.CTRL, 1), P.wr(P.CMD, P.STA), P.wr(P.CMD, P.STA)] + _wait(6))
    # planted bug: PRESC rewrite while holding after three read bytes
    bug = _txn_prologue(read=True)
    for v in (1, 2, 3):
        bug += [P.wr(P.CMD, P.RD)] + _wait(3, rx=v) + [P.rd(P.RXR)]
    bug += [P.wr(P.PRESC, 4), P.wr(P.CMD, P.STO)] + _wait(3)
    progs.append(bug)
    return progs


# -------------------------------------------------------------- synth-delay

SYNTH_SEEDS = [bytes(range(0, 100)), bytes([0x5A, 0x00] * 50)]


def _synth_witness():
    return [bytes(range(256)), bytes([0x5A, 0xC3, 0x99, 0x3C])]


# ------------------------------------------------------------------ build

def _chromosomes(datas):
    return [Chromosome(d, INITIAL, i) for i, d in enumerate(datas)]


def corpora():
    """Map of (design, kind) -> list of chromosome bytes."""
    return {
        ("toy-cpu", "seeds"): [assemble(p) for p in TOY_SEEDS],
        ("toy-cpu", "witness"): [assemble(p) for p in _toy_witness()],
        ("periph-fsm", "seeds"): [P.encode(p) for p in PERIPH_SEEDS],
        ("periph-fsm", "witness"): [P.encode(p) for p in _periph_witness()],
        ("synth-delay", "seeds"): SYNTH_SEEDS,
        ("synth-delay", "witness"): _synth_witness(),
    }


def witness_status(name, datas):
    dut = create_dut(name)
    desc = dut.descriptor
    covered = np.zeros(desc.coverpoint_count, dtype=bool)
    failed = False
    for data in datas:
        result = run_stimulus(dut, translate(data, desc.input_width_bits, desc.grammar))
        covered |= result.coverage > 0
        failed |= not result.check.passed
    names = dut.names()
    return covered, failed, [names[i] for i in np.flatnonzero(~covered)]


def golden_text():
    dut = create_dut("periph-fsm")
    data = P.encode(PERIPH_SEEDS[0])
    cov = run_stimulus(dut, translate(data, 64)).coverage
    return "".join(f"{i}\t{int(v)}\n" for i, v in enumerate(cov))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--check", action="store_true", help="verify instead of writing")
    args = ap.parse_args(argv)
    ok = True
    for (name, kind), datas in corpora().items():
        if kind == "witness":
            covered, failed, missing = witness_status(name, datas)
            if missing or not failed:
                print(f"{name} witness incomplete: missing={missing} bug_triggered={failed}")
                ok = False
        target = DATA / name / kind
        if args.check:
            on_disk = sorted(target.glob("seed-*.bin"), key=lambda p: int(p.stem.split("-")[1]))
            if [p.read_bytes() for p in on_disk] != datas:
                print(f"{target} is stale")
                ok = False
        else:
            for old in target.glob("seed-*.bin"):
                old.unlink()
            save_corpus(_chromosomes(datas), target)
    files = {DATA / "toy-cpu" / "templates.txt": dump_templates(GRAMMAR),
             DATA / "periph-fsm" / "golden.tsv": golden_text()}
    for path, text in files.items():
        if args.check:
            if not path.exists() or path.read_text(encoding="utf-8") != text:
                print(f"{path} is stale")
                ok = False
        else:
            path.write_text(text, encoding="utf-8")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
