"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--csv out.csv]

Each row times one hot path on both backends over the same inputs and
checks that the results agree before reporting the ratio.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from simfuzz import kernels, rng
from simfuzz.dut import create_dut, run_stimulus
from simfuzz.grammar import translate
from simfuzz.mutation import HavocParams, draw_havoc_plan


def _stimuli(dut, count, length, seed=0):
    desc = dut.descriptor
    r = rng.stream(seed, rng.TEST, 0, 0)
    return [translate(r.bytes(length), desc.input_width_bits, desc.grammar) for _ in range(count)]


def dut_case(name, count=200, length=256):
    duts = {b: create_dut(name, backend=b) for b in kernels.available()}
    stimuli = _stimuli(next(iter(duts.values())), count, length)

    def make(backend):
        dut = duts[backend]
        return lambda: [run_stimulus(dut, s).coverage for s in stimuli]

    cycles = sum(len(s.cycles) for s in stimuli)
    return f"{name} run_stimulus", f"{cycles} cycles", make


def havoc_case(count=2000, length=256):
    r = rng.stream(1, rng.TEST, 0, 0)
    data = [r.bytes(length) for _ in range(count)]
    plans = [draw_havoc_plan(length, HavocParams(), r) for _ in range(count)]

    def make(backend):
        k = kernels.get(backend)

        def go():
            out = []
            for d, p in zip(data, plans):
                buf = bytearray(d)
                k.havoc_apply(buf, p.kinds, p.positions, p.rnd)
                out.append(bytes(buf))
            return out
        return go

    return "havoc_apply", f"{count} x {length} B", make


def translate_case(count=500, length=512):
    dut = create_dut("toy-cpu")
    desc = dut.descriptor
    r = rng.stream(2, rng.TEST, 0, 0)
    data = [r.bytes(length) for _ in range(count)]
    payload, cycles = desc.grammar._payload, desc.grammar._cycles

    def make(backend):
        k = kernels.get(backend)
        buf = [np.frombuffer(d, dtype=np.uint8) for d in data]
        return lambda: [k.txn_expand(b, payload, cycles, desc.input_width_bits) for b in buf]

    return "txn_expand", f"{count} x {length} B", make


def _same(a, b):
    if isinstance(a, list):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b)
    return a == b


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--csv", help="also write the rows as CSV")
    args = parser.parse_args(argv)

    backends = kernels.available()
    if "cython" not in backends:
        print("compiled kernels are not built; only the Python backend is available", file=sys.stderr)
    cases = [dut_case("toy-cpu"), dut_case("periph-fsm"), dut_case("synth-delay"),
             havoc_case(), translate_case()]
    rows = []
    for name, size, make in cases:
        fns = {b: make(b) for b in backends}
        results = {b: fn() for b, fn in fns.items()}
        ref = results["python"]
        if not all(_same(ref, r) for r in results.values()):
            raise SystemExit(f"{name}: backends disagree")
        times = {b: min(timeit.repeat(fn, number=1, repeat=args.repeat)) for b, fn in fns.items()}
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        rows.append((name, size, times["python"], times.get("cython", float("nan")), speedup))

    print(f"{'kernel':<26} {'size':<16} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, size, tp, tc, sp in rows:
        print(f"{name:<26} {size:<16} {tp:>10.4f} {tc:>10.4f} {sp:>7.1f}x")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kernel", "size", "python_seconds", "cython_seconds", "speedup"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
