import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simfuzz import kernels, rng
from simfuzz.bench import BenchRow, format_table, from_csv, plan, to_csv


def test_backend_lookup():
    assert kernels.get("python").BACKEND == "python"
    assert kernels.default().BACKEND == kernels.BACKEND
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_env_forces_pure_python():
    env = dict(os.environ, SIMFUZZ_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from simfuzz import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@given(st.binary(min_size=1, max_size=64), st.integers(0, 6), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=200)
def test_havoc_kernels_agree(data, k, seed):
    r = rng.stream(seed, rng.TEST)
    n = 1 << k
    kinds = r.integers(0, 3, n).astype(np.int64)
    pos = r.integers(0, len(data), n).astype(np.int64)
    rnd = r.integers(0, 1 << 32, n, dtype=np.uint64).astype(np.uint32)
    outs = []
    for b in kernels.available():
        buf = bytearray(data)
        kernels.get(b).havoc_apply(buf, kinds, pos, rnd)
        outs.append(bytes(buf))
    assert len(set(outs)) == 1


def test_streams_are_positional():
    a = rng.stream(5, rng.MUTATE, 3, 1).random(4)
    b = rng.stream(5, rng.MUTATE, 3, 1).random(4)
    c = rng.stream(5, rng.MUTATE, 3, 2).random(4)
    d = rng.stream(5, rng.RANDOM_BASELINE, 3, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_bench_plan_and_csv():
    assert plan([1, 4], ["batch"]) == [("serial", 1), ("batch", 1), ("batch", 4)]
    rows = [BenchRow("serial", 1, 100.0), BenchRow("batch", 4, 330.0, 3.3), BenchRow("pipelined", 4, 350.5, 3.505)]
    back = from_csv(to_csv(rows))
    assert [(r.mode, r.threads, r.throughput) for r in back] == [(r.mode, r.threads, r.throughput) for r in rows]
    assert [r.label for r in back] == ["Serial", "4 Thread", "Pipelined 4 Thread"]
    assert "3.50x" in format_table(back) or "3.51x" in format_table(back)
    with pytest.raises(ValueError):
        from_csv("a,b\n1,2\n")
