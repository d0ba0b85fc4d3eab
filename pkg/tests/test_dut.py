import sys

import numpy as np
import pytest

from simfuzz import kernels, rng
from simfuzz.corpus import load_chromosomes
from simfuzz.dut import (ReportFileCollector, SubprocessDut, bundled_dir, create_dut, list_duts,
                         run_stimulus)
from simfuzz.dut.wire import (GETCOV, HELLO, pack_coverage, pack_frame, pack_step, unpack_coverage,
                              unpack_step)
from simfuzz.errors import ConfigError, ContractViolation, SubprocessDutError
from simfuzz.grammar import translate

SERVE = [sys.executable, "-m", "simfuzz.dut.serve", "--dut"]


def stim_for(dut, data, sid=None):
    d = dut.descriptor
    return translate(data, d.input_width_bits, d.grammar, sid)


def random_stimuli(dut, n, seed=0, max_len=200):
    r = rng.stream(seed, rng.TEST, 1)
    return [stim_for(dut, r.bytes(int(r.integers(0, max_len)))) for _ in range(n)]


@pytest.mark.parametrize("name", list_duts())
def test_zero_cycles_all_zero(name, backend):
    dut = create_dut(name, backend=backend)
    result = run_stimulus(dut, stim_for(dut, b""))
    assert result.cycles == 0
    assert not result.coverage.any()
    assert result.check.passed


@pytest.mark.parametrize("name", list_duts())
def test_deterministic_and_reset(name):
    dut = create_dut(name)
    stims = random_stimuli(dut, 20)
    first = [run_stimulus(dut, s) for s in stims]
    second = [run_stimulus(dut, s) for s in reversed(stims)][::-1]
    for a, b in zip(first, second):
        assert np.array_equal(a.coverage, b.coverage)
        assert a.check == b.check


@pytest.mark.parametrize("name", list_duts())
def test_backends_agree(name):
    duts = [create_dut(name, backend=b) for b in ("python", "cython") if b in kernels.available()]
    if len(duts) < 2:
        pytest.skip("compiled kernels not built")
    for stim in random_stimuli(duts[0], 300, seed=3, max_len=400):
        a, b = (run_stimulus(d, stim) for d in duts)
        assert np.array_equal(a.coverage, b.coverage)
        assert a.check == b.check
        assert np.array_equal(duts[0].state, duts[1].state)


@pytest.mark.parametrize("name", list_duts())
def test_step_matches_run_cycles(name):
    dut = create_dut(name)
    for stim in random_stimuli(dut, 20, seed=4):
        whole = run_stimulus(dut, stim).coverage
        dut.reset()
        for w in stim.cycles:
            dut.step(int(w))
        assert np.array_equal(whole, dut.read_coverage())


def test_width_mismatch():
    dut = create_dut("periph-fsm")
    with pytest.raises(ContractViolation, match="width"):
        run_stimulus(dut, translate(b"abc", 8))


@pytest.mark.parametrize("name", list_duts())
def test_witness_reaches_everything_and_trips_check(name, backend):
    dut = create_dut(name, backend=backend)
    covered = np.zeros(dut.descriptor.coverpoint_count, dtype=bool)
    failed = []
    for c in load_chromosomes(bundled_dir(name, "witness"), 512).chromosomes:
        result = run_stimulus(dut, stim_for(dut, c.data))
        covered |= result.coverage > 0
        if not result.check.passed:
            failed.append(result.check.message)
    missing = [dut.names()[i] for i in np.flatnonzero(~covered)]
    assert missing == []
    assert failed


@pytest.mark.parametrize("name", list_duts())
def test_bundled_seeds_pass_check(name):
    dut = create_dut(name)
    for c in load_chromosomes(bundled_dir(name, "seeds")).chromosomes:
        assert run_stimulus(dut, stim_for(dut, c.data)).check.passed


def test_periph_golden_vector(backend):
    golden_path = bundled_dir("periph-fsm", "seeds").parent / "golden.tsv"
    golden = [int(line.split("\t")[1]) for line in golden_path.read_text().splitlines()]
    dut = create_dut("periph-fsm", backend=backend)
    seed = load_chromosomes(bundled_dir("periph-fsm", "seeds")).chromosomes[0]
    assert run_stimulus(dut, stim_for(dut, seed.data)).coverage.tolist() == golden


def test_descriptors():
    expect = {"toy-cpu": 35, "periph-fsm": 64, "synth-delay": 8}
    for name, width in expect.items():
        d = create_dut(name).descriptor
        assert d.input_width_bits == width
        assert len(create_dut(name).names()) == d.coverpoint_count
        assert len(set(create_dut(name).names())) == d.coverpoint_count
    assert create_dut("periph-fsm").descriptor.coverpoint_count >= 100


def test_synth_options():
    d = create_dut("synth-delay", coverpoints=64, delay_us=5)
    assert d.descriptor.coverpoint_count == 64 and d.descriptor.cycle_delay_us == 5
    with pytest.raises(ContractViolation):
        create_dut("synth-delay", coverpoints=4)
    with pytest.raises(ContractViolation):
        create_dut("synth-delay", delay_mode="nap")
    with pytest.raises(KeyError):
        create_dut("no-such-design")


def test_synth_key_trips_check():
    dut = create_dut("synth-delay")
    data = load_chromosomes(bundled_dir("synth-delay", "witness")).chromosomes[-1].data
    assert not run_stimulus(dut, stim_for(dut, data)).check.passed


@pytest.mark.parametrize("name", list_duts())
def test_report_file_collector_matches_direct(name, tmp_path):
    dut = create_dut(name)
    collector = ReportFileCollector(tmp_path / "cov.dat")
    for stim in random_stimuli(dut, 10, seed=5):
        direct = run_stimulus(dut, stim).coverage
        parsed = run_stimulus(dut, stim, collector).coverage
        assert np.array_equal(direct, parsed)


# -- wire protocol -----------------------------------------------------------

def test_step_packing_round_trip():
    words = [0, 1, (1 << 35) - 1, 12345]
    assert unpack_step(pack_step(words, 35), 35).tolist() == words
    big = [(1 << 100) + 7, 3]
    assert [int(w) for w in unpack_step(pack_step(big, 165), 165)] == big
    assert unpack_coverage(pack_coverage([1, 0, 9])).tolist() == [1, 0, 9]


def test_frame_layout():
    assert pack_frame(HELLO) == bytes([HELLO, 0, 0, 0, 0])
    assert pack_frame(GETCOV, b"ab")[1:5] == (2).to_bytes(4, "little")


@pytest.mark.parametrize("name", list_duts())
def test_subprocess_matches_in_process(name):
    local = create_dut(name)
    remote = SubprocessDut(SERVE + [name], grammar=local.descriptor.grammar)
    try:
        assert remote.descriptor.input_width_bits == local.descriptor.input_width_bits
        assert remote.descriptor.coverpoint_count == local.descriptor.coverpoint_count
        for stim in random_stimuli(local, 25, seed=6):
            a, b = run_stimulus(local, stim), run_stimulus(remote, stim)
            assert np.array_equal(a.coverage, b.coverage)
            assert a.check == b.check
    finally:
        remote.close()


def test_subprocess_needs_templates_for_transactions():
    with pytest.raises(ConfigError, match="template"):
        SubprocessDut(SERVE + ["toy-cpu"])


def test_subprocess_bad_command():
    with pytest.raises(SubprocessDutError):
        SubprocessDut(["/nonexistent/simulator"])


def test_subprocess_child_dies():
    remote = SubprocessDut(SERVE + ["periph-fsm"])
    remote.proc.kill()
    remote.proc.wait()
    with pytest.raises(SubprocessDutError):
        run_stimulus(remote, translate(bytes(16), 64))
    remote.close()


def test_subprocess_silent_child_times_out():
    with pytest.raises(SubprocessDutError, match="timed out"):
        SubprocessDut([sys.executable, "-c", "import time; time.sleep(5)"], timeout=0.3)
