import time

import pytest

from simfuzz.errors import ContractViolation
from simfuzz.stats import COVERAGE_CORPUS, MUTATION, SIMULATION, StageTimer, shares, throughput


def test_throughput_arithmetic():
    t = StageTimer()
    t.add_cycles(1000)
    assert throughput(t, 2.0) == 500.0


def test_throughput_needs_wall_time():
    with pytest.raises(ContractViolation):
        throughput(StageTimer(), 0.0)


def test_shares_example():
    t = StageTimer()
    t.record(MUTATION, 1.0)
    t.record(COVERAGE_CORPUS, 1.0)
    t.record(SIMULATION, 2.0)
    assert shares(t) == {COVERAGE_CORPUS: 0.25, MUTATION: 0.25, SIMULATION: 0.5}


def test_utilization_may_exceed_one():
    t = StageTimer()
    t.record(MUTATION, 1.0)
    t.record(SIMULATION, 2.0)
    assert sum(shares(t, wall_seconds=2.0).values()) == 1.5


def test_record_validation():
    t = StageTimer()
    with pytest.raises(ContractViolation):
        t.record("lunch", 1.0)
    with pytest.raises(ContractViolation):
        t.record(MUTATION, -1.0)
    with pytest.raises(ContractViolation):
        t.time("lunch")


def test_span_and_merge():
    t = StageTimer()
    with t.time(SIMULATION):
        time.sleep(0.01)
    assert t.durations[SIMULATION] >= 0.01
    other = StageTimer()
    other.record(MUTATION, 0.5)
    other.add_cycles(7)
    t.merge(other)
    assert t.durations[MUTATION] == 0.5 and t.cycles == 7


def test_contiguous_spans_cover_the_gaps():
    t = StageTimer(contiguous=True)
    start = time.perf_counter()
    t.start_clock(start)
    time.sleep(0.01)  # bookkeeping before the first span is charged to it
    with t.time(MUTATION):
        pass
    with t.time(SIMULATION):
        time.sleep(0.005)
    wall = time.perf_counter() - start
    assert t.durations[MUTATION] >= 0.01
    assert t.attributed == pytest.approx(wall, rel=0.02)


def test_throughput_invariant_to_share_redistribution():
    a, b = StageTimer(), StageTimer()
    for t in (a, b):
        t.add_cycles(300)
    a.record(MUTATION, 3.0)
    b.record(SIMULATION, 3.0)
    assert throughput(a, 3.0) == throughput(b, 3.0)
