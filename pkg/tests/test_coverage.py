import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simfuzz.coverage import (TOTAL_MAX, CumulativeCoverage, coverage_rate, coverage_vector,
                              export_snapshot, merge_batch, observe, parse_coverage_report,
                              parse_snapshot, run_rate, write_coverage_report)
from simfuzz.errors import ContractViolation


def cum_with(totals):
    c = CumulativeCoverage(len(totals))
    c.hit_totals[:] = totals
    c.covered_count = int(np.count_nonzero(totals))
    return c


def test_observe_from_zero():
    c = CumulativeCoverage(3)
    assert observe(c, [0, 5, 1]) == {1, 2}


def test_observe_nothing_new():
    c = cum_with([2, 0, 7])
    assert observe(c, [1, 0, 3]) == frozenset()


def test_observe_updates_totals():
    c = cum_with([2, 0, 0])
    assert observe(c, [0, 1, 1]) == {1, 2}
    assert c.hit_totals.tolist() == [2, 1, 1]
    assert c.covered_count == 3


def test_observe_length_mismatch():
    with pytest.raises(ContractViolation, match="length mismatch"):
        observe(CumulativeCoverage(3), [1, 2])


def test_observe_saturates():
    c = cum_with([TOTAL_MAX - 1, 0])
    observe(c, [5, 0])
    assert c.hit_totals[0] == TOTAL_MAX


@pytest.mark.parametrize("totals, rate", [([0, 0, 0, 0], 0.0), ([1, 2, 3, 4], 1.0), ([0, 9, 0, 1], 0.5)])
def test_coverage_rate(totals, rate):
    assert coverage_rate(cum_with(totals)) == rate


def test_run_rate():
    assert run_rate([0, 3, 0, 1]) == 0.5


def test_zero_coverpoints_rejected():
    with pytest.raises(ContractViolation):
        CumulativeCoverage(0)


def test_merge_batch_sequential():
    assert merge_batch(CumulativeCoverage(2), [[1, 0], [0, 1]]) == [{0}, {1}]
    assert merge_batch(CumulativeCoverage(2), [[1, 0], [1, 0]]) == [{0}, set()]
    assert merge_batch(CumulativeCoverage(2), []) == []


def test_merge_batch_checks_all_lengths_first():
    c = CumulativeCoverage(2)
    with pytest.raises(ContractViolation):
        merge_batch(c, [[1, 0], [1]])
    assert c.covered_count == 0


def test_coverage_vector_is_frozen():
    v = coverage_vector([1, 2])
    with pytest.raises(ValueError):
        v[0] = 3


def test_snapshot_round_trip():
    c = cum_with([0, 4, 1])
    c.covering_seed_counts[:] = [0, 2, 1]
    back = parse_snapshot(export_snapshot(c))
    assert back.hit_totals.tolist() == [0, 4, 1]
    assert back.covering_seed_counts.tolist() == [0, 2, 1]
    assert back.covered_count == 2


def test_report_file_round_trip(tmp_path):
    names = ["fsm.idle", "fsm.busy", "it's quoted"]
    write_coverage_report(tmp_path / "cov.dat", "demo", names, [3, 0, 7])
    assert parse_coverage_report(tmp_path / "cov.dat", names).tolist() == [3, 0, 7]


runs_strategy = st.integers(1, 12).flatmap(
    lambda m: st.lists(st.lists(st.integers(0, 3), min_size=m, max_size=m), max_size=8))


@given(runs_strategy)
@settings(max_examples=200)
def test_merge_equals_fold_and_totals_monotone(runs):
    if not runs:
        return
    m = len(runs[0])
    a, b = CumulativeCoverage(m), CumulativeCoverage(m)
    reports = merge_batch(a, runs)
    prev = b.hit_totals.copy()
    folded = []
    for r in runs:
        folded.append(observe(b, r))
        assert (b.hit_totals >= prev).all()
        prev = b.hit_totals.copy()
    assert reports == folded
    assert np.array_equal(a.hit_totals, b.hit_totals)
    # every covered point was reported new exactly once
    assert sum(len(r) for r in reports) == a.covered_count == np.count_nonzero(a.hit_totals)


@given(runs_strategy, st.randoms(use_true_random=False))
@settings(max_examples=100)
def test_covered_count_is_permutation_invariant(runs, rnd):
    if not runs:
        return
    m = len(runs[0])
    perm = list(range(m))
    rnd.shuffle(perm)
    a, b = CumulativeCoverage(m), CumulativeCoverage(m)
    for r in runs:
        observe(a, r)
        observe(b, [r[p] for p in perm])
    assert a.covered_count == b.covered_count
