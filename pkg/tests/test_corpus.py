import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simfuzz.corpus import (HAVOC, INITIAL, Chromosome, CorpusState, FitnessParams, brute_force_fitness,
                            compute_fitness, load_chromosomes, load_corpus, save_corpus, select,
                            update_seed_corpus)
from simfuzz.dut import create_dut
from simfuzz.errors import ContractViolation, CorpusError, CorpusFullError, NoSeedsError

from conftest import make_corpus


def hit(m, points):
    v = np.zeros(m, dtype=np.uint32)
    v[list(points)] = 1
    return v


# -- fitness -----------------------------------------------------------------

def test_fitness_examples():
    half = [1, 0, 1, 0]
    assert compute_fitness(half, True) == 2.0
    assert compute_fitness(half, False) == 0.5
    assert compute_fitness([0, 0, 0, 0], False, FitnessParams(epsilon_fitness=1e-6)) == 1e-6


def test_fitness_params_validated():
    with pytest.raises(ContractViolation):
        FitnessParams(favor=0.5)
    with pytest.raises(ContractViolation):
        FitnessParams(epsilon_fitness=0.0)


# -- selection ---------------------------------------------------------------

def test_select_single_seed(stream):
    corpus = make_corpus([[1, 0]])
    r = stream(0)
    assert all(select(corpus, r) is corpus.seeds[0] for _ in range(100))


def test_select_proportional(stream):
    corpus = make_corpus([hit(4, [0]), hit(4, [1])])
    for i, f in enumerate((1.0, 3.0)):
        corpus.seeds[i].effective_fitness = f
        corpus._fitness[i] = f
    corpus._cumsum = None
    r = stream(1)
    n = 100_000
    second = sum(select(corpus, r) is corpus.seeds[1] for _ in range(n))
    assert abs(second / n - 0.75) <= 0.02


def test_select_uniform_chi_square(stream):
    corpus = make_corpus([[1, 1], [1, 1], [1, 1]])
    r = stream(2)
    n = 100_000
    counts = np.zeros(3)
    for _ in range(n):
        counts[select(corpus, r).chromosome.id] += 1
    chi2 = ((counts - n / 3) ** 2 / (n / 3)).sum()
    assert chi2 < 9.21  # df=2, alpha=0.01


def test_select_empty_corpus(stream):
    with pytest.raises(ContractViolation):
        select(CorpusState(4), stream(3))


# -- update ------------------------------------------------------------------

def chrom(i):
    return Chromosome(bytes([i % 256]), HAVOC, i)


def test_update_nothing_new():
    corpus = make_corpus([hit(5, [0, 1])])
    s = update_seed_corpus(corpus, [(chrom(10), hit(5, [0]))])
    assert (s.retained, s.new_points) == (0, 0)
    assert corpus.stagnation_counter == 1
    assert len(corpus) == 1


def test_update_retains_new_point():
    corpus = CorpusState(10)
    s = update_seed_corpus(corpus, [(chrom(1), hit(10, [3]))])
    assert (s.retained, s.new_points, s.retained_ids) == (1, 1, [1])
    assert corpus.uniquely_covers(0)
    assert corpus.seeds[0].effective_fitness == pytest.approx(0.1 * 4.0)
    assert corpus.stagnation_counter == 0


def test_update_revokes_favor():
    corpus = make_corpus([hit(10, [0, 1, 2]), hit(10, [0, 1, 2, 7])])
    a = corpus.seeds[1]
    assert a.base_fitness == pytest.approx(0.4)
    assert a.effective_fitness == pytest.approx(1.6)
    update_seed_corpus(corpus, [(chrom(5), hit(10, [7, 9]))])
    assert a.effective_fitness == pytest.approx(0.4)
    assert not corpus.uniquely_covers(1)
    assert corpus.uniquely_covers(2)


def test_update_batch_order():
    corpus = CorpusState(4)
    s = update_seed_corpus(corpus, [(chrom(1), hit(4, [0])), (chrom(2), hit(4, [0])), (chrom(3), hit(4, [0, 1]))])
    assert s.retained_ids == [1, 3]


def test_update_length_checked_before_any_change():
    corpus = CorpusState(4)
    with pytest.raises(ContractViolation):
        update_seed_corpus(corpus, [(chrom(1), hit(4, [0])), (chrom(2), hit(3, [0]))])
    assert len(corpus) == 0 and corpus.cumulative.covered_count == 0


def test_initial_seeds_credited_in_place():
    corpus = CorpusState(4)
    for i in range(2):
        corpus.add_initial(Chromosome(bytes([i]), INITIAL, i))
    assert [c.id for c in corpus.pending_initial()] == [0, 1]
    assert corpus.fitness().tolist() == [1e-6, 1e-6]
    # an initial seed with nothing new is still kept; it is not appended twice
    s = update_seed_corpus(corpus, [(corpus.seeds[0].chromosome, hit(4, [1])),
                                    (corpus.seeds[1].chromosome, hit(4, [1]))])
    assert len(corpus) == 2 and s.retained == 0 and s.new_points == 1
    assert corpus.pending_initial() == []
    assert np.allclose(corpus.fitness(), brute_force_fitness(corpus))


def test_corpus_full():
    corpus = CorpusState(4, max_size=1)
    update_seed_corpus(corpus, [(chrom(1), hit(4, [0]))])
    with pytest.raises(CorpusFullError):
        update_seed_corpus(corpus, [(chrom(2), hit(4, [1]))])


@given(st.lists(st.lists(st.lists(st.integers(0, 2), min_size=6, max_size=6), min_size=1, max_size=4),
                min_size=1, max_size=25))
@settings(max_examples=150, deadline=None)
def test_update_invariants(batches):
    corpus = CorpusState(6)
    cid = 0
    for batch in batches:
        before = corpus.cumulative.hit_totals.copy()
        pairs = []
        for run in batch:
            pairs.append((chrom(cid), np.array(run, dtype=np.uint32)))
            cid += 1
        n_before = len(corpus)
        s = update_seed_corpus(corpus, pairs)
        # retention iff the run revealed a new point, in batch order
        totals = before.copy()
        expect = []
        for c, run in pairs:
            if ((totals == 0) & (run > 0)).any():
                expect.append(c.id)
            totals += run
        assert s.retained_ids == expect
        assert len(corpus) == n_before + len(expect)
        np.testing.assert_allclose(corpus.fitness(), brute_force_fitness(corpus), rtol=0, atol=0)
        unique = sum((np.asarray(seed.run_coverage) > 0).astype(int) for seed in corpus.seeds) \
            if len(corpus) else np.zeros(6)
        owners = np.zeros(6, dtype=int)
        for i in range(len(corpus)):
            if corpus.uniquely_covers(i):
                owners += (np.asarray(corpus.seeds[i].run_coverage) > 0) & (unique == 1)
        assert (owners <= 1).all()


# -- persistence -------------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    chroms = [Chromosome(bytes(range(i, i + 7)), INITIAL, 10 + i) for i in range(5)]
    assert save_corpus(chroms, tmp_path) == 5
    loaded = load_chromosomes(tmp_path).chromosomes
    assert [(c.id, c.data) for c in loaded] == [(c.id, c.data) for c in chroms]


def test_manifest_order_is_authoritative(tmp_path):
    chroms = [Chromosome(b"b", INITIAL, 9), Chromosome(b"a", INITIAL, 2)]
    save_corpus(chroms, tmp_path)
    assert [c.id for c in load_chromosomes(tmp_path).chromosomes] == [9, 2]


def test_load_empty_dir(tmp_path):
    with pytest.raises(NoSeedsError, match="no seeds found"):
        load_chromosomes(tmp_path)


def test_load_missing_dir(tmp_path):
    with pytest.raises(CorpusError, match="not found"):
        load_chromosomes(tmp_path / "nope")


def test_load_skips_oversized(tmp_path):
    (tmp_path / "small").write_bytes(b"x" * 4)
    (tmp_path / "big").write_bytes(b"x" * 40)
    with pytest.warns(UserWarning, match="exceeds max_chromosome_bytes"):
        result = load_chromosomes(tmp_path, max_chromosome_bytes=16)
    assert [len(c.data) for c in result.chromosomes] == [4]
    assert len(result.skipped) == 1


def test_load_plain_files_numbered_after_named(tmp_path):
    (tmp_path / "seed-4.bin").write_bytes(b"a")
    (tmp_path / "other").write_bytes(b"b")
    ids = {c.data: c.id for c in load_chromosomes(tmp_path).chromosomes}
    assert ids == {b"a": 4, b"b": 5}


def test_manifest_length_mismatch(tmp_path):
    save_corpus([Chromosome(b"abc", INITIAL, 0)], tmp_path)
    (tmp_path / "seed-0.bin").write_bytes(b"ab")
    with pytest.raises(CorpusError, match="length mismatch"):
        load_chromosomes(tmp_path)


def test_manifest_missing_file(tmp_path):
    save_corpus([Chromosome(b"abc", INITIAL, 0)], tmp_path)
    (tmp_path / "seed-0.bin").unlink()
    with pytest.raises(CorpusError, match="missing"):
        load_chromosomes(tmp_path)


def test_load_corpus_recomputes_coverage(tmp_path):
    dut = create_dut("toy-cpu")
    chroms = [Chromosome(bytes([1, 5, 0, 0, 0, 2, 3, 0, 0, 0]), INITIAL, 0), Chromosome(b"\x00" * 20, INITIAL, 1)]
    save_corpus(chroms, tmp_path)
    corpus = load_corpus(tmp_path, dut)
    assert len(corpus) == 2
    assert all(s.executed for s in corpus.seeds)
    assert corpus.cumulative.covered_count > 0
    np.testing.assert_array_equal(corpus.fitness(), brute_force_fitness(corpus))
