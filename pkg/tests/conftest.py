import sys

import numpy as np
import pytest

from simfuzz import kernels, rng
from simfuzz.corpus import Chromosome, CorpusState, FitnessParams, INITIAL

BACKENDS = kernels.available()

_acceptance = {}


def pytest_collection_modifyitems(items):
    # keep the acceptance checks last so their summary reads after everything else
    items.sort(key=lambda item: item.get_closest_marker("acceptance") is not None)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        _acceptance[marker.args[0]] = (marker.kwargs.get("name", item.name), rep.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        name, passed, detail = _acceptance[number]
        line = f"[{number}] {name}: {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(record_property):
    """Attach a one-line measurement to the acceptance summary."""
    def put(text):
        record_property("detail", text)
        print(text, file=sys.stderr)
    return put


@pytest.fixture
def stream():
    def make(*key):
        return rng.stream(1234, rng.TEST, *key)
    return make


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def make_corpus(runs, params=FitnessParams()):
    """A corpus holding one executed seed per coverage vector in ``runs``."""
    runs = [np.asarray(r, dtype=np.uint32) for r in runs]
    corpus = CorpusState(len(runs[0]), params)
    for i, run in enumerate(runs):
        corpus.add_executed(Chromosome(bytes([i]), INITIAL, i), run)
    return corpus
