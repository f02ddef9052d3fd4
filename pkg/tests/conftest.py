import numpy as np
import pytest

from vickrey.embeddings import EmbeddingStore

LINE_WORDS = ["A", "B", "C", "D", "E"]
LINE_COORDS = [0.0, 1.0, 2.5, 4.0, 6.0]


class ZeroSampler:
    """Noise source that always returns the zero vector."""

    def __init__(self, dim):
        self.dim = dim

    def sample(self, rng, size):
        return np.zeros((size, self.dim))


@pytest.fixture
def line_store():
    return EmbeddingStore(LINE_WORDS, LINE_COORDS, name="line")


@pytest.fixture
def plane_store():
    rng = np.random.default_rng(20240611)
    return EmbeddingStore([f"w{i}" for i in range(8)], rng.uniform(0, 3, size=(8, 2)), name="plane")


@pytest.fixture
def zero_sampler():
    return ZeroSampler


# acceptance summary: one PASS/FAIL line per criterion ------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def _criterion_number(nodeid):
    if "test_acceptance.py::test_criterion_" not in nodeid:
        return None
    return int(nodeid.split("test_criterion_")[1].split("_")[0])


def pytest_runtest_logreport(report):
    n = _criterion_number(report.nodeid)
    if n is None or not (report.when == "call" or report.failed or report.skipped):
        return
    detail = dict(report.user_properties).get("detail", "")
    if report.skipped:
        outcome = "SKIP"
        if not detail and isinstance(report.longrepr, tuple):
            detail = report.longrepr[2]
    else:
        outcome = "PASS" if report.passed else "FAIL"
    prev = _CRITERIA.get(n)
    if prev is not None:
        outcome = "FAIL" if "FAIL" in (outcome, prev[0]) else outcome
        detail = f"{prev[1]}; {detail}" if detail else prev[1]
    _CRITERIA[n] = (outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcome, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {outcome}  {detail}")
