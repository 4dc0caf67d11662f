import numpy as np
import pytest

from trackdiag.dataset import build_training_corpus
from trackdiag.generator import SeverityProfile
from trackdiag.signal import TrackCircuitConfig
from trackdiag.svm.kernels import KernelSpec
from trackdiag.svm.multiclass import train_one_vs_one


@pytest.fixture(scope="session")
def small_corpus():
    return build_training_corpus(TrackCircuitConfig(), SeverityProfile(), per_class=40, seed=11)


@pytest.fixture(scope="session")
def small_model(small_corpus):
    return train_one_vs_one(small_corpus, 10.0, KernelSpec("rbf", 0.1), seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_log():
    """Append ``(criterion, passed, detail)``; lines are echoed in the terminal summary."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
