import numpy as np
import pytest

from meshband.data import Dataset, SubjectRecord, sessions_from_scans


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_dataset(n_subjects=3, n_regions=4, scans=(6, 5, 7), labels=(1, 2, 1), seed=0, n_classes=2):
    gen = np.random.default_rng(seed)
    subjects = []
    for i in range(n_subjects):
        series = gen.standard_normal((n_regions, sum(scans)))
        subjects.append(SubjectRecord(f"sub{i}", series, sessions_from_scans(labels, scans)))
    return Dataset(tuple(subjects), n_classes, tuple(f"roi{r}" for r in range(n_regions)))


@pytest.fixture
def small_dataset():
    return make_dataset()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
