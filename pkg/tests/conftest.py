import numpy as np
import pytest

from boundcut.mixture import Dataset, Domain, Labeling, MixtureModel


def line(points, m0=50.0):
    """1-d dataset from a list of coordinates."""
    return Dataset(Domain(1, m0), np.asarray(points, dtype=float)[:, None])


def labels(*ys):
    return Labeling.from_sequence(list(ys))


@pytest.fixture(scope="session")
def two_gauss():
    """N(-1, 1) vs N(+1, 1), equal priors."""
    return MixtureModel.gaussians([[-1.0], [1.0]], [1.0, 1.0])


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
