import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dscharge import charges, models  # noqa: E402

LAM = 10.0


@pytest.fixture(scope="session")
def lam():
    return LAM


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_shell(rng, n, lo, hi, margin=0.95):
    r = rng.uniform(lo, hi, n)
    u = rng.uniform(-margin, margin, n)
    p = rng.uniform(0, 2 * np.pi, n)
    s = np.sqrt(1 - u * u)
    return r[:, None] * np.stack([s * np.cos(p), s * np.sin(p), u], axis=-1)


@pytest.fixture(scope="session")
def mcvittie():
    return models.mcvittie_slice(models.McVittieParams(1.0, LAM, 0.0))


@pytest.fixture(scope="session")
def kerr_params():
    return models.KerrDSParams(1.0, 0.5, LAM, 0.0, "standard")


@pytest.fixture(scope="session")
def kerr(kerr_params):
    return models.kerr_planar_slice(kerr_params)


@pytest.fixture(scope="session")
def kerr_report(kerr):
    return charges.charge_report(kerr)


@pytest.fixture(scope="session")
def kerr_shifted_report():
    d = models.kerr_planar_slice(models.KerrDSParams(1.0, 0.5, LAM, 0.0, "shifted"))
    return charges.charge_report(d)


@pytest.fixture(scope="session")
def mcvittie_report(mcvittie):
    return charges.charge_report(mcvittie)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 11):
        status, note = mod.RESULTS.get(n, ("FAIL", "did not complete"))
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {note}")
