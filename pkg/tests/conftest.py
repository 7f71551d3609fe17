import numpy as np
import pytest

from ietlab import numeric as nm
from ietlab.iet_core import Perm, random_iet
from ietlab.renorm import accelerate


@pytest.fixture(autouse=True)
def _precision():
    """Every test starts from the same working precision."""
    old = nm.precision()
    nm.set_precision(300)
    yield
    nm.set_precision(old)


@pytest.fixture(scope="session")
def run4():
    """Balanced run of a random genus-2 IET, 120 levels."""
    iet = random_iet(Perm.symmetric(4), np.random.default_rng(5), bits=1600)
    return accelerate(iet, k_max=120)


@pytest.fixture(scope="session")
def flags4(run4):
    from ietlab.oseledets import estimate_flags
    nm.set_precision(300)
    return estimate_flags(run4, L=60, window=100)


@pytest.fixture(scope="session")
def basis4(run4, flags4):
    from ietlab.correction import Corrector
    from ietlab.spectral import Basis
    nm.set_precision(300)
    le = flags4.local_exponents(10, 40)
    cor = Corrector(run4, flags4, L=40, exponents=le[:2])
    return Basis(cor, 2)


# -- acceptance reporting ----------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    n = mark.args[0]
    if rep.failed or rep.when == "call":
        detail = dict(item.user_properties).get("detail", "")
        if rep.failed:
            msg = str(rep.longrepr.reprcrash.message) if hasattr(rep.longrepr, "reprcrash") else ""
            detail = (detail + " " + msg.splitlines()[0] if msg else detail).strip()
        _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
