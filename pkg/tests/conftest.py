import datetime as dt
import importlib

import numpy as np
import pytest

from windbma.dataset import ForecastCase

ACCEPTANCE_LINES: list[str] = []

BACKENDS = ["_pykernels"]
try:
    importlib.import_module("windbma._ckernels")
    BACKENDS.append("_ckernels")
except ImportError:
    pass


@pytest.fixture(params=BACKENDS)
def backend(request):
    """Each available kernel implementation in turn."""
    return importlib.import_module(f"windbma.{request.param}")


def make_case(forecasts, obs=3.0, date=dt.date(2011, 1, 1), station="S01"):
    return ForecastCase.from_forecasts(date, station, obs, [float(v) for v in forecasts])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def integrate_pdf(law) -> float:
    """Adaptive quadrature of ``law.pdf`` over ``[0, quantile(1 - 1e-9)]``.

    For shape < 1 the density has an integrable x**(shape - 1) pole at zero;
    that factor is handed to QUADPACK as an algebraic weight on ``[0, mean]``.
    """
    from scipy.integrate import quad

    upper = law.quantile(1 - 1e-9)
    a = law.shape
    if a >= 1.0:
        return quad(law.pdf, 0.0, upper, points=[law.mean()], limit=400)[0]
    split = min(law.mean(), upper)
    tiny = 2.2250738585072014e-308

    def smooth(x):
        x = max(x, tiny)  # the weighted rule also samples the endpoint
        return law.pdf(x) / x ** (a - 1.0)

    head = quad(smooth, 0.0, split,
                weight="alg", wvar=(a - 1.0, 0.0), limit=400)[0]
    tail = quad(law.pdf, split, upper, limit=400)[0]
    return head + tail
