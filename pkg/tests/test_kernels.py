"""Both kernel backends against scipy and against each other."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from windbma import _pykernels, kernels

shapes = st.floats(min_value=0.05, max_value=400.0)
xs = st.floats(min_value=1e-6, max_value=2000.0)


def test_backend_is_selected():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("a,x", [(0.3, 0.01), (1.0, 1.0), (4.0, 4.0), (8.8, 30.0),
                                 (50.0, 49.0), (250.0, 260.0), (2.0, 1e-8)])
def test_gamma_p_matches_scipy(backend, a, x):
    assert backend.gamma_p(a, x) == pytest.approx(stats.gamma.cdf(x, a), abs=1e-13)


def test_gamma_p_edge_values(backend):
    assert backend.gamma_p(2.0, 0.0) == 0.0
    assert backend.gamma_p(2.0, -1.0) == 0.0
    assert backend.gamma_p(2.0, math.inf) == 1.0


def test_pdf_at_origin(backend):
    assert backend.gamma_pdf(0.0, 1.0, 2.0) == pytest.approx(0.5)
    assert backend.gamma_pdf(0.0, 3.0, 1.0) == 0.0
    assert backend.gamma_pdf(0.0, 0.5, 1.0) == math.inf
    assert backend.gamma_pdf(-1.0, 0.5, 1.0) == 0.0


@settings(max_examples=300, deadline=None)
@given(a=shapes, x=xs)
def test_cdf_agrees_with_scipy(a, x):
    want = stats.gamma.cdf(x, a)
    assert _pykernels.gamma_p(a, x) == pytest.approx(want, abs=1e-12)
    assert kernels.gamma_p(a, x) == pytest.approx(want, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(a=shapes, x=xs, scale=st.floats(min_value=0.01, max_value=50.0))
def test_logpdf_agrees_with_scipy(a, x, scale):
    want = stats.gamma.logpdf(x, a, scale=scale)
    got = kernels.gamma_logpdf(x, a, scale)
    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)
    assert _pykernels.gamma_logpdf(x, a, scale) == pytest.approx(got, rel=1e-12, abs=1e-12)


def test_array_versions_match_scalars(backend, rng):
    n = 500
    a = rng.uniform(0.1, 60.0, n)
    sc = rng.uniform(0.05, 5.0, n)
    x = rng.uniform(0.0, 40.0, n)
    cdf = backend.gamma_cdf_array(x, a, sc)
    pdf = backend.gamma_pdf_array(x, a, sc)
    for i in range(0, n, 37):
        assert cdf[i] == pytest.approx(backend.gamma_cdf(x[i], a[i], sc[i]), abs=1e-15)
        assert pdf[i] == pytest.approx(backend.gamma_pdf(x[i], a[i], sc[i]), rel=1e-13)


def _random_training(rng, n=200, missing=0.1):
    f = rng.lognormal(1.2, 0.5, (n, 11))
    f[rng.random((n, 11)) < missing] = np.nan
    f[3] = np.nan
    y = rng.gamma(4.0, 1.0, n)
    y[rng.random(n) < 0.1] = 0.0
    return np.ascontiguousarray(f), y


def test_backends_agree_on_likelihood(rng):
    ck = pytest.importorskip("windbma._ckernels")
    f, y = _random_training(rng)
    w = np.array([0.3] + [0.07] * 10)
    args = (0.3, 1.1, 0.6, 0.2, 0.1, 1e-4)
    dc = ck.component_densities(f, y, *args)
    dp = _pykernels.component_densities(f, y, *args)
    np.testing.assert_allclose(dc, dp, rtol=1e-12, atol=1e-300)
    assert ck.mixture_loglik(f, y, w, *args) == pytest.approx(
        _pykernels.mixture_loglik(f, y, w, *args), rel=1e-13)


def test_loglik_matches_direct_sum(backend, rng):
    f, y = _random_training(rng, n=50)
    w = np.array([0.5] + [0.05] * 10)
    b0, b1, c0, c1 = 0.2, 1.0, 0.5, 0.25
    want = 0.0
    for i in range(len(y)):
        present = ~np.isnan(f[i])
        if not present.any():
            continue
        mu = b0 + b1 * f[i, present]
        sd = c0 + c1 * f[i, present]
        a, sc = mu ** 2 / sd ** 2, sd ** 2 / mu
        dens = (stats.gamma.cdf(0.1, a, scale=sc) if y[i] < 0.1
                else stats.gamma.pdf(y[i], a, scale=sc))
        ww = w[present] / w[present].sum()
        want += math.log(np.dot(ww, dens))
    got = backend.mixture_loglik(f, y, w, b0, b1, c0, c1, 0.1, 1e-4)
    assert got == pytest.approx(want, rel=1e-10)


def test_zero_weight_members_share_mass(backend):
    f = np.array([[np.nan] + [3.0] * 10])
    y = np.array([3.0])
    w = np.array([1.0] + [0.0] * 10)
    ll = backend.mixture_loglik(f, y, w, 0.0, 1.0, 1.0, 0.0, 0.1, 1e-4)
    assert ll == pytest.approx(stats.gamma.logpdf(3.0, 9.0, scale=1 / 3), rel=1e-12)


def test_floors_keep_likelihood_finite(backend):
    f = np.array([[0.0] * 11])
    y = np.array([0.5])
    ll = backend.mixture_loglik(f, y, np.full(11, 1 / 11), -2.0, 1.0, -1.0, 0.0, 0.1, 1e-4)
    assert not math.isnan(ll)


def test_environment_forces_python_backend():
    code = ("from windbma import kernels, BmaModel, LinkParams, build_predictive\n"
            "from windbma.dataset import ForecastCase\n"
            "import datetime as dt\n"
            "case = ForecastCase.from_forecasts(dt.date(2011, 1, 1), 'S', 3.0, "
            "[float(v) for v in range(1, 12)])\n"
            "d = build_predictive(BmaModel.two_group(0.3, LinkParams(0.3, 1.1, 0.6, 0.2)), case)\n"
            "print(kernels.BACKEND, repr(d.cdf(4.0)), repr(d.median()))\n")
    env = dict(os.environ, WINDBMA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                         text=True, check=True).stdout.split()
    assert out[0] == "python"
    from windbma import BmaModel, LinkParams, build_predictive
    from conftest import make_case
    d = build_predictive(BmaModel.two_group(0.3, LinkParams(0.3, 1.1, 0.6, 0.2)),
                         make_case(range(1, 12)))
    assert float(out[1]) == pytest.approx(d.cdf(4.0), rel=1e-13)
    assert float(out[2]) == pytest.approx(d.median(), rel=1e-12)
