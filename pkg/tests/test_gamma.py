import math
import sys

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from conftest import integrate_pdf
from windbma import gamma
from windbma.errors import ParameterDomainError
from windbma.gamma import GammaLaw, from_mean_sd

# 1 - exp(-4) * (1 + 4 + 8 + 32/3), by hand
POISSON_CDF_4_2 = 1.0 - math.exp(-4.0) * (1.0 + 4.0 + 8.0 + 32.0 / 3.0)


def test_from_mean_sd_identities():
    law = from_mean_sd(1.0, 1.0)
    assert (law.shape, law.scale) == (1.0, 1.0)
    law = from_mean_sd(2.0, 1.0)
    assert law.shape == pytest.approx(4.0) and law.scale == pytest.approx(0.5)
    law = from_mean_sd(3.5697, 1.2)
    assert law.shape == pytest.approx(3.5697 ** 2 / 1.44, rel=1e-14)
    assert law.shape == pytest.approx(8.84914, abs=1e-5)
    assert law.scale == pytest.approx(0.40340, abs=1e-5)


@pytest.mark.parametrize("mean,sd", [(0.0, 1.0), (1.0, 0.0), (-1.0, 2.0), (1.0, math.nan)])
def test_from_mean_sd_rejects_domain(mean, sd):
    with pytest.raises(ParameterDomainError):
        from_mean_sd(mean, sd)


@pytest.mark.parametrize("shape,scale", [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0)])
def test_law_rejects_domain(shape, scale):
    with pytest.raises(ParameterDomainError):
        GammaLaw(shape, scale)


def test_law_is_immutable():
    law = GammaLaw(2.0, 1.0)
    with pytest.raises(AttributeError):
        law.shape = 3.0


def test_pdf_examples():
    exp1 = GammaLaw(1.0, 1.0)
    assert gamma.pdf(exp1, 0.0) == 1.0
    assert gamma.pdf(exp1, -1.0) == 0.0
    assert gamma.pdf(GammaLaw(4.0, 0.5), 0.0) == 0.0
    law = GammaLaw(4.0, 0.5)
    h = 1e-5
    deriv = (law.cdf(2.0 + h) - law.cdf(2.0 - h)) / (2 * h)
    assert law.pdf(2.0) == pytest.approx(deriv, abs=1e-6)


def test_cdf_examples():
    assert gamma.cdf(GammaLaw(1.0, 1.0), 1.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-14)
    assert gamma.cdf(GammaLaw(3.0, 2.0), 0.0) == 0.0
    assert gamma.cdf(GammaLaw(3.0, 2.0), -5.0) == 0.0
    assert GammaLaw(4.0, 0.5).cdf(2.0) == pytest.approx(POISSON_CDF_4_2, abs=1e-13)
    assert POISSON_CDF_4_2 == pytest.approx(0.56653, abs=1e-5)


def test_quantile_examples():
    assert GammaLaw(1.0, 1.0).quantile(0.5) == pytest.approx(math.log(2.0), rel=1e-12)
    assert GammaLaw(4.0, 0.5).quantile(POISSON_CDF_4_2) == pytest.approx(2.0, rel=1e-10)
    assert GammaLaw(4.0, 0.5).quantile(0.56653) == pytest.approx(2.0, abs=1e-4)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
def test_quantile_rejects_bad_probability(p):
    with pytest.raises(ParameterDomainError):
        GammaLaw(2.0, 1.0).quantile(p)


def test_quantile_monotone():
    law = GammaLaw(0.7, 3.0)
    q = [law.quantile(p) for p in np.linspace(0.001, 0.999, 200)]
    assert np.all(np.diff(q) > 0)


laws = st.builds(lambda m, s: (m, s), st.floats(0.1, 20.0), st.floats(0.05, 10.0))


@settings(max_examples=150, deadline=None)
@given(ms=laws)
def test_mean_sd_round_trip(ms):
    law = from_mean_sd(*ms)
    assert law.mean() == pytest.approx(ms[0], rel=1e-12)
    assert law.sd() == pytest.approx(ms[1], rel=1e-12)


@settings(max_examples=150, deadline=None)
@given(ms=laws, u=st.floats(0.001, 0.999))
def test_quantile_cdf_round_trips(ms, u):
    law = from_mean_sd(*ms)
    # tiny shapes put the quantile below the smallest double
    assume(law.cdf(sys.float_info.min) < u)
    q = law.quantile(u)
    assert law.cdf(q) == pytest.approx(u, abs=1e-9)
    x = q
    assert law.quantile(law.cdf(x)) == pytest.approx(x, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(ms=laws)
def test_cdf_monotone_and_pdf_normalised(ms):
    law = from_mean_sd(*ms)
    upper = law.quantile(1 - 1e-9)
    grid = np.linspace(0.0, upper, 1000)
    c = [law.cdf(x) for x in grid]
    assert np.all(np.diff(c) >= 0)
    assert all(law.pdf(x) >= 0 for x in grid[1:])
    assert integrate_pdf(law) == pytest.approx(1.0, abs=1e-6)
