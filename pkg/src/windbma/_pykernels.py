"""Pure Python / NumPy implementation of the gamma and mixture kernels.

Used when the compiled ``_ckernels`` extension is unavailable, or when
``WINDBMA_PURE_PYTHON=1`` is set. Scalars go through :mod:`math`; arrays are
evaluated with masked, vectorised iterations of the same series and
continued-fraction expansions.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

EPS = 2.220446049250313e-16
TINY = 1e-300
HALF_LOG_2PI = 0.91893853320467274178
STIRLING_CUTOFF = 10.0
MAX_ITER = 10_000_000


def _stirlerr(a):
    r = 1.0 / a
    r2 = r * r
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680 - r2 / 1188))))


def _log_prefactor(a: float, x: float) -> float:
    if a < STIRLING_CUTOFF:
        return a * math.log(x) - x - math.lgamma(a)
    t = (x - a) / a
    # log1p(t) loses relative accuracy in 1 + t when x << a
    lx = math.log1p(t) if abs(t) < 0.5 else math.log(x / a)
    return a * (lx - t) + 0.5 * math.log(a) - HALF_LOG_2PI - _stirlerr(a)


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if not x > 0.0:
        return 0.0
    if x == math.inf:
        return 1.0
    lp = _log_prefactor(a, x)
    if x < a + 1.0:
        ap = a
        d = s = 1.0 / a
        for _ in range(MAX_ITER):
            ap += 1.0
            d *= x / ap
            s += d
            if abs(d) < abs(s) * EPS:
                break
        return min(1.0, s * math.exp(lp))
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        de = d * c
        h *= de
        if abs(de - 1.0) < EPS:
            break
    return max(0.0, 1.0 - math.exp(lp) * h)


def gamma_cdf(x: float, shape: float, scale: float) -> float:
    return gamma_p(shape, x / scale)


def gamma_logpdf(x: float, shape: float, scale: float) -> float:
    if x < 0.0:
        return -math.inf
    if x == 0.0:
        if shape < 1.0:
            return math.inf
        if shape == 1.0:
            return -math.log(scale)
        return -math.inf
    return _log_prefactor(shape, x / scale) - math.log(x)


def gamma_pdf(x: float, shape: float, scale: float) -> float:
    lp = gamma_logpdf(x, shape, scale)
    return math.inf if lp == math.inf else math.exp(lp)


# --- vectorised versions -------------------------------------------------


def _log_prefactor_vec(a, x):
    out = np.empty_like(x)
    lo = a < STIRLING_CUTOFF
    if lo.any():
        out[lo] = a[lo] * np.log(x[lo]) - x[lo] - gammaln(a[lo])
    hi = ~lo
    if hi.any():
        ah = a[hi]
        xh = x[hi]
        t = (xh - ah) / ah
        with np.errstate(divide="ignore", invalid="ignore"):
            lx = np.where(np.abs(t) < 0.5, np.log1p(t), np.log(xh / ah))
        out[hi] = ah * (lx - t) + 0.5 * np.log(ah) - HALF_LOG_2PI - _stirlerr(ah)
    return out


def _gamma_p_vec(a, x):
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0.0
    out[np.isposinf(x)] = 1.0
    pos &= np.isfinite(x)
    if not pos.any():
        return out
    ser = pos & (x < a + 1.0)
    cf = pos & ~ser
    if ser.any():
        aa, xx = a[ser], x[ser]
        lp = _log_prefactor_vec(aa, xx)
        ap = aa.copy()
        d = 1.0 / aa
        s = d.copy()
        active = np.ones(aa.shape, dtype=bool)
        while active.any():
            ap = ap + 1.0
            d = np.where(active, d * xx / ap, d)
            s = np.where(active, s + d, s)
            active &= ~(np.abs(d) < np.abs(s) * EPS)
        out[ser] = np.minimum(1.0, s * np.exp(lp))
    if cf.any():
        aa, xx = a[cf], x[cf]
        lp = _log_prefactor_vec(aa, xx)
        b = xx + 1.0 - aa
        c = np.full(aa.shape, 1.0 / TINY)
        d = 1.0 / b
        h = d.copy()
        active = np.ones(aa.shape, dtype=bool)
        i = 0
        while active.any():
            i += 1
            an = -i * (i - aa)
            b = b + 2.0
            dn = an * d + b
            dn = np.where(np.abs(dn) < TINY, TINY, dn)
            cn = b + an / c
            cn = np.where(np.abs(cn) < TINY, TINY, cn)
            dn = 1.0 / dn
            de = dn * cn
            h = np.where(active, h * de, h)
            d = np.where(active, dn, d)
            c = np.where(active, cn, c)
            active &= ~(np.abs(de - 1.0) < EPS)
        out[cf] = np.maximum(0.0, 1.0 - np.exp(lp) * h)
    return out


def _gamma_pdf_vec(x, shape, scale):
    x = np.asarray(x, dtype=float)
    shape = np.asarray(shape, dtype=float)
    scale = np.asarray(scale, dtype=float)
    out = np.zeros(x.shape)
    pos = x > 0.0
    if pos.any():
        lp = _log_prefactor_vec(shape[pos], x[pos] / scale[pos]) - np.log(x[pos])
        out[pos] = np.exp(lp)
    zero = x == 0.0
    if zero.any():
        sz = shape[zero]
        out[zero] = np.where(sz < 1.0, np.inf, np.where(sz == 1.0, 1.0 / scale[zero], 0.0))
    return out


def gamma_cdf_array(x, shape, scale):
    return _gamma_p_vec(shape, np.asarray(x, dtype=float) / np.asarray(scale, dtype=float))


def gamma_pdf_array(x, shape, scale):
    return _gamma_pdf_vec(x, shape, scale)


def mixture_cdf(x: float, weight, shape, scale) -> float:
    # a scalar loop beats masked array iterations for a handful of components
    if not x > 0.0:
        return 0.0
    return float(sum(float(w) * gamma_p(float(a), x / float(s))
                     for w, a, s in zip(weight, shape, scale)))


def mixture_pdf(x: float, weight, shape, scale) -> float:
    if x < 0.0:
        return 0.0
    return float(sum(float(w) * gamma_pdf(x, float(a), float(s))
                     for w, a, s in zip(weight, shape, scale) if w > 0.0))


def component_densities(forecasts, obs, b0, b1, c0, c1, censor, floor):
    """Per-member likelihood contributions; zero where the forecast is missing."""
    forecasts = np.asarray(forecasts, dtype=float)
    obs = np.asarray(obs, dtype=float)
    out = np.zeros(forecasts.shape)
    present = ~np.isnan(forecasts)
    f = forecasts[present]
    y = np.broadcast_to(obs[:, None], forecasts.shape)[present]
    mu = np.maximum(b0 + b1 * f, floor)
    sd = np.maximum(c0 + c1 * f, floor)
    a = mu * mu / (sd * sd)
    sc = sd * sd / mu
    cens = y < censor
    vals = np.empty(f.shape)
    if cens.any():
        vals[cens] = _gamma_p_vec(a[cens], censor / sc[cens])
    if (~cens).any():
        vals[~cens] = _gamma_pdf_vec(y[~cens], a[~cens], sc[~cens])
    out[present] = vals
    return out


def mixture_loglik(forecasts, obs, member_weight, b0, b1, c0, c1, censor, floor) -> float:
    """Censored mixture log-likelihood summed over cases."""
    forecasts = np.asarray(forecasts, dtype=float)
    dens = component_densities(forecasts, obs, b0, b1, c0, c1, censor, floor)
    present = ~np.isnan(forecasts)
    navail = present.sum(axis=1)
    keep = navail > 0
    w = np.where(present, np.asarray(member_weight, dtype=float), 0.0)
    wsum = w.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        weighted = (w * dens).sum(axis=1) / wsum
        uniform = dens.sum(axis=1) / navail
        per_case = np.where(wsum > 0.0, weighted, uniform)
        return float(np.log(per_case[keep]).sum())
