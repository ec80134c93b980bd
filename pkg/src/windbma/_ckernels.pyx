# cython: language_level=3
"""Compiled gamma and mixture kernels.

Mirrors ``windbma._pykernels`` function for function; the two are checked
against each other in the test suite.
"""
from libc.math cimport exp, log, log1p, lgamma, fabs, isnan, INFINITY

import numpy as np

cdef double EPS = 2.220446049250313e-16
cdef double TINY = 1e-300
cdef double HALF_LOG_2PI = 0.91893853320467274178
cdef double STIRLING_CUTOFF = 10.0
cdef long MAX_ITER = 10000000


cdef inline double _stirlerr(double a) nogil:
    cdef double r = 1.0 / a, r2 = r * r
    return r * (1.0 / 12 - r2 * (1.0 / 360 - r2 * (1.0 / 1260 - r2 * (1.0 / 1680 - r2 / 1188))))


cdef inline double _log_prefactor(double a, double x) nogil:
    # a*log(x) - x - lgamma(a), without cancellation for large a
    cdef double t, lx
    if a < STIRLING_CUTOFF:
        return a * log(x) - x - lgamma(a)
    t = (x - a) / a
    # log1p(t) loses relative accuracy in 1 + t when x << a
    lx = log1p(t) if fabs(t) < 0.5 else log(x / a)
    return a * (lx - t) + 0.5 * log(a) - HALF_LOG_2PI - _stirlerr(a)


cdef double _gamma_p(double a, double x) nogil:
    cdef double lp, ap, s, d, b, c, h, an, de
    cdef long i
    if not x > 0.0:
        return 0.0
    if x == INFINITY:
        return 1.0
    lp = _log_prefactor(a, x)
    if x < a + 1.0:
        ap = a
        d = 1.0 / a
        s = d
        for i in range(MAX_ITER):
            ap += 1.0
            d *= x / ap
            s += d
            if fabs(d) < fabs(s) * EPS:
                break
        return min(1.0, s * exp(lp))
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < TINY:
            d = TINY
        c = b + an / c
        if fabs(c) < TINY:
            c = TINY
        d = 1.0 / d
        de = d * c
        h *= de
        if fabs(de - 1.0) < EPS:
            break
    return max(0.0, 1.0 - exp(lp) * h)


cdef inline double _gamma_logpdf(double x, double a, double scale) nogil:
    if x < 0.0:
        return -INFINITY
    if x == 0.0:
        if a < 1.0:
            return INFINITY
        if a == 1.0:
            return -log(scale)
        return -INFINITY
    return _log_prefactor(a, x / scale) - log(x)


cdef inline double _gamma_pdf(double x, double a, double scale) nogil:
    return exp(_gamma_logpdf(x, a, scale))


def gamma_p(double a, double x):
    """Regularized lower incomplete gamma function P(a, x)."""
    return _gamma_p(a, x)


def gamma_cdf(double x, double shape, double scale):
    return _gamma_p(shape, x / scale)


def gamma_logpdf(double x, double shape, double scale):
    return _gamma_logpdf(x, shape, scale)


def gamma_pdf(double x, double shape, double scale):
    return _gamma_pdf(x, shape, scale)


def gamma_cdf_array(double[::1] x, double[::1] shape, double[::1] scale):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _gamma_p(shape[i], x[i] / scale[i])
    return out


def gamma_pdf_array(double[::1] x, double[::1] shape, double[::1] scale):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _gamma_pdf(x[i], shape[i], scale[i])
    return out


def mixture_cdf(double x, double[::1] weight, double[::1] shape, double[::1] scale):
    cdef Py_ssize_t i
    cdef double s = 0.0
    if not x > 0.0:
        return 0.0
    for i in range(weight.shape[0]):
        s += weight[i] * _gamma_p(shape[i], x / scale[i])
    return s


def mixture_pdf(double x, double[::1] weight, double[::1] shape, double[::1] scale):
    cdef Py_ssize_t i
    cdef double s = 0.0
    if x < 0.0:
        return 0.0
    for i in range(weight.shape[0]):
        if weight[i] > 0.0:
            s += weight[i] * _gamma_pdf(x, shape[i], scale[i])
    return s


cdef inline double _component(double f, double y, double b0, double b1, double c0,
                              double c1, double censor, double floor) nogil:
    cdef double mu = b0 + b1 * f, sd = c0 + c1 * f, a, sc
    if mu < floor:
        mu = floor
    if sd < floor:
        sd = floor
    a = mu * mu / (sd * sd)
    sc = sd * sd / mu
    if y < censor:
        return _gamma_p(a, censor / sc)
    return _gamma_pdf(y, a, sc)


def component_densities(double[:, ::1] forecasts, double[::1] obs, double b0, double b1,
                        double c0, double c1, double censor, double floor):
    """Per-member likelihood contributions; zero where the forecast is missing."""
    cdef Py_ssize_t i, j, n = forecasts.shape[0], m = forecasts.shape[1]
    out = np.zeros((n, m))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                if not isnan(forecasts[i, j]):
                    o[i, j] = _component(forecasts[i, j], obs[i], b0, b1, c0, c1, censor, floor)
    return out


def mixture_loglik(double[:, ::1] forecasts, double[::1] obs, double[::1] member_weight,
                   double b0, double b1, double c0, double c1, double censor, double floor):
    """Censored mixture log-likelihood summed over cases."""
    cdef Py_ssize_t i, j, n = forecasts.shape[0], m = forecasts.shape[1]
    cdef double total = 0.0, num, wsum, d
    cdef long navail
    with nogil:
        for i in range(n):
            num = 0.0
            wsum = 0.0
            navail = 0
            for j in range(m):
                if isnan(forecasts[i, j]):
                    continue
                navail += 1
                wsum += member_weight[j]
            if navail == 0:
                continue
            if wsum > 0.0:
                for j in range(m):
                    if member_weight[j] > 0.0 and not isnan(forecasts[i, j]):
                        d = _component(forecasts[i, j], obs[i], b0, b1, c0, c1, censor, floor)
                        num += member_weight[j] * d
                total += log(num / wsum)
            else:
                for j in range(m):
                    if not isnan(forecasts[i, j]):
                        num += _component(forecasts[i, j], obs[i], b0, b1, c0, c1, censor, floor)
                total += log(num / navail)
    return total
