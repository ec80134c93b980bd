"""Gamma distribution in the mean / standard deviation parameterisation."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from . import kernels
from .errors import ParameterDomainError


@dataclass(frozen=True)
class GammaLaw:
    """Gamma distribution with ``shape`` (dimensionless) and ``scale`` (m/s)."""

    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and math.isfinite(self.shape)):
            raise ParameterDomainError(f"shape must be positive and finite, got {self.shape!r}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterDomainError(f"scale must be positive and finite, got {self.scale!r}")

    @classmethod
    def from_mean_sd(cls, mean: float, sd: float) -> "GammaLaw":
        return from_mean_sd(mean, sd)

    def mean(self) -> float:
        return self.shape * self.scale

    def sd(self) -> float:
        return math.sqrt(self.shape) * self.scale

    def pdf(self, x: float) -> float:
        return pdf(self, x)

    def cdf(self, x: float) -> float:
        return cdf(self, x)

    def quantile(self, p: float) -> float:
        return quantile(self, p)


def from_mean_sd(mean: float, sd: float) -> GammaLaw:
    """Build the gamma law with the given mean and standard deviation.

    ``shape = mean**2 / sd**2`` and ``scale = sd**2 / mean``.
    """
    if not mean > 0:
        raise ParameterDomainError(f"mean must be positive, got {mean!r}")
    if not sd > 0:
        raise ParameterDomainError(f"sd must be positive, got {sd!r}")
    return GammaLaw(shape=(mean / sd) ** 2, scale=sd * sd / mean)


def pdf(law: GammaLaw, x: float) -> float:
    return kernels.gamma_pdf(float(x), law.shape, law.scale)


def cdf(law: GammaLaw, x: float) -> float:
    return kernels.gamma_cdf(float(x), law.shape, law.scale)


def quantile(law: GammaLaw, p: float) -> float:
    """Inverse cdf, solved by bracketed Newton iteration with bisection fallback."""
    _check_probability(p)
    hi = law.mean() + 20.0 * law.sd()
    return invert_cdf(lambda x: cdf(law, x), lambda x: pdf(law, x), p, hi)


def _check_probability(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ParameterDomainError(f"probability must lie in (0, 1), got {p!r}")


def invert_cdf(
    cdf_fn: Callable[[float], float],
    pdf_fn: Callable[[float], float],
    p: float,
    hi: float,
    *,
    rtol: float = 4 * 2.220446049250313e-16,
    max_iter: int = 4000,
) -> float:
    """Solve ``cdf_fn(x) = p`` for ``x >= 0``.

    Starts from the bracket ``[0, hi]``, doubling ``hi`` until it covers
    ``p``. Newton steps are taken from the bracket end nearest the target
    and rejected in favour of bisection whenever they leave the bracket.
    """
    _check_probability(p)
    lo, f_lo = 0.0, 0.0
    f_hi = cdf_fn(hi)
    while f_hi < p:
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = cdf_fn(hi)
        if not math.isfinite(hi):
            raise ParameterDomainError(f"could not bracket quantile {p!r}")
    x = hi if (f_hi - p) < (p - f_lo) else lo
    fx = f_hi if x == hi else f_lo
    for _ in range(max_iter):
        if fx == p:
            return x
        if fx < p:
            lo = x
        else:
            hi = x
        if hi - lo <= rtol * hi:
            break
        dens = pdf_fn(x) if x > 0.0 else 0.0
        step_ok = False
        if dens > 0.0 and math.isfinite(dens):
            cand = x - (fx - p) / dens
            if lo < cand < hi:
                if abs(cand - x) <= 1e-15 * x:
                    return cand
                x_new = cand
                step_ok = True
        if not step_ok:
            # geometric midpoint once the bracket spans many orders of magnitude
            if lo > 0.0 and hi > 1e3 * lo:
                x_new = math.sqrt(lo * hi)
            else:
                x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
        fx = cdf_fn(x)
    return x
