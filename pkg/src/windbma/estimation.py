"""Fitting the exchangeable-group BMA model on a training window.

The mean link ``b0 + b1 f`` comes from ordinary least squares pooled over
every (member forecast, observation) pair. The group weights and the sd link
``c0 + c1 f`` then maximise the censored mixture likelihood via EM: the
weights get the closed-form group-averaged responsibility update, and
``(c0, c1)`` are improved by a Nelder-Mead search on the observed-data
likelihood. Observations under the censoring threshold contribute the
probability mass of ``[0, threshold)`` instead of a density.
"""
from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .dataset import Archive, ForecastCase, TrainingSet, window
from .errors import InsufficientDataError, SingularFitError
from .mixture import LINK_FLOOR, BmaModel, GroupScheme, LinkParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EmConfig:
    max_iters: int = 500
    rel_tol: float = 1e-7
    weight_floor: float = 0.0
    nm_max_evals: int = 200

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.weight_floor < 0:
            raise ValueError("weight_floor must be nonnegative")


@dataclass(frozen=True)
class OlsFit:
    intercept: float
    slope: float
    se_intercept: float
    se_slope: float
    n: int


def ols(x: np.ndarray, y: np.ndarray) -> OlsFit:
    """Simple linear regression of ``y`` on ``x`` with closed-form standard errors."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise SingularFitError(f"need at least 2 pairs for regression, got {n}")
    xbar = x.mean()
    ybar = y.mean()
    dx = x - xbar
    sxx = float(dx @ dx)
    if sxx <= 0.0 or np.all(x == x[0]):
        raise SingularFitError("all forecasts are equal; slope is not identifiable")
    slope = float(dx @ (y - ybar)) / sxx
    intercept = ybar - slope * xbar
    if n > 2:
        resid = y - intercept - slope * x
        s2 = float(resid @ resid) / (n - 2)
        se_slope = math.sqrt(s2 / sxx)
        se_intercept = math.sqrt(s2 * (1.0 / n + xbar * xbar / sxx))
    else:
        se_slope = se_intercept = math.nan
    return OlsFit(float(intercept), float(slope), se_intercept, se_slope, n)


def pooled_pairs(train: TrainingSet) -> tuple[np.ndarray, np.ndarray]:
    """All (member forecast, observation) pairs with the forecast present."""
    f = train.forecasts
    present = ~np.isnan(f)
    y = np.broadcast_to(train.obs[:, None], f.shape)
    return f[present], y[present]


def pooled_ols(train: TrainingSet) -> OlsFit:
    return ols(*pooled_pairs(train))


def fit_bias(train: TrainingSet) -> tuple[float, float]:
    """Intercept and slope of the mean link, by pooled least squares."""
    res = pooled_ols(train)
    return res.intercept, res.slope


def canonical_order(train: TrainingSet, scheme: GroupScheme) -> TrainingSet:
    """Sort forecasts within each exchangeable group, missing values last.

    The likelihood cannot tell members of one group apart, so this changes
    nothing mathematically; it makes fits bit-identical under any
    within-group relabelling of the members.
    """
    f = train.forecasts.copy()
    for g in range(scheme.n_groups):
        cols = scheme.members_of(g)
        if len(cols) > 1:
            f[:, cols] = np.sort(f[:, cols], axis=1)
    cases = tuple(ForecastCase.from_forecasts(c.date, c.station, c.obs, row)
                  for c, row in zip(train.cases, f))
    return TrainingSet(cases, train.window, train.censor_threshold)


def _loglik(train: TrainingSet, link: LinkParams, member_weights: np.ndarray) -> float:
    return kernels.mixture_loglik(
        train.forecasts, train.obs, np.ascontiguousarray(member_weights, dtype=float),
        link.b0, link.b1, link.c0, link.c1, train.censor_threshold, LINK_FLOOR)


def censored_loglik(train: TrainingSet, link: LinkParams, weights: Sequence[float],
                    scheme: GroupScheme) -> float:
    """Log-likelihood of the training window under the mixture model.

    ``weights`` are per-member weights of each group, as in ``BmaModel``.
    """
    return _loglik(train, link, scheme.expand(weights))


def responsibilities(train: TrainingSet, link: LinkParams,
                     member_weights: np.ndarray) -> np.ndarray:
    """Posterior probability that each member is the best one, per case."""
    f = train.forecasts
    dens = kernels.component_densities(f, train.obs, link.b0, link.b1, link.c0, link.c1,
                                       train.censor_threshold, LINK_FLOOR)
    present = ~np.isnan(f)
    w = np.where(present, member_weights[None, :], 0.0)
    wsum = w.sum(axis=1, keepdims=True)
    # cases where all available members carry zero weight share it equally
    w = np.where(wsum > 0, w, present.astype(float))
    num = w * dens
    tot = num.sum(axis=1, keepdims=True)
    fallback = w / w.sum(axis=1, keepdims=True).clip(min=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(tot > 0, num / tot, fallback)
    return z


def _update_weights(z: np.ndarray, scheme: GroupScheme, floor: float) -> tuple[float, ...]:
    n = z.shape[0]
    sizes = scheme.group_sizes
    w = np.array([z[:, scheme.members_of(g)].sum() / (n * sizes[g])
                  for g in range(scheme.n_groups)])
    if floor > 0:
        w = np.maximum(w, floor)
    w = w / float(np.dot(sizes, w))
    return tuple(float(v) for v in w)


def _simplex(x0: np.ndarray) -> np.ndarray:
    steps = np.where(np.abs(x0) > 1e-3, 0.1 * np.abs(x0), 0.01)
    return np.array([x0, x0 + [steps[0], 0.0], x0 + [0.0, steps[1]]])


def _sd_step(train: TrainingSet, b0: float, b1: float, c: np.ndarray, member_weights: np.ndarray,
             ll_current: float, max_evals: int) -> tuple[np.ndarray, float]:
    def negll(v):
        val = _loglik(train, LinkParams(b0, b1, v[0], v[1]), member_weights)
        return -val if math.isfinite(val) else math.inf

    res = minimize(negll, c, method="Nelder-Mead",
                   options={"maxfev": max_evals, "initial_simplex": _simplex(c),
                            "xatol": 1e-5, "fatol": 1e-8})
    if math.isfinite(res.fun) and -res.fun > ll_current:
        return np.asarray(res.x, dtype=float), -float(res.fun)
    return c, ll_current


def em_fit(train: TrainingSet, link_mean: tuple[float, float], scheme: GroupScheme,
           cfg: EmConfig | None = None) -> BmaModel:
    """Maximum likelihood weights and sd coefficients for a fixed mean link."""
    cfg = cfg or EmConfig()
    if len(train) == 0:
        raise InsufficientDataError("empty training set")
    train = canonical_order(train, scheme)
    b0, b1 = (float(v) for v in link_mean)
    f_present, y_pairs = pooled_pairs(train)
    if f_present.size == 0:
        raise InsufficientDataError("training set has no ensemble forecasts")
    resid = y_pairs - (b0 + b1 * f_present)
    c0 = float(np.std(resid, ddof=1)) if resid.size > 1 else 1.0
    c = np.array([max(c0, LINK_FLOOR), 0.0])
    weights = scheme.uniform_weights()

    ll = _loglik(train, LinkParams(b0, b1, *c), scheme.expand(weights))
    if not math.isfinite(ll):
        raise InsufficientDataError("likelihood is not finite at the starting point")
    path = [ll]
    converged = False
    for _ in range(cfg.max_iters):
        link = LinkParams(b0, b1, *c)
        z = responsibilities(train, link, scheme.expand(weights))
        cand = _update_weights(z, scheme, cfg.weight_floor)
        ll_w = _loglik(train, link, scheme.expand(cand))
        # the group-averaged update is exact only without missing members
        if ll_w >= ll:
            weights, ll_mid = cand, ll_w
        else:
            ll_mid = ll
        c, ll_new = _sd_step(train, b0, b1, c, scheme.expand(weights), ll_mid, cfg.nm_max_evals)
        path.append(ll_new)
        if abs(ll_new - ll) <= cfg.rel_tol * abs(ll):
            ll = ll_new
            converged = True
            break
        ll = ll_new
    if not converged:
        logger.warning("EM stopped after %d iterations without converging", cfg.max_iters)

    link = LinkParams(b0, b1, float(c[0]), float(c[1]))
    if np.any(link.c0 + link.c1 * f_present <= 0):
        logger.warning("fitted sd link is nonpositive for some training forecasts; floored")
    return BmaModel(scheme, link, weights, fit_window=train.window,
                    n_train_cases=len(train), loglik_path=tuple(path), converged=converged)


def fit(data: Archive, target_date: dt.date, window_days: int, scheme: GroupScheme,
        cfg: EmConfig | None = None) -> BmaModel:
    """Fit the model for ``target_date`` on the preceding ``window_days`` days."""
    if window_days < 1:
        raise ValueError(f"window_days must be at least 1, got {window_days}")
    train = window(data, target_date, window_days)
    if len(train) == 0:
        raise InsufficientDataError(
            f"no cases in training window {train.window[0]}..{train.window[1]}")
    train = canonical_order(train, scheme)
    return em_fit(train, fit_bias(train), scheme, cfg)
