"""Scores and calibration diagnostics for probabilistic wind speed forecasts."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from .dataset import CENSOR_THRESHOLD, ForecastCase, archive_arrays
from .gamma import quantile as gamma_quantile
from .mixture import N_MEMBERS, PredictiveDist, build_predictive

DEFAULT_LEVELS = (0.667, 0.90)
CRPS_TAIL_PROB = 1e-9


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


# --- scoring rules --------------------------------------------------------


def crps_mixture(dist: PredictiveDist, obs: float, tol: float = 1e-6) -> float:
    """CRPS of a gamma mixture by adaptive quadrature of the squared cdf gap.

    The integral is cut at the largest component ``1 - 1e-9`` quantile, which
    bounds the neglected upper tail well below ``tol``.
    """
    upper = max(gamma_quantile(law, 1.0 - CRPS_TAIL_PROB) for _, law in dist.components)
    upper = max(upper, obs)
    means = dist.component_means()
    sds = dist.component_sds()
    marks = np.concatenate([means - 3 * sds, means, means + 3 * sds])
    opts = dict(epsabs=tol / 4, epsrel=1e-10, limit=200)

    total = 0.0
    if obs > 0:
        inner = sorted({float(m) for m in marks if 0.0 < m < obs})
        total += quad(lambda y: dist.cdf(y) ** 2, 0.0, obs, points=inner or None, **opts)[0]
    if upper > obs:
        inner = sorted({float(m) for m in marks if obs < m < upper})
        total += quad(lambda y: (1.0 - dist.cdf(y)) ** 2, obs, upper,
                      points=inner or None, **opts)[0]
    return max(total, 0.0)


def crps_ensemble(members: Sequence[float], obs: float) -> float:
    """CRPS of the empirical distribution of ``members``, in closed form."""
    x = np.sort(np.asarray([v for v in members if v is not None and not math.isnan(v)],
                           dtype=float))
    m = x.size
    if m == 0:
        raise ValueError("crps_ensemble needs at least one member")
    first = np.abs(x - obs).mean()
    # sum_{i,j} |x_i - x_j| over ordered pairs, from sorted values
    pair_sum = 2.0 * np.dot(2.0 * np.arange(m) - m + 1.0, x)
    return float(first - pair_sum / (2.0 * m * m))


def _check_lengths(a: Sequence, b: Sequence) -> None:
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} forecasts vs {len(b)} observations")
    if len(a) == 0:
        raise ValueError("no forecasts to score")


def mae(point_forecasts: Sequence[float], observations: Sequence[float]) -> float:
    _check_lengths(point_forecasts, observations)
    return float(np.mean(np.abs(np.asarray(point_forecasts) - np.asarray(observations))))


def rmse(point_forecasts: Sequence[float], observations: Sequence[float]) -> float:
    _check_lengths(point_forecasts, observations)
    err = np.asarray(point_forecasts) - np.asarray(observations)
    return float(np.sqrt(np.mean(err * err)))


# --- histograms and PIT ---------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    kind: str
    bin_counts: tuple[int, ...]
    skipped: int = 0
    range_coverage: float | None = None

    @property
    def n(self) -> int:
        return int(sum(self.bin_counts))

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "bin_counts": list(self.bin_counts), "n": self.n,
             "skipped": self.skipped}
        if self.range_coverage is not None:
            d["range_coverage"] = self.range_coverage
        return d

    def to_csv(self) -> str:
        k = len(self.bin_counts)
        n = max(self.n, 1)
        if self.kind == "rank":
            rows = [(i + 1, None, None, c, c / n) for i, c in enumerate(self.bin_counts)]
        else:
            rows = [(i + 1, i / k, (i + 1) / k, c, c / n) for i, c in enumerate(self.bin_counts)]
        rows = [tuple("" if v is None else v for v in r) for r in rows]
        return _csv(("bin", "lower", "upper", "count", "frequency"), rows)


def rank_histogram(cases: Iterable[ForecastCase], seed: int = 0) -> Histogram:
    """Verification rank histogram of observations among complete 11-member ensembles.

    Ties between the observation and members are broken uniformly at random.
    """
    rng = np.random.default_rng(seed)
    counts = np.zeros(N_MEMBERS + 1, dtype=int)
    skipped = 0
    inside = 0
    for case in cases:
        f = case.forecasts
        if np.isnan(f).any():
            skipped += 1
            continue
        below = int(np.sum(f < case.obs))
        ties = int(np.sum(f == case.obs))
        rank = below + (int(rng.integers(0, ties + 1)) if ties else 0)
        counts[rank] += 1
        inside += bool(f.min() <= case.obs <= f.max())
    n = int(counts.sum())
    return Histogram("rank", tuple(int(c) for c in counts), skipped,
                     inside / n if n else None)


def pit_from_dists(dists: Sequence[PredictiveDist], observations: Sequence[float],
                   rng: np.random.Generator,
                   censor: float = CENSOR_THRESHOLD) -> np.ndarray:
    """PIT values; censored observations are spread uniformly on ``[0, F(censor))``."""
    _check_lengths(dists, observations)
    out = np.empty(len(dists))
    for i, (dist, y) in enumerate(zip(dists, observations)):
        if y < censor:
            out[i] = rng.uniform(0.0, dist.cdf(censor))
        else:
            out[i] = dist.cdf(y)
    return out


def pit_values(models_by_date: Mapping, cases: Sequence[ForecastCase], seed: int = 0,
               censor: float = CENSOR_THRESHOLD) -> np.ndarray:
    """PIT of each case under the model fitted for that case's date."""
    if not cases:
        raise ValueError("no cases to evaluate")
    dists = []
    for case in cases:
        if case.date not in models_by_date:
            raise KeyError(f"no fitted model for {case.date}")
        dists.append(build_predictive(models_by_date[case.date], case))
    return pit_from_dists(dists, [c.obs for c in cases], np.random.default_rng(seed), censor)


def pit_histogram(pit: Sequence[float], bins: int = 11) -> Histogram:
    counts, _ = np.histogram(np.asarray(pit, dtype=float), bins=bins, range=(0.0, 1.0))
    return Histogram("pit", tuple(int(c) for c in counts))


def kolmogorov_sf(t: float, terms: int = 100) -> float:
    """Survival function of the limiting Kolmogorov distribution."""
    if t <= 0.0:
        return 1.0
    if t < 1.0:
        # dual theta series; the alternating series converges slowly for small t
        s = sum(math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8.0 * t * t))
                for k in range(1, terms + 1))
        return min(1.0, max(0.0, 1.0 - math.sqrt(2.0 * math.pi) / t * s))
    s = sum((-1) ** (k - 1) * math.exp(-2.0 * k * k * t * t) for k in range(1, terms + 1))
    return min(1.0, max(0.0, 2.0 * s))


def ks_uniform_test(pit: Sequence[float]) -> tuple[float, float]:
    """One-sample Kolmogorov-Smirnov test against U(0, 1): ``(D, p-value)``."""
    u = np.sort(np.asarray(pit, dtype=float))
    n = u.size
    if n == 0:
        raise ValueError("empty PIT sample")
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    return d, kolmogorov_sf(math.sqrt(n) * d)


# --- intervals and reports ------------------------------------------------


def interval_stats(dists: Sequence[PredictiveDist], observations: Sequence[float],
                   levels: Sequence[float] = DEFAULT_LEVELS) -> dict[float, tuple[float, float]]:
    """Coverage and mean width of central prediction intervals, per level."""
    _check_lengths(dists, observations)
    obs = np.asarray(observations, dtype=float)
    out = {}
    for level in levels:
        bounds = np.array([d.central_interval(level) for d in dists])
        out[level] = _coverage_width(bounds, obs)
    return out


def ensemble_interval_stats(forecasts: np.ndarray, observations: Sequence[float],
                            levels: Sequence[float] = DEFAULT_LEVELS
                            ) -> dict[float, tuple[float, float]]:
    """Same as :func:`interval_stats` with empirical member quantiles as bounds."""
    forecasts = np.asarray(forecasts, dtype=float)
    _check_lengths(forecasts, observations)
    obs = np.asarray(observations, dtype=float)
    out = {}
    for level in levels:
        alpha = 1.0 - level
        lo = np.nanquantile(forecasts, alpha / 2.0, axis=1)
        hi = np.nanquantile(forecasts, 1.0 - alpha / 2.0, axis=1)
        out[level] = _coverage_width(np.column_stack([lo, hi]), obs)
    return out


def _coverage_width(bounds: np.ndarray, obs: np.ndarray) -> tuple[float, float]:
    covered = (bounds[:, 0] <= obs) & (obs <= bounds[:, 1])
    return float(covered.mean()), float((bounds[:, 1] - bounds[:, 0]).mean())


@dataclass(frozen=True)
class ScoreReport:
    mean_crps: float
    mae_median: float
    mae_mean: float
    rmse_median: float
    rmse_mean: float
    intervals: dict[float, tuple[float, float]] = field(default_factory=dict)
    n_cases: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_crps": self.mean_crps,
            "mae_median": self.mae_median,
            "mae_mean": self.mae_mean,
            "rmse_median": self.rmse_median,
            "rmse_mean": self.rmse_mean,
            "intervals": [{"level": lv, "coverage": c, "avg_width": w}
                          for lv, (c, w) in sorted(self.intervals.items())],
            "n_cases": self.n_cases,
        }

    def csv_rows(self, label: str) -> list[tuple]:
        return [(label, lv, c, w, self.mean_crps, self.mae_median, self.mae_mean,
                 self.rmse_median, self.rmse_mean, self.n_cases)
                for lv, (c, w) in sorted(self.intervals.items())]

    CSV_HEADER = ("forecast", "level", "coverage", "avg_width", "mean_crps", "mae_median",
                  "mae_mean", "rmse_median", "rmse_mean", "n_cases")

    def to_csv(self, label: str = "bma") -> str:
        return _csv(self.CSV_HEADER, self.csv_rows(label))


def reports_csv(reports: Mapping[str, ScoreReport]) -> str:
    rows = [r for label, rep in reports.items() for r in rep.csv_rows(label)]
    return _csv(ScoreReport.CSV_HEADER, rows)


@dataclass(frozen=True)
class CaseScores:
    """Per-case BMA quantities collected while scoring."""

    crps: np.ndarray
    median: np.ndarray
    mean: np.ndarray
    bounds: dict[float, np.ndarray]


def score_predictive(dists: Sequence[PredictiveDist], observations: Sequence[float],
                     levels: Sequence[float] = DEFAULT_LEVELS) -> tuple[ScoreReport, CaseScores]:
    _check_lengths(dists, observations)
    obs = np.asarray(observations, dtype=float)
    crps = np.array([crps_mixture(d, y) for d, y in zip(dists, obs)])
    med = np.array([d.median() for d in dists])
    mean = np.array([d.mean() for d in dists])
    bounds = {lv: np.array([d.central_interval(lv) for d in dists]) for lv in levels}
    report = ScoreReport(
        mean_crps=float(crps.mean()),
        mae_median=mae(med, obs), mae_mean=mae(mean, obs),
        rmse_median=rmse(med, obs), rmse_mean=rmse(mean, obs),
        intervals={lv: _coverage_width(b, obs) for lv, b in bounds.items()},
        n_cases=len(obs),
    )
    return report, CaseScores(crps, med, mean, bounds)


def score_ensemble(cases: Sequence[ForecastCase],
                   levels: Sequence[float] = DEFAULT_LEVELS) -> ScoreReport:
    """Scores of the raw ensemble treated as a sample of its members."""
    forecasts, obs = archive_arrays(cases)
    _check_lengths(forecasts, obs)
    crps = np.array([crps_ensemble(f, y) for f, y in zip(forecasts, obs)])
    med = np.nanmedian(forecasts, axis=1)
    mean = np.nanmean(forecasts, axis=1)
    return ScoreReport(
        mean_crps=float(crps.mean()),
        mae_median=mae(med, obs), mae_mean=mae(mean, obs),
        rmse_median=rmse(med, obs), rmse_mean=rmse(mean, obs),
        intervals=ensemble_interval_stats(forecasts, obs, levels),
        n_cases=len(obs),
    )


def score_models(models_by_date: Mapping, cases: Sequence[ForecastCase],
                 levels: Sequence[float] = DEFAULT_LEVELS) -> tuple[ScoreReport, CaseScores]:
    dists = [build_predictive(models_by_date[c.date], c) for c in cases]
    return score_predictive(dists, [c.obs for c in cases], levels)

