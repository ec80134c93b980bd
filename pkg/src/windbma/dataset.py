"""Forecast/observation archives: CSV I/O, training windows and simulation."""
from __future__ import annotations

import csv
import datetime as dt
import io
import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ArchiveFormatError
from .mixture import MEMBER_LABELS, N_MEMBERS, BmaModel

logger = logging.getLogger(__name__)

CENSOR_THRESHOLD = 0.1
CSV_HEADER = ("date", "station", "obs") + MEMBER_LABELS
MISSING_TOKENS = ("", "NA")


def _fmt(x: float | None) -> str:
    return "NA" if x is None else repr(float(x))


@dataclass(frozen=True)
class ForecastCase:
    """One (date, station) record with its 11-member ensemble."""

    date: dt.date
    station: str
    obs: float
    control: float | None
    members: tuple[float | None, ...]

    def __post_init__(self):
        if len(self.members) != N_MEMBERS - 1:
            raise ValueError(f"expected 10 perturbed members, got {len(self.members)}")
        if not (self.obs >= 0.0 and math.isfinite(self.obs)):
            raise ValueError(f"observation must be finite and nonnegative, got {self.obs!r}")
        for v in (self.control, *self.members):
            if v is not None and not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"forecasts must be finite and nonnegative, got {v!r}")

    @classmethod
    def from_forecasts(cls, date: dt.date, station: str, obs: float,
                       forecasts: Sequence[float]) -> "ForecastCase":
        """Build from an 11-vector ``(control, l1..l10)`` with NaN for missing."""
        vals = [None if (v is None or math.isnan(v)) else float(v) for v in forecasts]
        return cls(date, station, float(obs), vals[0], tuple(vals[1:]))

    @property
    def forecasts(self) -> np.ndarray:
        return np.array([np.nan if v is None else v for v in (self.control, *self.members)])

    @property
    def n_missing(self) -> int:
        return sum(v is None for v in (self.control, *self.members))

    @property
    def key(self) -> tuple[dt.date, str]:
        return self.date, self.station


@dataclass(frozen=True)
class TrainingSet:
    """Cases from the calendar days ``window[0] .. window[1]`` (inclusive)."""

    cases: tuple[ForecastCase, ...]
    window: tuple[dt.date, dt.date]
    censor_threshold: float = CENSOR_THRESHOLD

    def __len__(self) -> int:
        return len(self.cases)

    @cached_property
    def forecasts(self) -> np.ndarray:
        if not self.cases:
            return np.empty((0, N_MEMBERS))
        return np.ascontiguousarray(np.vstack([c.forecasts for c in self.cases]))

    @cached_property
    def obs(self) -> np.ndarray:
        return np.array([c.obs for c in self.cases], dtype=float)


@dataclass(frozen=True)
class Archive:
    """Immutable collection of forecast cases keyed by (date, station)."""

    cases: tuple[ForecastCase, ...]
    n_rejected: int = field(default=0, compare=False)

    def __post_init__(self):
        ordered = tuple(sorted(self.cases, key=lambda c: (c.date, c.station)))
        seen = set()
        for c in ordered:
            if c.key in seen:
                raise ArchiveFormatError(f"duplicate record for {c.date} {c.station}")
            seen.add(c.key)
        object.__setattr__(self, "cases", ordered)

    def __len__(self) -> int:
        return len(self.cases)

    @cached_property
    def by_date(self) -> dict[dt.date, tuple[ForecastCase, ...]]:
        out: dict[dt.date, list[ForecastCase]] = {}
        for c in self.cases:
            out.setdefault(c.date, []).append(c)
        return {d: tuple(v) for d, v in out.items()}

    @property
    def stations(self) -> frozenset[str]:
        return frozenset(c.station for c in self.cases)

    @property
    def dates(self) -> list[dt.date]:
        return sorted(self.by_date)

    @property
    def date_range(self) -> tuple[dt.date, dt.date] | None:
        if not self.cases:
            return None
        return self.cases[0].date, self.cases[-1].date

    def cases_on(self, date: dt.date) -> tuple[ForecastCase, ...]:
        return self.by_date.get(date, ())

    def merge(self, other: "Archive") -> "Archive":
        return Archive(self.cases + other.cases)

    def to_dict(self) -> dict:
        return {
            "stations": sorted(self.stations),
            "date_range": [d.isoformat() for d in self.date_range] if self.cases else None,
            "cases": [
                {"date": c.date.isoformat(), "station": c.station, "obs": c.obs,
                 "control": c.control, "members": list(c.members)}
                for c in self.cases
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _parse_value(token: str, lineno: int, column: str) -> float | None:
    token = token.strip()
    if token in MISSING_TOKENS:
        return None
    try:
        return float(token)
    except ValueError:
        raise ArchiveFormatError(f"line {lineno}: cannot parse {column}={token!r}") from None


def parse_csv(text: str) -> Archive:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ArchiveFormatError("empty archive file") from None
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise ArchiveFormatError(f"line 1: expected header {','.join(CSV_HEADER)}")
    cases = []
    first_line: dict[tuple[dt.date, str], int] = {}
    rejected = 0
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != len(CSV_HEADER):
            raise ArchiveFormatError(
                f"line {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
        try:
            date = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise ArchiveFormatError(f"line {lineno}: bad date {row[0]!r}") from None
        station = row[1].strip()
        if not station:
            raise ArchiveFormatError(f"line {lineno}: empty station")
        key = (date, station)
        if key in first_line:
            raise ArchiveFormatError(
                f"lines {first_line[key]} and {lineno}: duplicate record for {date} {station}")
        first_line[key] = lineno
        obs = _parse_value(row[2], lineno, "obs")
        values = [_parse_value(tok, lineno, col) for tok, col in zip(row[3:], MEMBER_LABELS)]
        if obs is None:
            rejected += 1
            continue
        try:
            cases.append(ForecastCase(date, station, obs, values[0], tuple(values[1:])))
        except ValueError as exc:
            raise ArchiveFormatError(f"line {lineno}: {exc}") from None
    if rejected:
        logger.warning("rejected %d rows with missing observation", rejected)
    return Archive(tuple(cases), n_rejected=rejected)


def load(path: str | Path) -> Archive:
    """Read an archive from the canonical CSV format."""
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_csv(fh.read())


def format_csv(archive: Archive) -> str:
    lines = [",".join(CSV_HEADER)]
    for c in archive.cases:
        fields = [c.date.isoformat(), c.station, _fmt(c.obs), _fmt(c.control)]
        fields += [_fmt(v) for v in c.members]
        lines.append(",".join(fields))
    return "\n".join(lines) + "\n"


def save(archive: Archive, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_csv(archive))


def window(archive: Archive, target_date: dt.date, days: int) -> TrainingSet:
    """Cases dated ``target_date - days`` through ``target_date - 1``, all stations."""
    if days < 1:
        raise ValueError(f"window length must be at least 1 day, got {days}")
    start = target_date - dt.timedelta(days=days)
    end = target_date - dt.timedelta(days=1)
    cases: list[ForecastCase] = []
    for k in range(days):
        cases.extend(archive.cases_on(start + dt.timedelta(days=k)))
    return TrainingSet(tuple(cases), (start, end))


@dataclass(frozen=True)
class ForecastProcess:
    """Log-normal generator for synthetic ensembles.

    Each case draws a common level ``exp(N(level_log_mean, level_log_sd))``;
    the control and every perturbed member are the level times an independent
    log-normal factor with the given log-scale spread.
    """

    level_log_mean: float = math.log(4.0)
    level_log_sd: float = 0.5
    control_log_sd: float = 0.5
    member_log_sd: float = 0.5
    missing_prob: float = 0.0


def simulate(
    truth: BmaModel,
    n_days: int,
    n_stations: int,
    seed: int,
    *,
    start: dt.date = dt.date(2010, 10, 1),
    process: ForecastProcess | None = None,
) -> Archive:
    """Draw a synthetic archive from a known BMA model.

    For every case one member is picked as the "best" with probability equal
    to its BMA weight, and the observation is drawn from that member's gamma
    component. Observations under the censoring threshold are stored as 0.
    """
    process = process or ForecastProcess()
    rng = np.random.default_rng(seed)
    n = n_days * n_stations
    level = np.exp(rng.normal(process.level_log_mean, process.level_log_sd, n))
    spread = np.array([process.control_log_sd] + [process.member_log_sd] * (N_MEMBERS - 1))
    forecasts = level[:, None] * np.exp(rng.normal(0.0, 1.0, (n, N_MEMBERS)) * spread)
    weights = truth.member_weights()
    best = rng.choice(N_MEMBERS, size=n, p=weights / weights.sum())
    shape, scale = truth.link.shape_scale(forecasts[np.arange(n), best])
    obs = rng.gamma(shape, scale)
    obs[obs < CENSOR_THRESHOLD] = 0.0
    if process.missing_prob > 0:
        forecasts[rng.random((n, N_MEMBERS)) < process.missing_prob] = np.nan

    stations = [f"S{k + 1:02d}" for k in range(n_stations)]
    cases = []
    for i in range(n):
        day, station = divmod(i, n_stations)
        cases.append(ForecastCase.from_forecasts(
            start + dt.timedelta(days=day), stations[station], obs[i], forecasts[i]))
    return Archive(tuple(cases))


def archive_arrays(cases: Iterable[ForecastCase]) -> tuple[np.ndarray, np.ndarray]:
    """Stack cases into a forecast matrix (n, 11) and observation vector (n,)."""
    cases = list(cases)
    if not cases:
        return np.empty((0, N_MEMBERS)), np.empty(0)
    return (np.ascontiguousarray(np.vstack([c.forecasts for c in cases])),
            np.array([c.obs for c in cases]))
