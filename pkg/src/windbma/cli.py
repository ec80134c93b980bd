"""Command line interface: fit, predict, verify, sweep, weights and simulate.

Every command writes machine-readable CSV/JSON into ``--out-dir`` and is
deterministic given its inputs and ``--seed``. Exit codes: 0 success,
1 runtime error, 2 insufficient data.
"""
from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dataset
from .dataset import Archive, ForecastProcess
from .errors import ArchiveFormatError, InsufficientDataError, ParameterDomainError
from .estimation import EmConfig, fit
from .mixture import BmaModel, GroupScheme, LinkParams, Scheme, build_predictive
from .verification import (
    DEFAULT_LEVELS,
    ScoreReport,
    _csv,
    ks_uniform_test,
    pit_from_dists,
    pit_histogram,
    rank_histogram,
    reports_csv,
    score_ensemble,
    score_predictive,
)

logger = logging.getLogger("windbma")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INSUFFICIENT = 2
REAL_MIXTURE_THRESHOLD = 0.001


@dataclass(frozen=True)
class RunConfig:
    data: Path | None = None
    scheme: str = Scheme.TWO_GROUP.value
    window_days: int = 28
    levels: tuple[float, ...] = DEFAULT_LEVELS
    seed: int = 0
    out_dir: Path = Path(".")
    em: EmConfig = field(default_factory=EmConfig)

    def __post_init__(self):
        if self.window_days < 1:
            raise ValueError("window_days must be at least 1")
        if not all(0.0 < lv < 1.0 for lv in self.levels):
            raise ValueError(f"interval levels must lie in (0, 1), got {self.levels}")

    @property
    def group_scheme(self) -> GroupScheme:
        return GroupScheme.from_name(self.scheme)

    def load(self) -> Archive:
        if self.data is None:
            raise ValueError("--data is required")
        return dataset.load(self.data)


def _dates(start: dt.date, end: dt.date) -> list[dt.date]:
    if end < start:
        raise ValueError(f"empty date range {start}..{end}")
    return [start + dt.timedelta(days=k) for k in range((end - start).days + 1)]


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _level_key(level: float) -> str:
    return f"{level:g}"


# --- pipeline -------------------------------------------------------------


@dataclass
class DayFit:
    date: dt.date
    model: BmaModel
    cases: tuple[dataset.ForecastCase, ...]
    max_train_date: dt.date


def rolling_fits(archive: Archive, dates: Sequence[dt.date], window_days: int,
                 scheme: GroupScheme, cfg: EmConfig, *,
                 require_cases: bool = True) -> list[DayFit]:
    """Fit one model per date on its preceding window; unfit days are skipped."""
    out = []
    for day in dates:
        cases = tuple(c for c in archive.cases_on(day) if c.n_missing < 11)
        if require_cases and not cases:
            logger.info("skipping %s: no cases to verify", day)
            continue
        try:
            model = fit(archive, day, window_days, scheme, cfg)
        except InsufficientDataError as exc:
            logger.warning("skipping %s: %s", day, exc)
            continue
        train = dataset.window(archive, day, window_days)
        out.append(DayFit(day, model, cases, max(c.date for c in train.cases)))
    return out


@dataclass
class VerifyResult:
    bma: ScoreReport
    raw: ScoreReport
    ks: tuple[float, float]
    rank_hist: object
    pit_hist: object
    pit: np.ndarray
    days: list[DayFit]
    per_case: list[dict]


def run_verification(archive: Archive, start: dt.date, end: dt.date, cfg: RunConfig,
                     pit_bins: int = 11) -> VerifyResult:
    days = rolling_fits(archive, _dates(start, end), cfg.window_days, cfg.group_scheme, cfg.em)
    if not days:
        raise InsufficientDataError(f"no verifiable days between {start} and {end}")
    cases = [c for d in days for c in d.cases]
    dists = [build_predictive(d.model, c) for d in days for c in d.cases]
    obs = np.array([c.obs for c in cases])
    bma, per = score_predictive(dists, obs, cfg.levels)
    raw = score_ensemble(cases, cfg.levels)
    pit = pit_from_dists(dists, obs, np.random.default_rng(cfg.seed + 1))
    rows = []
    for i, c in enumerate(cases):
        row = {"date": c.date.isoformat(), "station": c.station, "obs": c.obs,
               "bma_median": per.median[i], "bma_mean": per.mean[i],
               "bma_crps": per.crps[i], "pit": pit[i]}
        for lv in cfg.levels:
            row[f"lower_{_level_key(lv)}"] = per.bounds[lv][i, 0]
            row[f"upper_{_level_key(lv)}"] = per.bounds[lv][i, 1]
        rows.append(row)
    return VerifyResult(bma, raw, ks_uniform_test(pit), rank_histogram(cases, cfg.seed),
                        pit_histogram(pit, pit_bins), pit, days, rows)


def _day_row(d: DayFit) -> dict:
    m = d.model
    row = {"date": d.date.isoformat(),
           "window_start": m.fit_window[0].isoformat(),
           "window_end": m.fit_window[1].isoformat(),
           "max_train_date": d.max_train_date.isoformat(),
           "n_train_cases": m.n_train_cases,
           "n_cases": len(d.cases)}
    row.update(m.weights_dict())
    row.update({"b0": m.link.b0, "b1": m.link.b1, "c0": m.link.c0, "c1": m.link.c1})
    return row


def _rows_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    header = list(rows[0])
    return _csv(header, [[r[k] for k in header] for r in rows])


# --- commands -------------------------------------------------------------


def cmd_fit(cfg: RunConfig, target_date: dt.date) -> Path:
    archive = cfg.load()
    model = fit(archive, target_date, cfg.window_days, cfg.group_scheme, cfg.em)
    path = cfg.out_dir / f"model_{target_date.isoformat()}.json"
    _write(path, _dump(model.to_dict()))
    logger.info("wrote %s", path)
    return path


def cmd_predict(cfg: RunConfig, model: BmaModel, target_date: dt.date) -> list[dict]:
    """Median, mean and central intervals for every case on ``target_date``."""
    archive = cfg.load()
    cases = [c for c in archive.cases_on(target_date) if c.n_missing < 11]
    if not cases:
        raise InsufficientDataError(f"no forecasts on {target_date}")
    rows = []
    for c in cases:
        dist = build_predictive(model, c)
        row = {"date": c.date.isoformat(), "station": c.station,
               "median": dist.median(), "mean": dist.mean()}
        for lv in cfg.levels:
            lo, hi = dist.central_interval(lv)
            row[f"lower_{_level_key(lv)}"] = lo
            row[f"upper_{_level_key(lv)}"] = hi
        rows.append(row)
    _write(cfg.out_dir / f"predict_{target_date.isoformat()}.csv", _rows_csv(rows))
    return rows


def cmd_verify(cfg: RunConfig, start: dt.date, end: dt.date) -> VerifyResult:
    res = run_verification(cfg.load(), start, end, cfg)
    out = cfg.out_dir
    summary = {
        "scheme": cfg.scheme,
        "window_days": cfg.window_days,
        "verify_from": start.isoformat(),
        "verify_to": end.isoformat(),
        "seed": cfg.seed,
        "bma": res.bma.to_dict(),
        "raw": res.raw.to_dict(),
        "ks": {"statistic": res.ks[0], "p_value": res.ks[1]},
        "rank_histogram": res.rank_hist.to_dict(),
        "pit_histogram": res.pit_hist.to_dict(),
    }
    _write(out / "scores.json", _dump(summary))
    _write(out / "scores.csv", reports_csv({"bma": res.bma, "raw": res.raw}))
    _write(out / "rank_histogram.csv", res.rank_hist.to_csv())
    _write(out / "pit_histogram.csv", res.pit_hist.to_csv())
    _write(out / "per_day.csv", _rows_csv([_day_row(d) for d in res.days]))
    _write(out / "per_case.csv", _rows_csv(res.per_case))
    return res


def cmd_sweep(cfg: RunConfig, start: dt.date, end: dt.date, min_days: int = 10,
              max_days: int = 60) -> list[dict]:
    """Verification scores as a function of training window length.

    The verification range is the same for every window length, so the
    archive must reach back ``max_days`` before ``start``.
    """
    if not 1 <= min_days <= max_days:
        raise ValueError(f"invalid window range {min_days}..{max_days}")
    archive = cfg.load()
    if not archive.cases:
        raise InsufficientDataError("archive is empty")
    needed = start - dt.timedelta(days=max_days)
    first = archive.date_range[0]
    if first > needed:
        raise InsufficientDataError(
            f"archive starts {first}; a {max_days}-day window before {start} "
            f"needs data from {needed}")
    rows = []
    for days in range(min_days, max_days + 1):
        run = RunConfig(cfg.data, cfg.scheme, days, cfg.levels, cfg.seed, cfg.out_dir, cfg.em)
        fits = rolling_fits(archive, _dates(start, end), days, run.group_scheme, run.em)
        if not fits:
            raise InsufficientDataError(f"no verifiable days between {start} and {end}")
        dists = [build_predictive(d.model, c) for d in fits for c in d.cases]
        obs = [c.obs for d in fits for c in d.cases]
        rep, _ = score_predictive(dists, obs, cfg.levels)
        row = {"window_days": days, "verify_from": start.isoformat(),
               "verify_to": end.isoformat(), "n_days": len(fits), "n_cases": rep.n_cases,
               "mean_crps": rep.mean_crps, "mae_median": rep.mae_median,
               "mae_mean": rep.mae_mean, "rmse_median": rep.rmse_median,
               "rmse_mean": rep.rmse_mean}
        for lv, (cov, width) in sorted(rep.intervals.items()):
            row[f"coverage_{_level_key(lv)}"] = cov
            row[f"avg_width_{_level_key(lv)}"] = width
        rows.append(row)
        logger.info("window %d: crps %.4f", days, rep.mean_crps)
    _write(cfg.out_dir / "sweep.csv", _rows_csv(rows))
    return rows


def weight_summary(rows: list[dict], weight_keys: Sequence[str], scheme: GroupScheme) -> dict:
    params = list(weight_keys) + ["b0", "b1", "c0", "c1"]
    table = {k: np.array([r[k] for r in rows], dtype=float) for k in params}
    per_member = np.column_stack([
        table["omega"], (1.0 - table["omega"]) / 10.0
    ]) if scheme.variant is Scheme.TWO_GROUP else np.column_stack(
        [table[k] for k in weight_keys])
    real = np.all(per_member > REAL_MIXTURE_THRESHOLD, axis=1)
    rel_sd = {}
    for k in params:
        v = table[k]
        mean = float(np.mean(v))
        sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        rel_sd[k] = sd / abs(mean) if mean != 0 else float("inf")
    return {"n_days": len(rows), "real_mixture_fraction": float(real.mean()),
            "real_mixture_threshold": REAL_MIXTURE_THRESHOLD,
            "mean": {k: float(np.mean(table[k])) for k in params},
            "relative_sd": rel_sd}


def cmd_weights(cfg: RunConfig, start: dt.date, end: dt.date) -> tuple[list[dict], dict]:
    archive = cfg.load()
    scheme = cfg.group_scheme
    fits = rolling_fits(archive, _dates(start, end), cfg.window_days, scheme, cfg.em)
    if not fits:
        raise InsufficientDataError(f"no verifiable days between {start} and {end}")
    rows = [_day_row(d) for d in fits]
    keys = list(fits[0].model.weights_dict())
    summary = weight_summary(rows, keys, scheme)
    summary.update({"scheme": cfg.scheme, "window_days": cfg.window_days,
                    "from": start.isoformat(), "to": end.isoformat()})
    _write(cfg.out_dir / "weights.csv", _rows_csv(rows))
    _write(cfg.out_dir / "weights_summary.json", _dump(summary))
    return rows, summary


def cmd_simulate(cfg: RunConfig, truth: BmaModel, n_days: int, n_stations: int,
                 start: dt.date, process: ForecastProcess | None = None,
                 out: Path | None = None) -> Path:
    archive = dataset.simulate(truth, n_days, n_stations, cfg.seed, start=start, process=process)
    path = out or cfg.out_dir / "archive.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset.save(archive, path)
    return path


# --- argument parsing -----------------------------------------------------


def _date(text: str) -> dt.date:
    try:
        return dt.date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}") from None


def _levels(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data", type=Path, help="archive CSV")
    common.add_argument("--scheme", choices=[s.value for s in Scheme], default="two-group")
    common.add_argument("--window-days", type=int, default=28)
    common.add_argument("--levels", type=_levels, default=DEFAULT_LEVELS,
                        help="comma-separated central interval levels")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", type=Path, default=Path("."))
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        prog="windbma", description="BMA calibration of ensemble wind speed forecasts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit the model for one date")
    p.add_argument("--date", type=_date, required=True)

    p = sub.add_parser("predict", parents=[common], help="predictive summaries from a model")
    p.add_argument("--model", type=Path, required=True, help="model JSON from fit")
    p.add_argument("--date", type=_date, required=True)

    for name, text in (("verify", "fit and score every date in a range"),
                       ("weights", "time series of fitted weights and link parameters")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--from", dest="start", type=_date, required=True)
        p.add_argument("--to", dest="end", type=_date, required=True)

    p = sub.add_parser("sweep", parents=[common], help="scores versus training window length")
    p.add_argument("--from", dest="start", type=_date, required=True)
    p.add_argument("--to", dest="end", type=_date, required=True)
    p.add_argument("--min-days", type=int, default=10)
    p.add_argument("--max-days", type=int, default=60)

    p = sub.add_parser("simulate", parents=[common], help="draw a synthetic archive")
    p.add_argument("--truth", type=Path, help="model JSON to simulate from")
    p.add_argument("--omega", type=float, default=0.4)
    p.add_argument("--omega-c", type=float)
    p.add_argument("--omega-o", type=float)
    p.add_argument("--omega-e", type=float)
    p.add_argument("--b0", type=float, default=0.3)
    p.add_argument("--b1", type=float, default=1.1)
    p.add_argument("--c0", type=float, default=0.6)
    p.add_argument("--c1", type=float, default=0.2)
    p.add_argument("--days", type=int, default=60)
    p.add_argument("--stations", type=int, default=10)
    p.add_argument("--start", type=_date, default=dt.date(2010, 10, 1))
    p.add_argument("--out", type=Path, help="output CSV (default OUT_DIR/archive.csv)")
    defaults = ForecastProcess()
    p.add_argument("--level-log-mean", type=float, default=defaults.level_log_mean)
    p.add_argument("--level-log-sd", type=float, default=defaults.level_log_sd)
    p.add_argument("--control-log-sd", type=float, default=defaults.control_log_sd)
    p.add_argument("--member-log-sd", type=float, default=defaults.member_log_sd)
    p.add_argument("--missing-prob", type=float, default=defaults.missing_prob)
    return parser


def _truth_from_args(args) -> BmaModel:
    if args.truth is not None:
        return BmaModel.from_json(args.truth.read_text(encoding="utf-8"))
    link = LinkParams(args.b0, args.b1, args.c0, args.c1)
    if args.scheme == Scheme.THREE_GROUP.value:
        parts = (args.omega_c, args.omega_o, args.omega_e)
        if any(v is None for v in parts):
            raise ValueError("three-group truth needs --omega-c, --omega-o and --omega-e")
        return BmaModel.three_group(*parts, link)
    return BmaModel.two_group(args.omega, link)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig(args.data, args.scheme, args.window_days, tuple(args.levels),
                        args.seed, args.out_dir)
        if args.command == "fit":
            print(cmd_fit(cfg, args.date))
        elif args.command == "predict":
            model = BmaModel.from_json(args.model.read_text(encoding="utf-8"))
            rows = cmd_predict(cfg, model, args.date)
            print(f"wrote {len(rows)} rows")
        elif args.command == "verify":
            res = cmd_verify(cfg, args.start, args.end)
            print(f"bma crps {res.bma.mean_crps:.4f}  raw crps {res.raw.mean_crps:.4f}  "
                  f"ks p {res.ks[1]:.4g}  cases {res.bma.n_cases}")
        elif args.command == "sweep":
            rows = cmd_sweep(cfg, args.start, args.end, args.min_days, args.max_days)
            print(f"wrote {len(rows)} rows to {cfg.out_dir / 'sweep.csv'}")
        elif args.command == "weights":
            rows, summary = cmd_weights(cfg, args.start, args.end)
            print(f"{len(rows)} days, real mixture fraction "
                  f"{summary['real_mixture_fraction']:.4f}")
        elif args.command == "simulate":
            process = ForecastProcess(args.level_log_mean, args.level_log_sd,
                                      args.control_log_sd, args.member_log_sd,
                                      args.missing_prob)
            print(cmd_simulate(cfg, _truth_from_args(args), args.days, args.stations,
                               args.start, process, args.out))
    except InsufficientDataError as exc:
        print(f"windbma: insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (ValueError, ArchiveFormatError, ParameterDomainError, OSError, KeyError) as exc:
        print(f"windbma: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
