"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py --cases 600 --repeat 5 [--json out.json]

Times the hot kernels on a synthetic training window, plus one complete EM
fit per backend, and checks that both backends return the same numbers.
"""
from __future__ import annotations

import argparse
import datetime as dt
import importlib
import json
import math
import timeit

import numpy as np

from windbma import kernels
from windbma.dataset import simulate, window
from windbma.estimation import em_fit
from windbma.mixture import BmaModel, GroupScheme, LinkParams

KERNEL_NAMES = ("gamma_cdf", "gamma_pdf", "gamma_cdf_array", "gamma_pdf_array", "mixture_cdf",
                "mixture_pdf", "component_densities", "mixture_loglik")


def load_backends() -> dict:
    out = {"python": importlib.import_module("windbma._pykernels")}
    try:
        out["cython"] = importlib.import_module("windbma._ckernels")
    except ImportError:
        pass
    return out


def workloads(n_cases: int, seed: int):
    truth = BmaModel.two_group(0.4, LinkParams(0.3, 1.1, 0.6, 0.2))
    n_stations = 10
    n_days = max(1, math.ceil(n_cases / n_stations))
    archive = simulate(truth, n_days, n_stations, seed)
    train = window(archive, dt.date(2010, 10, 1) + dt.timedelta(days=n_days), n_days)
    f, y = train.forecasts, train.obs
    w = truth.member_weights()
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.3, 40.0, f.size)
    sc = rng.uniform(0.05, 3.0, f.size)
    x = rng.uniform(0.0, 30.0, f.size)
    link = (0.3, 1.1, 0.6, 0.2, 0.1, 1e-4)
    shapes, scales = truth.link.shape_scale(f[0])
    return train, {
        "gamma_cdf": lambda k: [k.gamma_cdf(x[i], a[i], sc[i]) for i in range(1000)],
        "gamma_pdf": lambda k: [k.gamma_pdf(x[i], a[i], sc[i]) for i in range(1000)],
        "gamma_cdf_array": lambda k: k.gamma_cdf_array(x, a, sc),
        "gamma_pdf_array": lambda k: k.gamma_pdf_array(x, a, sc),
        "mixture_cdf": lambda k: [k.mixture_cdf(v, w, shapes, scales) for v in x[:1000]],
        "mixture_pdf": lambda k: [k.mixture_pdf(v, w, shapes, scales) for v in x[:1000]],
        "component_densities": lambda k: k.component_densities(f, y, *link),
        "mixture_loglik": lambda k: k.mixture_loglik(f, y, w, *link),
    }


def time_call(fn, repeat: int) -> float:
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def time_em(backend, train, repeat: int) -> tuple[float, BmaModel]:
    saved = {name: getattr(kernels, name) for name in KERNEL_NAMES}
    try:
        for name in KERNEL_NAMES:
            setattr(kernels, name, getattr(backend, name))
        best, model = math.inf, None
        for _ in range(max(1, repeat // 2)):
            t0 = timeit.default_timer()
            model = em_fit(train, (0.3, 1.1), GroupScheme.two_group())
            best = min(best, timeit.default_timer() - t0)
        return best, model
    finally:
        for name, fn in saved.items():
            setattr(kernels, name, fn)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--cases", type=int, default=600)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--skip-em", action="store_true", help="kernels only")
    parser.add_argument("--json", help="write results to this file")
    args = parser.parse_args(argv)

    backends = load_backends()
    train, jobs = workloads(args.cases, args.seed)
    results: dict[str, dict[str, float]] = {name: {} for name in jobs}
    for job, fn in jobs.items():
        outputs = {}
        for label, mod in backends.items():
            results[job][label] = time_call(lambda: fn(mod), args.repeat)
            outputs[label] = np.asarray(fn(mod), dtype=float)
        if len(outputs) == 2:
            np.testing.assert_allclose(outputs["cython"], outputs["python"], rtol=1e-10)
    if not args.skip_em:
        models = {}
        results["em_fit"] = {}
        for label, mod in backends.items():
            results["em_fit"][label], models[label] = time_em(mod, train, args.repeat)
        if len(models) == 2:
            a, b = models["cython"], models["python"]
            print(f"em_fit omega: cython {a.group_weights[0]:.6f}  "
                  f"python {b.group_weights[0]:.6f}")

    labels = list(backends)
    print(f"{len(train)} training cases, active backend: {kernels.BACKEND}")
    print(f"{'kernel':<22}" + "".join(f"{lab:>14}" for lab in labels) + f"{'speedup':>10}")
    for job, row in results.items():
        line = f"{job:<22}" + "".join(f"{row[lab] * 1e3:>12.3f}ms" for lab in labels)
        if "cython" in row:
            line += f"{row['python'] / row['cython']:>9.1f}x"
        print(line)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump({"cases": len(train), "seconds": results}, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
