"""BMA gamma mixtures over exchangeable groups of ensemble members.

Member order everywhere in the package is ``(control, l1, ..., l10)``; the
odd-numbered perturbed members ``l1, l3, ...`` add the initial-condition
perturbations and the even-numbered ones subtract them.
"""
from __future__ import annotations

import datetime as dt
import enum
import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np

from . import kernels
from .errors import EmptyCaseError, ParameterDomainError
from .gamma import GammaLaw, _check_probability, invert_cdf

if TYPE_CHECKING:
    from .dataset import ForecastCase

N_MEMBERS = 11
MEMBER_LABELS = ("fc",) + tuple(f"fl{j}" for j in range(1, 11))
# link values below this are clamped before building a gamma component
LINK_FLOOR = 1e-4
WEIGHT_SUM_TOL = 1e-10


class Scheme(str, enum.Enum):
    TWO_GROUP = "two-group"
    THREE_GROUP = "three-group"


@dataclass(frozen=True)
class GroupScheme:
    """Assignment of the 11 members to exchangeable groups."""

    variant: Scheme
    group_of_member: tuple[int, ...]
    group_names: tuple[str, ...]

    @classmethod
    def two_group(cls) -> "GroupScheme":
        return cls(Scheme.TWO_GROUP, (0,) + (1,) * 10, ("control", "perturbed"))

    @classmethod
    def three_group(cls) -> "GroupScheme":
        odd_even = tuple(1 if j % 2 == 1 else 2 for j in range(1, 11))
        return cls(Scheme.THREE_GROUP, (0,) + odd_even, ("control", "odd", "even"))

    @classmethod
    def from_name(cls, name: str | Scheme) -> "GroupScheme":
        variant = Scheme(name)
        return cls.two_group() if variant is Scheme.TWO_GROUP else cls.three_group()

    @property
    def n_groups(self) -> int:
        return len(self.group_names)

    @property
    def group_sizes(self) -> tuple[int, ...]:
        return tuple(self.group_of_member.count(g) for g in range(self.n_groups))

    def members_of(self, group: int) -> list[int]:
        return [j for j, g in enumerate(self.group_of_member) if g == group]

    def expand(self, group_weights: Sequence[float]) -> np.ndarray:
        """Per-member weight vector from per-group (per-member) weights."""
        return np.asarray(group_weights, dtype=float)[list(self.group_of_member)]

    def uniform_weights(self) -> tuple[float, ...]:
        return (1.0 / N_MEMBERS,) * self.n_groups


@dataclass(frozen=True)
class LinkParams:
    """Shared mean (``b0 + b1 f``) and sd (``c0 + c1 f``) link coefficients."""

    b0: float
    b1: float
    c0: float
    c1: float

    def mean(self, f):
        return np.maximum(self.b0 + self.b1 * np.asarray(f, dtype=float), LINK_FLOOR)

    def sd(self, f):
        return np.maximum(self.c0 + self.c1 * np.asarray(f, dtype=float), LINK_FLOOR)

    def shape_scale(self, f) -> tuple[np.ndarray, np.ndarray]:
        mu = self.mean(f)
        sd = self.sd(f)
        return (mu / sd) ** 2, sd * sd / mu

    def law(self, f: float) -> GammaLaw:
        shape, scale = self.shape_scale(f)
        return GammaLaw(float(shape), float(scale))


@dataclass(frozen=True)
class BmaModel:
    """A fitted exchangeable-group BMA model.

    ``group_weights`` holds the weight *per member* of each group: ``(w, (1-w)/10)``
    for the two-group model and ``(w_c, w_o, w_e)`` for the three-group one.
    """

    scheme: GroupScheme
    link: LinkParams
    group_weights: tuple[float, ...]
    fit_window: tuple[dt.date, dt.date] | None = None
    n_train_cases: int = 0
    loglik_path: tuple[float, ...] = field(default=(), compare=False, repr=False)
    converged: bool | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        w = tuple(float(v) for v in self.group_weights)
        if len(w) != self.scheme.n_groups:
            raise ParameterDomainError(
                f"{self.scheme.variant.value} needs {self.scheme.n_groups} weights, got {len(w)}"
            )
        if any(v < 0 or not math.isfinite(v) for v in w):
            raise ParameterDomainError(f"weights must be nonnegative, got {w}")
        total = sum(n * v for n, v in zip(self.scheme.group_sizes, w))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ParameterDomainError(f"member weights sum to {total!r}, not 1")
        object.__setattr__(self, "group_weights", w)

    @classmethod
    def two_group(cls, omega: float, link: LinkParams, **kw) -> "BmaModel":
        return cls(GroupScheme.two_group(), link, (omega, (1.0 - omega) / 10.0), **kw)

    @classmethod
    def three_group(cls, omega_c: float, omega_o: float, omega_e: float, link: LinkParams,
                    **kw) -> "BmaModel":
        return cls(GroupScheme.three_group(), link, (omega_c, omega_o, omega_e), **kw)

    def member_weights(self) -> np.ndarray:
        return self.scheme.expand(self.group_weights)

    def weights_dict(self) -> dict[str, float]:
        if self.scheme.variant is Scheme.TWO_GROUP:
            return {"omega": self.group_weights[0]}
        wc, wo, we = self.group_weights
        return {"omega_c": wc, "omega_o": wo, "omega_e": we}

    def to_dict(self) -> dict:
        window = None
        if self.fit_window is not None:
            window = {"start": self.fit_window[0].isoformat(), "end": self.fit_window[1].isoformat()}
        return {
            "scheme": self.scheme.variant.value,
            "b0": self.link.b0,
            "b1": self.link.b1,
            "c0": self.link.c0,
            "c1": self.link.c1,
            "weights": self.weights_dict(),
            "fit_window": window,
            "n_train_cases": self.n_train_cases,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: Mapping) -> "BmaModel":
        scheme = GroupScheme.from_name(d["scheme"])
        link = LinkParams(float(d["b0"]), float(d["b1"]), float(d["c0"]), float(d["c1"]))
        weights = d["weights"]
        if scheme.variant is Scheme.TWO_GROUP:
            omega = float(weights["omega"])
            group_weights = (omega, (1.0 - omega) / 10.0)
        else:
            group_weights = tuple(float(weights[k]) for k in ("omega_c", "omega_o", "omega_e"))
        window = d.get("fit_window")
        if window:
            window = (dt.date.fromisoformat(window["start"]), dt.date.fromisoformat(window["end"]))
        return cls(scheme, link, group_weights, window, int(d.get("n_train_cases", 0)))

    @classmethod
    def from_json(cls, text: str) -> "BmaModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class PredictiveDist:
    """Gamma mixture predictive distribution for a single forecast case."""

    weights: np.ndarray
    shapes: np.ndarray
    scales: np.ndarray
    source_case: "ForecastCase | None" = None

    @property
    def components(self) -> list[tuple[float, GammaLaw]]:
        return [(float(w), GammaLaw(float(a), float(s)))
                for w, a, s in zip(self.weights, self.shapes, self.scales)]

    def component_means(self) -> np.ndarray:
        return self.shapes * self.scales

    def component_sds(self) -> np.ndarray:
        return np.sqrt(self.shapes) * self.scales

    def pdf(self, x: float) -> float:
        return kernels.mixture_pdf(float(x), self.weights, self.shapes, self.scales)

    def cdf(self, x: float) -> float:
        return kernels.mixture_cdf(float(x), self.weights, self.shapes, self.scales)

    def mean(self) -> float:
        return float(np.dot(self.weights, self.component_means()))

    def quantile(self, p: float) -> float:
        _check_probability(p)
        hi = float(np.max(self.component_means() + 20.0 * self.component_sds()))
        return invert_cdf(self.cdf, self.pdf, p, hi)

    def median(self) -> float:
        return self.quantile(0.5)

    def central_interval(self, level: float) -> tuple[float, float]:
        if not 0.0 < level < 1.0:
            raise ParameterDomainError(f"interval level must lie in (0, 1), got {level!r}")
        alpha = 1.0 - level
        return self.quantile(alpha / 2.0), self.quantile(1.0 - alpha / 2.0)


def build_predictive(model: BmaModel, case: "ForecastCase") -> PredictiveDist:
    """Instantiate the model's mixture at one case.

    Missing members are dropped and the remaining weights renormalised. If
    every remaining member has zero weight, they share the mass equally.
    """
    f = np.asarray(case.forecasts, dtype=float)
    present = ~np.isnan(f)
    if not present.any():
        raise EmptyCaseError(f"no ensemble members available for {case.date} {case.station}")
    w = model.member_weights()[present]
    if not present.all():
        total = w.sum()
        w = w / total if total > 0 else np.full(w.shape, 1.0 / w.size)
    shapes, scales = model.link.shape_scale(f[present])
    return PredictiveDist(w, shapes, scales, case)
