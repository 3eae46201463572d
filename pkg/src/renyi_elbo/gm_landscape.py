"""Where the prior minimizing the Renyi objective leaves P_Y: a bivariate
Gaussian study.

(x, y) is bivariate normal, W(y|x) its conditional, p_y the true latent
marginal and q_y a candidate Gaussian prior. The landscape value is

    Ibar = E_x[ D_a(W(.|x) || q_y) - D_a(W(.|x) || p_y) ],

which is zero at q_y = p_y; a negative value means some prior beats the
true marginal.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .divergence import Gaussian1, OrderLike, as_order, renyi_divergence_gaussian
from .errors import InfeasibleOrderError, InvalidDistributionError
from .oracle import OracleResult

NEGATIVE_THRESHOLD = -1e-9


@dataclass(frozen=True)
class BivariateParams:
    mu_x: float = 0.0
    sigma_x: float = 1.0
    mu_y: float = 0.0
    sigma_y: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise InvalidDistributionError("standard deviations must be positive")
        if not abs(self.rho) < 1:
            raise InvalidDistributionError("|rho| must be below 1; use ibar_rho1 for the limit")

    @property
    def cond_variance(self) -> float:
        return (1.0 - self.rho**2) * self.sigma_y**2

    @property
    def slope(self) -> float:
        return self.sigma_y / self.sigma_x * self.rho

    @property
    def intercept(self) -> float:
        return self.mu_y - self.slope * self.mu_x

    def marginal_y(self) -> Gaussian1:
        return Gaussian1(self.mu_y, self.sigma_y**2)


@dataclass(frozen=True)
class PriorParams:
    mu_yq: float
    sigma_yq: float

    def __post_init__(self):
        if not self.sigma_yq > 0:
            raise InvalidDistributionError("prior standard deviation must be positive")

    def as_gaussian(self) -> Gaussian1:
        return Gaussian1(self.mu_yq, self.sigma_yq**2)

    @classmethod
    def from_ratio(cls, params: BivariateParams, var_ratio: float, mean_gap: float) -> "PriorParams":
        """Prior with sigma_y^2 / sigma_yq^2 = var_ratio and mu_y - mu_yq = mean_gap."""
        return cls(params.mu_y - mean_gap, params.sigma_y / math.sqrt(var_ratio))


def conditional(params: BivariateParams, x: float) -> Gaussian1:
    return Gaussian1(params.intercept + params.slope * x, params.cond_variance)


def feasibility(order: OrderLike, params: BivariateParams, prior: PriorParams) -> bool:
    a = as_order(order).alpha
    base = (1.0 - a) * params.cond_variance
    return base + a * params.sigma_y**2 > 0 and base + a * prior.sigma_yq**2 > 0


def _require_feasible(order, params, prior) -> float:
    a = as_order(order).alpha
    if not feasibility(a, params, prior):
        raise InfeasibleOrderError(
            f"order {a} makes a combined variance non-positive for these parameters"
        )
    return a


def ibar_closed(order: OrderLike, params: BivariateParams, prior: PriorParams) -> float:
    """Closed form of the landscape value.

    The per-x divergence difference is a quadratic in the conditional mean
    plus an x-free log term; averaging over x only needs
    E[(mu_c(x) - m)^2] = (mu_y - m)^2 + rho^2 sigma_y^2.
    """
    a = _require_feasible(order, params, prior)
    var_y, var_q = params.sigma_y**2, prior.sigma_yq**2
    base = (1.0 - a) * params.cond_variance
    comb_q = base + a * var_q
    comb_p = base + a * var_y
    spread = params.rho**2 * var_y
    gap_sq = (params.mu_y - prior.mu_yq) ** 2
    mean_part = 0.5 * a * ((gap_sq + spread) / comb_q - spread / comb_p)
    log_part = (math.log(comb_q / comb_p) + a * math.log(var_y / var_q)) / (2.0 * (1.0 - a))
    return mean_part + log_part


@functools.lru_cache(maxsize=16)
def _hermite_rule(nodes: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    t, w = np.polynomial.hermite_e.hermegauss(nodes)
    return tuple(t.tolist()), tuple((w / math.sqrt(2.0 * math.pi)).tolist())


def _hermite_average(order, params, prior, nodes: int) -> float:
    t, w = _hermite_rule(nodes)
    order = as_order(order)
    q, p = prior.as_gaussian(), params.marginal_y()
    total = 0.0
    for ti, wi in zip(t, w):
        cond = conditional(params, params.mu_x + params.sigma_x * ti)
        total += wi * (
            renyi_divergence_gaussian(cond, q, order) - renyi_divergence_gaussian(cond, p, order)
        )
    return total


def ibar_oracle(
    order: OrderLike, params: BivariateParams, prior: PriorParams, budget: int = 64
) -> OracleResult:
    """Gauss-Hermite average over x of the per-x divergence difference.

    The error estimate is the change when the node count doubles.
    """
    a = _require_feasible(order, params, prior)
    coarse = _hermite_average(a, params, prior, budget)
    fine = _hermite_average(a, params, prior, 2 * budget)
    return OracleResult(fine, abs(fine - coarse))


def ibar_rho1(params: BivariateParams, prior: PriorParams) -> float:
    """Completely correlated limit; independent of the order."""
    ratio = params.sigma_y**2 / prior.sigma_yq**2
    gap_sq = (params.mu_y - prior.mu_yq) ** 2
    return 0.5 * (gap_sq / prior.sigma_yq**2 + ratio - 1.0 - math.log(ratio))


@dataclass(frozen=True)
class GmGrid:
    alphas: tuple = (0.25, 0.5, 0.75, 1.5, 10.0)
    rho_sqs: tuple = (0.0, 0.25, 0.5, 0.75, 0.99)
    var_ratios: tuple = tuple(np.geomspace(0.25, 4.0, 16).tolist())
    mean_gaps: tuple = tuple(np.linspace(0.0, 3.0, 13).tolist())
    baseline: BivariateParams = field(default_factory=BivariateParams)

    def __post_init__(self):
        for name in ("alphas", "rho_sqs", "var_ratios", "mean_gaps"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ValueError(f"grid axis {name} is empty")
            object.__setattr__(self, name, values)
        if any(not 0 <= r < 1 for r in self.rho_sqs):
            raise ValueError("rho_sq values must lie in [0, 1)")
        if any(not r > 0 for r in self.var_ratios):
            raise ValueError("var_ratio values must be positive")
        for a in self.alphas:
            as_order(a)

    @classmethod
    def from_dict(cls, doc: dict) -> "GmGrid":
        kwargs = {}
        for name in ("alphas", "rho_sqs", "var_ratios", "mean_gaps"):
            if name in doc:
                kwargs[name] = tuple(doc[name])
        if "baseline" in doc:
            base = dict(doc["baseline"])
            base.setdefault("rho", 0.0)
            kwargs["baseline"] = BivariateParams(**base)
        return cls(**kwargs)

    def size(self) -> int:
        return len(self.alphas) * len(self.rho_sqs) * len(self.var_ratios) * len(self.mean_gaps)


@dataclass(frozen=True)
class GmSweepPoint:
    alpha: float
    rho_sq: float
    var_ratio: float
    mean_gap: float
    feasible: bool
    value: float | None = None
    oracle_value: float | None = None

    @property
    def abs_diff(self) -> float | None:
        if self.value is None or self.oracle_value is None:
            return None
        return abs(self.value - self.oracle_value)

    @property
    def negative(self) -> bool:
        return self.value is not None and self.value < NEGATIVE_THRESHOLD


def evaluate_point(
    alpha: float, rho_sq: float, var_ratio: float, mean_gap: float,
    baseline: BivariateParams, with_oracle: bool = True,
) -> GmSweepPoint:
    params = BivariateParams(
        baseline.mu_x, baseline.sigma_x, baseline.mu_y, baseline.sigma_y, math.sqrt(rho_sq)
    )
    prior = PriorParams.from_ratio(params, var_ratio, mean_gap)
    if not feasibility(alpha, params, prior):
        return GmSweepPoint(alpha, rho_sq, var_ratio, mean_gap, False)
    value = ibar_closed(alpha, params, prior)
    oracle = ibar_oracle(alpha, params, prior).value if with_oracle else None
    return GmSweepPoint(alpha, rho_sq, var_ratio, mean_gap, True, value, oracle)


def sweep(grid: GmGrid | None = None, with_oracle: bool = True, mapper=None) -> list[GmSweepPoint]:
    """Evaluate every grid point, ordered by (alpha, rho_sq, var_ratio, mean_gap) index.

    ``mapper`` may be any order-preserving map, e.g. an executor's ``map``.
    """
    grid = GmGrid() if grid is None else grid
    cells = list(itertools.product(grid.alphas, grid.rho_sqs, grid.var_ratios, grid.mean_gaps))

    def run(cell):
        return evaluate_point(*cell, baseline=grid.baseline, with_oracle=with_oracle)

    return list((mapper or map)(run, cells))


def departing_slices(points: list[GmSweepPoint]) -> dict[tuple, bool]:
    """For each (alpha, rho_sq, mean_gap) slice: does some prior go negative?"""
    out: dict[tuple, bool] = {}
    for pt in points:
        key = (pt.alpha, pt.rho_sq, pt.mean_gap)
        out[key] = out.get(key, False) or pt.negative
    return out


def summarize(points: list[GmSweepPoint]) -> list[dict]:
    """Negative / feasible / infeasible cell counts per (alpha, rho_sq)."""
    counts: dict[tuple, dict] = {}
    for pt in points:
        row = counts.setdefault(
            (pt.alpha, pt.rho_sq),
            {"alpha": pt.alpha, "rho_sq": pt.rho_sq, "negative": 0, "feasible": 0, "infeasible": 0},
        )
        if pt.feasible:
            row["feasible"] += 1
            row["negative"] += int(pt.negative)
        else:
            row["infeasible"] += 1
    return list(counts.values())
