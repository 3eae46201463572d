"""A 2x2 joint p(x, y) on which the Renyi-optimal prior can leave P_Y.

Rows index x, columns index y. The objective studied is

    F_a(q) = sum_x p(x) (D_a[W(.|x) || q] - D_a[W(.|x) || p_Y]),

which vanishes at q = p_Y. For the Shannon order the minimizer over q is
always p_Y; for other orders it need not be.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .divergence import (
    SUM_TOL,
    DiscreteDist,
    OrderLike,
    RenyiOrder,
    as_order,
    kl_divergence_discrete,
    mixed_discrete,
    renyi_divergence_discrete,
)
from .errors import DegenerateModelError, InvalidDistributionError

DEFAULT_GRID = 10_000
DEPARTURE_GAIN = 1e-9


@dataclass(frozen=True, eq=False)
class DichotomicJoint:
    joint: np.ndarray

    def __post_init__(self):
        p = np.array(self.joint, dtype=float)
        if p.shape != (2, 2):
            raise InvalidDistributionError(f"joint must be 2x2, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistributionError("joint entries must be finite and non-negative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise InvalidDistributionError(f"joint sums to {p.sum()!r}, not 1")
        if np.any(p.sum(axis=0) <= 0) or np.any(p.sum(axis=1) <= 0):
            raise InvalidDistributionError("both marginals must be strictly positive")
        p.setflags(write=False)
        object.__setattr__(self, "joint", p)

    @classmethod
    def from_channel(cls, p_x, w_y_given_x) -> "DichotomicJoint":
        """Build from p_X and the forward channel, rows W(.|x)."""
        p_x = np.asarray(p_x, dtype=float)
        w = np.asarray(w_y_given_x, dtype=float)
        return cls(p_x[:, None] * w)

    @property
    def p_x(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def p_y(self) -> np.ndarray:
        return self.joint.sum(axis=0)

    @property
    def channel(self) -> np.ndarray:
        """W(y|x), one row per x."""
        return self.joint / self.p_x[:, None]

    @property
    def backward_channel(self) -> np.ndarray:
        """W(x|y), one column per y."""
        return self.joint / self.p_y[None, :]

    def conditional(self, x: int) -> DiscreteDist:
        return DiscreteDist.normalized(self.joint[x])

    def marginal_y(self) -> DiscreteDist:
        return DiscreteDist.normalized(self.p_y)

    def ratio(self, prior: DiscreteDist) -> np.ndarray:
        """s(y) = q(y) / p_Y(y)."""
        return _check_prior(prior).probs / self.p_y


def default_construction(w00: float = 0.01, w01: float = 0.001) -> DichotomicJoint:
    """p_X = (1/2, 1/2), W(0|0) = w00, W(0|1) = w01: p_Y(0) is small, so
    priors with q(0) = s0 p_Y(0) and large s0 stay valid."""
    return DichotomicJoint.from_channel([0.5, 0.5], [[w00, 1.0 - w00], [w01, 1.0 - w01]])


def random_joint(rng: np.random.Generator) -> DichotomicJoint:
    """Uniform draw from the 2x2 probability simplex."""
    return DichotomicJoint(rng.dirichlet(np.ones(4)).reshape(2, 2))


def _check_prior(prior: DiscreteDist) -> DiscreteDist:
    if prior.support_size != 2:
        raise InvalidDistributionError("prior must have two outcomes")
    if np.any(prior.probs <= 0):
        raise DegenerateModelError("prior must be strictly positive")
    return prior


def _unit_order(order: OrderLike) -> RenyiOrder:
    order = as_order(order)
    order.require_unit_interval()
    return order


def f_alpha(joint: DichotomicJoint, prior: DiscreteDist, order: OrderLike) -> float:
    """F_a by direct summation of divergence differences."""
    order = _unit_order(order)
    _check_prior(prior)
    p_y = joint.marginal_y()
    total = 0.0
    for x, px in enumerate(joint.p_x):
        w = joint.conditional(x)
        total += px * (
            renyi_divergence_discrete(w, prior, order) - renyi_divergence_discrete(w, p_y, order)
        )
    return float(total)


def tilted_conditional(joint: DichotomicJoint, order: OrderLike) -> np.ndarray:
    """R^a(y|x) proportional to W^a(y|x) p_Y^(1-a)(y); one row per x."""
    a = as_order(order).alpha
    logs = a * np.log(joint.channel) + (1.0 - a) * np.log(joint.p_y)[None, :]
    r = np.exp(logs - logs.max(axis=1, keepdims=True))
    return r / r.sum(axis=1, keepdims=True)


def tilted_conditional_bayes(joint: DichotomicJoint, order: OrderLike) -> np.ndarray:
    """The same R^a written with the backward channel: p_Y(y) W^a(x|y), normalized over y."""
    a = as_order(order).alpha
    r = joint.p_y[None, :] * joint.backward_channel**a
    return r / r.sum(axis=1, keepdims=True)


def f_alpha_tilted(joint: DichotomicJoint, prior: DiscreteDist, order: OrderLike) -> float:
    """F_a = -(1/(1-a)) sum_x p(x) log sum_y R^a(y|x) s(y)^(1-a)."""
    a = _unit_order(order).alpha
    s = joint.ratio(prior)
    r = tilted_conditional(joint, a)
    inner = np.log(r @ s ** (1.0 - a))
    return float(-(joint.p_x @ inner) / (1.0 - a))


class LimitRow(NamedTuple):
    s0: float
    f_alpha: float
    f_alpha_plus_log_s0: float


def limit_scan(joint: DichotomicJoint, order: OrderLike, s0_values) -> list[LimitRow]:
    """F_a at priors with q(0) = s0 p_Y(0), for each requested s0."""
    order = _unit_order(order)
    p0 = joint.p_y[0]
    rows = []
    for s0 in s0_values:
        s0 = float(s0)
        q0 = s0 * p0
        if not 0 < q0 < 1:
            raise InvalidDistributionError(
                f"s0 = {s0:g} gives q(0) = {q0:.6g}; need 0 < q(0) < 1 (p_Y(0) = {p0:.6g})"
            )
        f = f_alpha(joint, DiscreteDist([q0, 1.0 - q0]), order)
        rows.append(LimitRow(s0, f, f + math.log(s0)))
    return rows


def max_feasible_s0(joint: DichotomicJoint) -> float:
    """Supremum of s0 with q(0) = s0 p_Y(0) < 1."""
    return 1.0 / joint.p_y[0]


@dataclass(frozen=True)
class PriorSearch:
    best_prior: DiscreteDist
    best_value: float
    value_at_marginal: float
    step: float
    departs: bool

    @property
    def argmin_q0(self) -> float:
        return float(self.best_prior.probs[0])


def _objective_on_grid(joint: DichotomicJoint, a: float, q0: np.ndarray) -> np.ndarray:
    """sum_x p(x) D_a[W(.|x) || (q0, 1 - q0)] for every grid point."""
    w = joint.channel
    logq = np.stack([np.log(q0), np.log1p(-q0)], axis=1)  # (n, 2)
    total = np.zeros(q0.size)
    for x, px in enumerate(joint.p_x):
        pos = w[x] > 0
        logs = a * np.log(w[x][pos])[None, :] + (1.0 - a) * logq[:, pos]
        top = logs.max(axis=1, keepdims=True)
        log_sum = top[:, 0] + np.log(np.exp(logs - top).sum(axis=1))
        total += px * log_sum / (a - 1.0)
    return total


def minimize_over_prior(
    joint: DichotomicJoint, order: OrderLike, grid_size: int = DEFAULT_GRID
) -> PriorSearch:
    """Grid search over q(0) = k / (n + 1), k = 1..n.

    ``departs`` requires both a minimizer more than one step away from
    p_Y(0) and a gain over p_Y larger than ``DEPARTURE_GAIN``.
    """
    a = _unit_order(order).alpha
    if grid_size < 101:
        raise ValueError(f"grid_size must be at least 101, got {grid_size}")
    step = 1.0 / (grid_size + 1)
    q0 = np.arange(1, grid_size + 1) * step
    values = _objective_on_grid(joint, a, q0)
    k = int(np.argmin(values))
    at_marginal = float(_objective_on_grid(joint, a, joint.p_y[:1].copy())[0])
    best = float(values[k])
    departs = abs(q0[k] - joint.p_y[0]) > step and best < at_marginal - DEPARTURE_GAIN
    return PriorSearch(DiscreteDist([q0[k], 1.0 - q0[k]]), best, at_marginal, step, bool(departs))


def shannon_decomposition_residual(joint: DichotomicJoint, prior: DiscreteDist) -> float:
    """sum_x p(x) KL(W(.|x) || q) - [I(P_X, W) + KL(P_Y || q)]."""
    _check_prior(prior)
    p_y = joint.marginal_y()
    lhs = mutual = 0.0
    for x, px in enumerate(joint.p_x):
        w = joint.conditional(x)
        lhs += px * kl_divergence_discrete(w, prior)
        mutual += px * kl_divergence_discrete(w, p_y)
    return float(lhs - (mutual + kl_divergence_discrete(p_y, prior)))


class VariationalCheck(NamedTuple):
    """Worst-case over x of |grid minimum - D_a| and |objective at V* - D_a|."""

    grid_residual: float
    optimum_residual: float


def variational_objective(r: DiscreteDist, w: DiscreteDist, q: DiscreteDist, order: OrderLike) -> float:
    """(a/(1-a)) KL(R || W) + KL(R || q)."""
    order = _unit_order(order)
    return order.delta * kl_divergence_discrete(r, w) + kl_divergence_discrete(r, q)


def _variational_on_grid(w: np.ndarray, q: np.ndarray, delta: float, r0: np.ndarray) -> np.ndarray:
    r = np.stack([r0, 1.0 - r0], axis=1)
    log_r = np.log(r)
    with np.errstate(divide="ignore"):
        kl_w = np.sum(r * (log_r - np.log(w)[None, :]), axis=1)
    kl_q = np.sum(r * (log_r - np.log(q)[None, :]), axis=1)
    return delta * kl_w + kl_q


def variational_rep_residual(
    joint: DichotomicJoint, prior: DiscreteDist, order: OrderLike, grid_size: int = DEFAULT_GRID
) -> VariationalCheck:
    order = _unit_order(order)
    _check_prior(prior)
    step = 1.0 / (grid_size + 1)
    r0 = np.arange(1, grid_size + 1) * step
    grid_worst = opt_worst = 0.0
    for x in range(2):
        w = joint.conditional(x)
        closed = renyi_divergence_discrete(w, prior, order)
        grid_min = float(np.min(_variational_on_grid(w.probs, prior.probs, order.delta, r0)))
        at_opt = variational_objective(mixed_discrete(w, prior, order), w, prior, order)
        grid_worst = max(grid_worst, abs(grid_min - closed))
        opt_worst = max(opt_worst, abs(at_opt - closed))
    return VariationalCheck(grid_worst, opt_worst)


class DichotomicRow(NamedTuple):
    s0: float
    f_alpha: float
    f_alpha_plus_log_s0: float
    argmin_q0: float
    departs: bool


TABLE_COLUMNS = DichotomicRow._fields


def demo_table(
    joint: DichotomicJoint, order: OrderLike, s0_values, grid_size: int = DEFAULT_GRID
) -> tuple[list[DichotomicRow], PriorSearch]:
    """Limit scan rows, each tagged with the grid minimizer of the same run."""
    search = minimize_over_prior(joint, order, grid_size)
    rows = [
        DichotomicRow(r.s0, r.f_alpha, r.f_alpha_plus_log_s0, search.argmin_q0, search.departs)
        for r in limit_scan(joint, order, s0_values)
    ]
    return rows, search


def format_table(rows: list[DichotomicRow]) -> str:
    header = f"{'s0':>12} {'f_alpha':>14} {'f_alpha+log s0':>16} {'argmin_q0':>12} {'departs':>8}"
    lines = [header]
    for r in rows:
        lines.append(
            f"{r.s0:>12.6g} {r.f_alpha:>14.6e} {r.f_alpha_plus_log_s0:>16.6e} "
            f"{r.argmin_q0:>12.6g} {str(r.departs):>8}"
        )
    return "\n".join(lines)
