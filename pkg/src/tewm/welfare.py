"""Inverse-propensity-weighted empirical welfare.

For a decision set ``G`` the per-period term is::

    W_t(G) = Y_t W_t 1(X_{t-1} in G) / e_t + Y_t (1 - W_t) 1(X_{t-1} not in G) / (1 - e_t)

and every welfare estimate here is a weighted average of these terms. The
weights select what the welfare is conditional on: all ones (unconditional),
the indicator of ``W_{t-1} = w`` (discrete conditioning), or product-kernel
weights around a point ``x`` of the conditioning columns. Discrete and kernel
conditioning compose by multiplying the weights.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .data import LaggedRows
from .errors import DimensionMismatch, EmptySubsample, EmptyWindow, OverlapViolation
from .kernels import KernelSpec
from .propensity import PropensityModel
from .rules import PolicyRule

BOUNDARY_TOL = 1e-12


# ----------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class Unconditional:
    def to_dict(self):
        return {"kind": "unconditional"}


@dataclass(frozen=True)
class DiscreteConditional:
    w: int

    def __post_init__(self):
        if self.w not in (0, 1):
            raise ValueError(f"conditioning state must be 0 or 1 (got {self.w})")

    def to_dict(self):
        return {"kind": "discrete", "w": self.w}


@dataclass(frozen=True, eq=False)
class KernelConditional:
    """Kernel smoothing around ``x`` in the rows' ``x_prev`` columns.

    ``h=None`` resolves to ``scale * (n)^(-1/5)`` where ``scale`` defaults to
    the mean standard deviation of the conditioning columns. ``w`` optionally
    restricts to the subsample with lagged treatment ``w`` as well.
    """

    x: tuple
    h: Optional[float] = None
    kernel: KernelSpec = field(default_factory=KernelSpec)
    scale: Optional[float] = None
    w: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(float(v) for v in np.atleast_1d(self.x)))

    def bandwidth(self, rows: LaggedRows) -> float:
        if self.h is not None:
            return float(self.h)
        return default_bandwidth(rows, self.scale)

    def to_dict(self):
        return {"kind": "kernel", "x": list(self.x), "h": self.h, "kernel": self.kernel.name,
                "scale": self.scale, "w": self.w}


Objective = Union[Unconditional, DiscreteConditional, KernelConditional]


def default_bandwidth(rows: LaggedRows, scale: Optional[float] = None) -> float:
    """``c * (T-1)^(-1/5)`` with ``c`` the (mean) sd of the conditioning columns."""
    if scale is None:
        if rows.d == 0:
            raise DimensionMismatch("kernel conditioning needs at least one conditioning column")
        scale = float(np.mean(np.std(rows.x, axis=0, ddof=1)))
    return float(scale * len(rows) ** (-0.2))


def objective_weights(rows: LaggedRows, objective: Objective) -> np.ndarray:
    """Nonnegative weights defining the conditional average; raises if all vanish."""
    if objective is None or isinstance(objective, Unconditional):
        return np.ones(len(rows))
    if isinstance(objective, DiscreteConditional):
        omega = (rows.w_prev == objective.w).astype(float)
        if not omega.any():
            raise EmptySubsample(objective.w)
        return omega
    if isinstance(objective, KernelConditional):
        h = objective.bandwidth(rows)
        omega = objective.kernel.weights(rows.x, objective.x, h)
        if objective.w is not None:
            sub = rows.w_prev == objective.w
            if not sub.any():
                raise EmptySubsample(objective.w)
            omega = omega * sub
        if not np.sum(omega) > 0:
            raise EmptyWindow(f"no rows receive positive kernel weight at x={objective.x} with h={h:g}")
        return omega
    raise TypeError(f"unknown objective {objective!r}")


# ----------------------------------------------------------------------------
# per-period terms


def propensities(rows: LaggedRows, prop: PropensityModel) -> np.ndarray:
    """Evaluate ``e_t`` on every row, refusing values numerically at 0 or 1."""
    e = np.asarray(prop.evaluate_rows(rows), dtype=float)
    bad = ~((e > BOUNDARY_TOL) & (e < 1.0 - BOUNDARY_TOL))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise OverlapViolation(int(rows.index[i]), float(e[i]))
    return e


def ipw_components(rows: LaggedRows, prop: PropensityModel, e=None):
    """Return ``(Y W / e, Y (1 - W) / (1 - e))`` for every row."""
    if e is None:
        e = propensities(rows, prop)
    y, w = rows.y, rows.w.astype(float)
    return y * w / e, y * (1.0 - w) / (1.0 - e)


@dataclass(frozen=True)
class PerPeriodTerm:
    t: int
    value: float


def per_period_values(rows: LaggedRows, rule: PolicyRule, prop: PropensityModel) -> np.ndarray:
    """Array of ``W_t(G)`` aligned with ``rows.index``."""
    treated, control = ipw_components(rows, prop)
    return np.where(rule.assign(rows), treated, control)


def per_period_terms(rows: LaggedRows, rule: PolicyRule, prop: PropensityModel) -> list:
    vals = per_period_values(rows, rule, prop)
    return [PerPeriodTerm(int(t), float(v)) for t, v in zip(rows.index, vals)]


# ----------------------------------------------------------------------------
# welfare


@dataclass(frozen=True)
class WelfareReport:
    value: float
    n_effective_treated: int
    n_effective_control: int
    rule: PolicyRule
    conditioning: dict

    def to_dict(self):
        return {
            "value": self.value,
            "rule": self.rule.to_dict(),
            "conditioning": self.conditioning,
            "n_effective_treated": self.n_effective_treated,
            "n_effective_control": self.n_effective_control,
        }


def welfare(rows: LaggedRows, rule: PolicyRule, prop: PropensityModel,
            objective: Objective = None) -> WelfareReport:
    """Weighted IPW welfare of ``rule`` under ``objective`` (default unconditional)."""
    objective = objective or Unconditional()
    omega = objective_weights(rows, objective)
    assigned = rule.assign(rows)
    treated, control = ipw_components(rows, prop)
    terms = np.where(assigned, treated, control)
    value = float(np.sum(omega * terms) / np.sum(omega))
    active = omega > 0
    w = rows.w.astype(bool)
    conditioning = objective.to_dict()
    if isinstance(objective, KernelConditional):
        conditioning["h"] = objective.bandwidth(rows)
    return WelfareReport(
        value=value,
        n_effective_treated=int(np.sum(active & w & assigned)),
        n_effective_control=int(np.sum(active & ~w & ~assigned)),
        rule=rule,
        conditioning=conditioning,
    )


def welfare_unconditional(rows, rule, prop) -> WelfareReport:
    return welfare(rows, rule, prop, Unconditional())


def welfare_discrete_conditional(rows, rule: PolicyRule, prop, w: int) -> WelfareReport:
    """Subsample average over ``{t : W_{t-1} = w}`` (divisor ``T(w)``)."""
    return welfare(rows, rule, prop, DiscreteConditional(int(w)))


def welfare_kernel_conditional(rows, rule, prop, x, h=None, kernel=KernelSpec(), w=None) -> WelfareReport:
    return welfare(rows, rule, prop, KernelConditional(tuple(np.atleast_1d(x)), h, kernel, w=w))


def tau_hat(rows: LaggedRows, prop: PropensityModel) -> np.ndarray:
    """Per-period ``Y W / e - Y (1 - W) / (1 - e)``."""
    treated, control = ipw_components(rows, prop)
    return treated - control


def cate_estimate(rows: LaggedRows, prop: PropensityModel, condition: Optional[int] = None) -> float:
    """Mean of ``tau_hat`` over all rows, or over ``{W_{t-1} = condition}``."""
    tau = tau_hat(rows, prop)
    if condition is not None:
        sel = rows.w_prev == int(condition)
        if not sel.any():
            raise EmptySubsample(int(condition))
        tau = tau[sel]
    return float(np.sum(tau) / tau.shape[0])
