"""Two-period policy choice with a binary state (the lagged treatment).

Both periods are scored on the same observed sample: period 1 averages the
IPW outcomes over ``{t : W_{t-1} = w}`` under ``g1``, period 2 averages over
``{t : W_{t-1} = g1(w)}`` under ``g2``. A row can therefore feed both averages
when ``g1(w) = w``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .data import LaggedRows
from .errors import EmptySubsample
from .propensity import PropensityModel
from .rules import DiscreteMap
from .welfare import ipw_components


@dataclass(frozen=True)
class TwoPeriodPolicy:
    g1: DiscreteMap
    g2: DiscreteMap

    def to_dict(self):
        return {"g1": self.g1.to_dict()["table"], "g2": self.g2.to_dict()["table"]}


@dataclass(frozen=True)
class TwoPeriodReport:
    value_total: float
    value_period1: float
    value_period2: float
    policy: TwoPeriodPolicy
    subsample_sizes: dict

    def to_dict(self):
        return {
            "value": self.value_total,
            "value_total": self.value_total,
            "value_period1": self.value_period1,
            "value_period2": self.value_period2,
            "policy": self.policy.to_dict(),
            "subsample_sizes": {str(k): v for k, v in self.subsample_sizes.items()},
        }


def state_action_values(rows: LaggedRows, prop: PropensityModel) -> dict:
    """``{(s, a): subsample IPW welfare of action a on {W_{t-1} = s}}`` for non-empty ``s``."""
    treated, control = ipw_components(rows, prop)
    w_prev = rows.w_prev
    out = {}
    for s in (0, 1):
        sel = w_prev == s
        n = int(sel.sum())
        if n == 0:
            continue
        out[(s, 1)] = float(np.sum(treated[sel]) / n)
        out[(s, 0)] = float(np.sum(control[sel]) / n)
    return out


def _sizes(rows):
    w_prev = rows.w_prev
    return {s: int(np.sum(w_prev == s)) for s in (0, 1)}


def welfare_two_period(rows: LaggedRows, policy: TwoPeriodPolicy, prop: PropensityModel, w: int) -> TwoPeriodReport:
    w = int(w)
    q = state_action_values(rows, prop)
    sizes = _sizes(rows)
    s2 = policy.g1[w]
    for s in (w, s2):
        if sizes[s] == 0:
            raise EmptySubsample(s)
    v1 = q[(w, policy.g1[w])]
    v2 = q[(s2, policy.g2[s2])]
    return TwoPeriodReport(v1 + v2, v1, v2, policy, {w: sizes[w], s2: sizes[s2]})


def _argmax01(v0, v1):
    # ties go to action 0
    return 1 if v1 > v0 else 0


def learn_two_period(rows: LaggedRows, prop: PropensityModel, w: int) -> TwoPeriodReport:
    """Backward induction: best period-2 action per state, then period 1 given continuations.

    An action whose period-2 state has no observations is not available. The
    first-period map is also solved from the other starting state when that
    subsample is non-empty; it does not enter the reported value.
    """
    w = int(w)
    q = state_action_values(rows, prop)
    sizes = _sizes(rows)
    if sizes[w] == 0:
        raise EmptySubsample(w)

    g2 = [0, 0]
    cont = {}
    for s in (0, 1):
        if sizes[s]:
            g2[s] = _argmax01(q[(s, 0)], q[(s, 1)])
            cont[s] = q[(s, g2[s])]

    def first_action(state):
        totals = {a: q[(state, a)] + cont[a] for a in (0, 1) if a in cont}
        if len(totals) == 1:
            return next(iter(totals))
        return _argmax01(totals[0], totals[1])

    g1 = [0, 0]
    for s in (0, 1):
        if sizes[s]:
            g1[s] = first_action(s)
    policy = TwoPeriodPolicy(DiscreteMap(tuple(g1)), DiscreteMap(tuple(g2)))
    return welfare_two_period(rows, policy, prop, w)


def all_two_period_policies():
    for t1 in itertools.product((0, 1), repeat=2):
        for t2 in itertools.product((0, 1), repeat=2):
            yield TwoPeriodPolicy(DiscreteMap(t1), DiscreteMap(t2))
