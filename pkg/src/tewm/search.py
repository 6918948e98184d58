"""Empirical welfare maximization over policy classes.

Quadrant welfare is a step function of each threshold, constant between
consecutive distinct observed values of its column. The candidate grid for a
column with distinct sorted values ``v_1 < ... < v_m`` is therefore
``[-inf, (v_1+v_2)/2, ..., (v_{m-1}+v_m)/2, +inf]`` and searching it is
lossless.

Ties between welfare-equal optima are broken toward fewer treated rows, then
toward the lexicographically smallest ``(signs, thresholds)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import ColumnSpec, LaggedRows
from .errors import EmptySubsample, ValidationError
from .propensity import PropensityModel
from .rules import DiscreteMap, FiniteClass, PolicyRule, Quadrant
from .welfare import (
    Objective,
    Unconditional,
    cate_estimate,
    ipw_components,
    objective_weights,
    welfare,
    welfare_discrete_conditional,
)

_SIGN_PAIRS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


@dataclass(frozen=True)
class SearchResult:
    best_rule: PolicyRule
    best_value: float
    candidates_evaluated: int
    per_dimension_thresholds: tuple = ()
    treated_count: Optional[int] = None
    empty_states: tuple = ()
    state_values: dict = field(default_factory=dict)

    def to_dict(self):
        rule = self.best_rule
        out = {"value": self.best_value, "evaluated": self.candidates_evaluated}
        if isinstance(rule, FiniteClass):
            out["index"] = rule.index
            rule = rule.member
        if isinstance(rule, Quadrant):
            d = rule.to_dict()
            out.update(signs=d["signs"], thresholds=d["thresholds"], columns=d["columns"])
        elif isinstance(rule, DiscreteMap):
            out["table"] = {"0": rule.table[0], "1": rule.table[1]}
            out["empty_states"] = list(self.empty_states)
            out["state_values"] = {str(k): v for k, v in self.state_values.items()}
        out["rule"] = rule.to_dict()
        return out


def threshold_grid(values) -> tuple:
    """Candidate thresholds and the rank of each value among the distinct values.

    Returns
    -------
    candidates: ndarray, shape (m + 1,)
    ranks: ndarray of int, shape (n,)
        ``values[i] == uniq[ranks[i]]``; with sign -1 and candidate index
        ``k`` exactly the rows with ``ranks < k`` are selected, with sign +1
        those with ``ranks >= k``.
    """
    uniq, ranks = np.unique(np.asarray(values, dtype=float), return_inverse=True)
    cands = np.concatenate([[-math.inf], (uniq[:-1] + uniq[1:]) / 2.0, [math.inf]])
    return cands, ranks.ravel()


def _tie_tol(gain) -> float:
    return 1e-12 * (1.0 + float(np.sum(np.abs(gain))))


def _prepare(rows, prop, objective):
    omega = objective_weights(rows, objective)
    treated, control = ipw_components(rows, prop)
    gain = omega * (treated - control)
    base = float(np.sum(omega * control))
    active = (omega > 0).astype(np.int64)
    return omega, gain, base, active


# ----------------------------------------------------------------------------
# 1-D sweep


def sweep_1d(x, gain, active, mask=None):
    """Exactly optimize ``(sign, threshold)`` of one column.

    ``mask`` restricts the treated set (the other quadrant dimensions). The
    objective is the summed ``gain`` over treated rows.

    Returns
    -------
    (sign, threshold, total_gain, treated_count, n_evaluated)
    """
    cands, ranks = threshold_grid(x)
    m = cands.shape[0] - 1
    if mask is not None:
        gain = gain * mask
        active = active * mask
    g = np.bincount(ranks, weights=gain, minlength=m)
    c = np.bincount(ranks, weights=active, minlength=m).astype(np.int64)
    G = np.concatenate([[0.0], np.cumsum(g)])
    C = np.concatenate([[0], np.cumsum(c)])
    # row 0: sign -1 (ranks < k), row 1: sign +1 (ranks >= k)
    gains = np.stack([G, G[-1] - G])
    counts = np.stack([C, C[-1] - C])
    s_idx, k, best = _select(gains, counts, _tie_tol(gain))
    sign = -1 if s_idx == 0 else 1
    return sign, float(cands[k]), best, int(counts[s_idx, k]), 2 * (m + 1)


def _select(gains, counts, tol):
    """First flat index (row-major) among max-within-tol entries with fewest treated."""
    flat = gains.reshape(gains.shape[0], -1)
    best = flat.max()
    ok = flat >= best - tol
    cnt = np.where(ok, counts.reshape(flat.shape), np.iinfo(np.int64).max)
    pos = int(np.argmin(cnt))  # argmin returns the first occurrence
    s_idx, k = divmod(pos, flat.shape[1])
    return s_idx, k, float(flat.reshape(-1)[pos])


# ----------------------------------------------------------------------------
# exact 2-D search


def _sweep_pair(sp, r1, r2, m1, m2, gain, collect_above=None, active=None):
    """Sweep column-1 candidates for one sign pair.

    Rows are added to the treated set in column-1 rank order (ascending for
    sign -1, descending for sign +1) while ``profile[k2]`` holds the summed
    gain of the treated rows that also satisfy candidate ``k2`` of column 2.

    Returns the per-``k1`` maximum of the profile; with ``collect_above``
    also, for every ``k1`` reaching that level, the ``(count, k1, k2)`` with
    the fewest treated rows and then the smallest ``k2``.
    """
    s1, s2 = sp
    order = np.argsort(r1, kind="stable")
    if s1 > 0:
        order = order[::-1]
    ranks1 = r1[order].tolist()
    ranks2 = r2[order].tolist()
    g = gain[order].tolist()
    a = active[order].tolist() if active is not None else None
    profile = np.zeros(m2 + 1)
    counts = np.zeros(m2 + 1) if collect_above is not None else None
    row_max = np.empty(m1 + 1)
    hits = []

    def record(k1):
        row_max[k1] = profile.max()
        if collect_above is not None and row_max[k1] >= collect_above:
            # fewest treated, then smallest k2, among the candidates reaching the level
            masked = np.where(profile >= collect_above, counts, np.inf)
            k2 = int(np.argmin(masked))
            hits.append((int(round(counts[k2])), k1, k2))

    # k1 index of the state after all rows of column-1 rank r are added:
    # r + 1 when adding ranks upward (s1 = -1), r when adding downward (s1 = +1)
    record(0 if s1 < 0 else m1)
    n = len(ranks1)
    for pos in range(n):
        r = ranks2[pos]
        # a row with column-2 rank r is inside candidate k2 iff r < k2 (s2 = -1) or r >= k2 (s2 = +1)
        if s2 < 0:
            profile[r + 1:] += g[pos]
            if counts is not None:
                counts[r + 1:] += a[pos]
        else:
            profile[:r + 1] += g[pos]
            if counts is not None:
                counts[:r + 1] += a[pos]
        if pos == n - 1 or ranks1[pos + 1] != ranks1[pos]:
            record(ranks1[pos] + 1 if s1 < 0 else ranks1[pos])
    return row_max, hits


def _exact_pair(x1, x2, gain, active, tol):
    """Best ``(signs, thresholds)`` of two columns for the summed ``gain`` of treated rows.

    Returns
    -------
    (signs, thresholds, total_gain, treated_count, n_evaluated)
    """
    c1, r1 = threshold_grid(x1)
    c2, r2 = threshold_grid(x2)
    m1, m2 = c1.shape[0] - 1, c2.shape[0] - 1
    maxima = [_sweep_pair(sp, r1, r2, m1, m2, gain)[0].max() for sp in _SIGN_PAIRS]
    best = max(maxima)
    ties = []
    for si, sp in enumerate(_SIGN_PAIRS):
        if maxima[si] >= best - tol:
            _, hits = _sweep_pair(sp, r1, r2, m1, m2, gain, best - tol, active.astype(float))
            ties.extend((count, si, k1, k2) for count, k1, k2 in hits)
    count, si, k1, k2 = min(ties)
    return _SIGN_PAIRS[si], (float(c1[k1]), float(c2[k2])), float(best), count, 4 * (m1 + 1) * (m2 + 1)


def learn_quadrant_2d(rows: LaggedRows, prop: PropensityModel, cols, objective: Objective = None) -> SearchResult:
    """Exact maximizer over 2-D quadrant rules on the candidate grid.

    For each of the four sign pairs, column-1 candidates are swept in order
    while an incrementally updated gain profile over all column-2 candidates
    is maintained, so all ``4 (m1+1)(m2+1)`` rules are scored with O(n^2)
    term updates.
    """
    cols = ColumnSpec.parse(cols)
    if len(cols) != 2:
        raise ValidationError(f"learn_quadrant_2d needs exactly 2 columns (got {len(cols)})")
    if len(rows) < 2:
        raise ValidationError("need at least 2 rows")
    objective = objective or Unconditional()
    omega, gain, base, active = _prepare(rows, prop, objective)
    X = rows.columns(cols)
    signs, thresholds, _, count, evaluated = _exact_pair(X[:, 0], X[:, 1], gain, active, _tie_tol(gain))
    rule = Quadrant(signs, thresholds, cols)
    value = welfare(rows, rule, prop, objective).value
    return SearchResult(rule, value, evaluated, rule.thresholds, count)


# ----------------------------------------------------------------------------
# coordinate ascent, d >= 3


def _quadrant_key(count, signs, thresholds):
    return (count, tuple(signs), tuple(thresholds))


def _ascend(X, gain, active, signs, thresholds, tol, max_cycles, pairs=True):
    """1-D coordinate moves until no gain, then exact moves over pairs of dimensions.

    A pair move holds the remaining dimensions fixed and re-optimizes two
    (sign, threshold) coordinates jointly; after any improving pair move the
    1-D cycle resumes.
    """
    d = X.shape[1]
    signs, thresholds = list(signs), list(thresholds)
    evaluated = 0

    def inside(j):
        with np.errstate(invalid="ignore"):
            return signs[j] * (X[:, j] - thresholds[j]) > 0

    sides = np.column_stack([inside(j) for j in range(d)])
    current = float(np.sum(gain[sides.all(axis=1)]))
    for _ in range(max_cycles):
        start = current
        for j in range(d):
            others = np.delete(sides, j, axis=1).all(axis=1)
            s, b, g, _, n_eval = sweep_1d(X[:, j], gain, active, others)
            evaluated += n_eval
            signs[j], thresholds[j] = s, b
            sides[:, j] = inside(j)
            current = g
        if current > start + tol:
            continue
        improved = False
        if pairs and d >= 2:
            for i, j in itertools.combinations(range(d), 2):
                others = np.delete(sides, [i, j], axis=1).all(axis=1)
                if not others.any():
                    continue
                s, b, g, _, n_eval = _exact_pair(X[:, i], X[:, j], gain * others, active * others, tol)
                evaluated += n_eval
                if g > current + tol:
                    (signs[i], signs[j]), (thresholds[i], thresholds[j]) = s, b
                    sides[:, i], sides[:, j] = inside(i), inside(j)
                    current = g
                    improved = True
        if not improved:
            break
    treated = sides.all(axis=1)
    return tuple(signs), tuple(thresholds), current, int(np.sum(active[treated])), evaluated


def learn_quadrant_nd(rows: LaggedRows, prop: PropensityModel, cols, objective: Objective = None,
                      restarts: int = 10, seed: int = 0, max_cycles: int = 100) -> SearchResult:
    """Coordinate ascent over quadrant rules in any dimension.

    Each step optimizes one (sign, threshold) exactly by a 1-D sweep with the
    other dimensions held fixed. Restart ``r`` draws its initial signs and
    thresholds (uniform over each column's observed range) from the stream
    ``SeedSequence(seed, spawn_key=(r,))``. The best restart wins under the
    usual tie rule.
    """
    cols = ColumnSpec.parse(cols)
    if len(cols) < 1:
        raise ValidationError("need at least one column")
    if restarts < 1:
        raise ValidationError("restarts must be >= 1")
    objective = objective or Unconditional()
    omega, gain, base, active = _prepare(rows, prop, objective)
    X = rows.columns(cols)
    lo, hi = X.min(axis=0), X.max(axis=0)
    tol = _tie_tol(gain)

    best = None
    evaluated = 0
    for r in range(restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(r,))))
        signs = tuple(int(s) for s in rng.choice((-1, 1), size=X.shape[1]))
        thresholds = tuple(float(t) for t in rng.uniform(lo, hi))
        s, b, g, count, n_eval = _ascend(X, gain, active, signs, thresholds, tol, max_cycles)
        evaluated += n_eval
        if best is None or g > best[0] + tol or (g >= best[0] - tol and _quadrant_key(count, s, b) < best[1]):
            best = (g, _quadrant_key(count, s, b))
    count, signs, thresholds = best[1]
    rule = Quadrant(signs, thresholds, cols)
    value = welfare(rows, rule, prop, objective).value
    return SearchResult(rule, value, evaluated, rule.thresholds, count)


def learn_quadrant(rows, prop, cols, objective: Objective = None, restarts: int = 10, seed: int = 0) -> SearchResult:
    """Exact search for one or two columns, coordinate ascent beyond."""
    cols = ColumnSpec.parse(cols)
    if len(cols) == 2:
        return learn_quadrant_2d(rows, prop, cols, objective)
    if len(cols) == 1:
        return learn_quadrant_nd(rows, prop, cols, objective, restarts=1, seed=seed)
    return learn_quadrant_nd(rows, prop, cols, objective, restarts, seed)


# ----------------------------------------------------------------------------
# finite classes and discrete maps


def learn_finite(rows: LaggedRows, prop: PropensityModel, rules: Sequence[PolicyRule],
                 objective: Objective = None) -> SearchResult:
    """Evaluate every rule; the lowest list index wins ties."""
    rules = tuple(rules)
    if not rules:
        raise ValidationError("the rule list is empty")
    values = [welfare(rows, r, prop, objective).value for r in rules]
    best = max(values)
    tol = 1e-12 * (1.0 + abs(best))
    idx = next(i for i, v in enumerate(values) if v >= best - tol)
    return SearchResult(FiniteClass(rules, idx), values[idx], len(rules))


def learn_discrete(rows: LaggedRows, prop: PropensityModel) -> SearchResult:
    """Treat in state ``w`` iff the subsample mean of ``tau_hat`` is >= 0.

    A state with no rows gets action 0 and is listed in ``empty_states``.
    ``best_value`` is the unconditional welfare of the learned map.
    """
    table, empty, state_values = [0, 0], [], {}
    for w in (0, 1):
        try:
            tau = cate_estimate(rows, prop, condition=w)
        except EmptySubsample:
            empty.append(w)
            continue
        table[w] = 1 if tau >= 0 else 0
        state_values[w] = tau
    rule = DiscreteMap(tuple(table))
    for w in state_values:
        state_values[w] = welfare_discrete_conditional(rows, rule, prop, w).value
    value = welfare(rows, rule, prop).value
    return SearchResult(rule, value, 2 * (2 - len(empty)), empty_states=tuple(empty), state_values=state_values)


@dataclass(frozen=True)
class SearchConfig:
    """Which class to search and which objective to maximize.

    ``class_kind`` is ``"quadrant"``, ``"discrete"`` or ``"finite"`` (with
    ``rules``); ``columns`` name the quadrant dimensions.
    """

    class_kind: str = "quadrant"
    columns: Optional[ColumnSpec] = None
    objective: Objective = field(default_factory=Unconditional)
    restarts: int = 10
    seed: int = 0
    rules: tuple = ()

    def __post_init__(self):
        if self.class_kind not in ("quadrant", "discrete", "finite"):
            raise ValidationError(f"unknown class {self.class_kind!r}")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.columns is not None:
            object.__setattr__(self, "columns", ColumnSpec.parse(self.columns))

    def run(self, rows: LaggedRows, prop: PropensityModel) -> SearchResult:
        if self.class_kind == "discrete":
            return learn_discrete(rows, prop)
        if self.class_kind == "finite":
            return learn_finite(rows, prop, self.rules, self.objective)
        cols = self.columns if self.columns is not None else rows.spec
        return learn_quadrant(rows, prop, cols, self.objective, self.restarts, self.seed)

    def to_dict(self):
        return {
            "class": self.class_kind,
            "columns": list(self.columns) if self.columns is not None else None,
            "objective": self.objective.to_dict(),
            "restarts": self.restarts,
            "seed": self.seed,
        }
