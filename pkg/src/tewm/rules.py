"""Binary policy rules: maps from lagged observables to a treat/no-treat action."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import ColumnSpec, LaggedRows
from .errors import ValidationError


class PolicyRule:
    def assign(self, rows: LaggedRows) -> np.ndarray:
        """Boolean array, True where the rule treats (``X_{t-1}`` in ``G``)."""
        raise NotImplementedError

    def complement(self) -> "PolicyRule":
        return Complement(self)

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class DiscreteMap(PolicyRule):
    """Action as a function of the lagged treatment: ``table[w]``."""

    table: tuple = (0, 0)

    def __post_init__(self):
        table = self.table
        if isinstance(table, dict):
            if set(table) != {0, 1}:
                raise ValidationError("a discrete map must be defined on both states 0 and 1")
            table = (table[0], table[1])
        table = tuple(int(a) for a in table)
        if len(table) != 2 or any(a not in (0, 1) for a in table):
            raise ValidationError(f"invalid discrete map {self.table!r}")
        object.__setattr__(self, "table", table)

    def __getitem__(self, w: int) -> int:
        return self.table[int(w)]

    def assign(self, rows):
        return np.asarray(self.table, dtype=bool)[rows.w_prev.astype(int)]

    def complement(self):
        return DiscreteMap((1 - self.table[0], 1 - self.table[1]))

    def to_dict(self):
        return {"kind": "discrete", "table": {"0": self.table[0], "1": self.table[1]}}


def _num(v):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf")


@dataclass(frozen=True)
class Quadrant(PolicyRule):
    """Treat iff ``s_j (x_j - b_j) > 0`` for every selected column ``j``.

    Infinite thresholds are allowed: with ``s = -1``, ``b = +inf`` admits every
    value and ``b = -inf`` admits none (and the reverse for ``s = +1``).
    """

    signs: tuple
    thresholds: tuple
    columns: ColumnSpec

    def __post_init__(self):
        signs = tuple(int(s) for s in self.signs)
        thresholds = tuple(float(b) for b in self.thresholds)
        cols = ColumnSpec.parse(self.columns)
        if any(s not in (-1, 1) for s in signs):
            raise ValidationError(f"quadrant signs must be -1 or +1 (got {signs})")
        if not (len(signs) == len(thresholds) == len(cols)) or not signs:
            raise ValidationError("signs, thresholds and columns must have the same positive length")
        if any(math.isnan(b) for b in thresholds):
            raise ValidationError("thresholds must not be NaN")
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "columns", cols)

    @property
    def d(self) -> int:
        return len(self.signs)

    def assign(self, rows):
        X = rows.columns(self.columns)
        s = np.asarray(self.signs, dtype=float)
        b = np.asarray(self.thresholds, dtype=float)
        with np.errstate(invalid="ignore"):
            return np.all(s * (X - b) > 0, axis=1)

    def to_dict(self):
        return {
            "kind": "quadrant",
            "signs": list(self.signs),
            "thresholds": [_num(b) for b in self.thresholds],
            "columns": list(self.columns),
        }


@dataclass(frozen=True)
class FiniteClass(PolicyRule):
    """Member ``index`` of an explicit list of rules."""

    rules: tuple
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))
        if not 0 <= self.index < len(self.rules):
            raise ValidationError(f"member index {self.index} out of range for {len(self.rules)} rules")

    @property
    def member(self) -> PolicyRule:
        return self.rules[self.index]

    def assign(self, rows):
        return self.member.assign(rows)

    def to_dict(self):
        return {"kind": "finite", "index": self.index, "member": self.member.to_dict()}


@dataclass(frozen=True)
class Complement(PolicyRule):
    rule: PolicyRule

    def assign(self, rows):
        return ~self.rule.assign(rows)

    def complement(self):
        return self.rule

    def to_dict(self):
        return {"kind": "complement", "rule": self.rule.to_dict()}


def treat_all(columns="y_lag") -> Quadrant:
    cols = ColumnSpec.parse(columns)
    return Quadrant((-1,) * len(cols), (math.inf,) * len(cols), cols)


def control_all(columns="y_lag") -> Quadrant:
    cols = ColumnSpec.parse(columns)
    return Quadrant((-1,) * len(cols), (-math.inf,) * len(cols), cols)


def rule_from_dict(d: dict) -> PolicyRule:
    kind = d.get("kind", "quadrant")
    if kind == "discrete":
        t = d["table"]
        return DiscreteMap((int(t["0"]), int(t["1"])) if isinstance(t, dict) else tuple(t))
    if kind == "quadrant":
        return Quadrant(tuple(d["signs"]), tuple(float(b) for b in d["thresholds"]), ColumnSpec.parse(d["columns"]))
    if kind == "complement":
        return Complement(rule_from_dict(d["rule"]))
    raise ValidationError(f"cannot rebuild rule of kind {kind!r}")
