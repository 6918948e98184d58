"""Observed time series, lag assembly and CSV ingestion."""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import (
    MalformedHeader,
    NonBinaryTreatment,
    NonFiniteValue,
    SpecOutOfRange,
    UnsortedTime,
    ValidationError,
)

_COV_RE = re.compile(r"^z([1-9][0-9]*)_lag$")


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """An observed path ``(Y_t, W_t, Z_t)`` for ``t = 0..T-1``.

    Parameters
    ----------
    outcomes: array-like, shape (T,)
        Welfare outcome ``Y_t``.
    treatments: array-like, shape (T,)
        Binary policy ``W_t``.
    covariates: array-like, shape (T, k), optional
        Additional observables ``Z_t``; ``k`` may be zero.
    """

    outcomes: np.ndarray
    treatments: np.ndarray
    covariates: np.ndarray = None

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=float).ravel()
        w_raw = np.asarray(self.treatments).ravel()
        T = y.shape[0]
        z = self.covariates
        z = np.zeros((T, 0)) if z is None else np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if T < 2:
            raise ValidationError(f"a time series needs T >= 2 periods (got {T})")
        if w_raw.shape[0] != T or z.shape[0] != T:
            raise ValidationError(
                f"length mismatch: outcomes {T}, treatments {w_raw.shape[0]}, covariates {z.shape[0]}"
            )
        if not np.all(np.isfinite(y)):
            raise NonFiniteValue(f"non-finite outcome at t={int(np.flatnonzero(~np.isfinite(y))[0])}")
        if not np.all(np.isfinite(z)):
            bad = np.argwhere(~np.isfinite(z))[0]
            raise NonFiniteValue(f"non-finite covariate at t={bad[0]}, column z{bad[1] + 1}")
        w_float = w_raw.astype(float)
        binary = (w_float == 0.0) | (w_float == 1.0)
        if not np.all(binary):
            t = int(np.flatnonzero(~binary)[0])
            raise NonBinaryTreatment(t, w_raw[t].item())
        object.__setattr__(self, "outcomes", _frozen(y))
        object.__setattr__(self, "treatments", _frozen(w_float, dtype=np.int8))
        object.__setattr__(self, "covariates", _frozen(z))

    @property
    def T(self) -> int:
        return self.outcomes.shape[0]

    @property
    def k(self) -> int:
        return self.covariates.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.T)

    def __len__(self) -> int:
        return self.T

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            np.array_equal(self.outcomes, other.outcomes)
            and np.array_equal(self.treatments, other.treatments)
            and self.covariates.shape == other.covariates.shape
            and np.array_equal(self.covariates, other.covariates)
        )

    def with_outcomes(self, outcomes) -> "TimeSeries":
        return TimeSeries(outcomes, self.treatments, self.covariates)


# ----------------------------------------------------------------------------
# column selection


def outcome_lag() -> str:
    return "y_lag"


def treatment_lag() -> str:
    return "w_lag"


def covariate_lag(j: int) -> str:
    """Identifier of the lagged covariate with zero-based index ``j``."""
    return f"z{j + 1}_lag"


def _validate_column(name: str) -> str:
    if name in ("y_lag", "w_lag") or _COV_RE.match(name):
        return name
    raise SpecOutOfRange(f"unknown column identifier {name!r}")


@dataclass(frozen=True)
class ColumnSpec:
    """Ordered selection of lagged columns, e.g. ``ColumnSpec(("y_lag", "z1_lag"))``."""

    columns: tuple = ()

    def __post_init__(self):
        cols = tuple(_validate_column(str(c).strip()) for c in self.columns)
        if len(set(cols)) != len(cols):
            raise SpecOutOfRange(f"duplicate column identifiers in {cols}")
        object.__setattr__(self, "columns", cols)

    @classmethod
    def parse(cls, text: Union[str, Sequence[str], "ColumnSpec"]) -> "ColumnSpec":
        if isinstance(text, ColumnSpec):
            return text
        if isinstance(text, str):
            text = [c for c in text.split(",") if c.strip()]
        return cls(tuple(text))

    def __len__(self) -> int:
        return len(self.columns)

    def __iter__(self) -> Iterator[str]:
        return iter(self.columns)

    def __str__(self) -> str:
        return ",".join(self.columns)

    def check(self, k: int) -> None:
        for c in self.columns:
            m = _COV_RE.match(c)
            if m and int(m.group(1)) > k:
                raise SpecOutOfRange(f"{c} refers to a covariate but the series has k={k}")


def all_columns(k: int) -> ColumnSpec:
    return ColumnSpec(("y_lag", "w_lag") + tuple(covariate_lag(j) for j in range(k)))


@dataclass(frozen=True)
class LaggedRow:
    """One period ``t``: current ``(Y_t, W_t)`` and the selected lagged vector."""

    index: int
    y: float
    w: int
    x_prev: np.ndarray
    columns: ColumnSpec = field(default_factory=ColumnSpec)
    lagged: dict = field(default_factory=dict, repr=False)

    def value(self, column: str) -> float:
        try:
            return self.lagged[column]
        except KeyError:
            raise SpecOutOfRange(f"column {column!r} is not available on this row") from None


class LaggedRows:
    """Vectorized sequence of :class:`LaggedRow` for ``t = 1..T-1``.

    Every lagged column of the source series stays reachable through
    :meth:`column`, so policy rules and propensity models can read columns
    other than the ones chosen for ``x_prev``.
    """

    def __init__(self, index, y, w, lagged: np.ndarray, lagged_names: Sequence[str], spec: ColumnSpec):
        self.index = _frozen(index, dtype=np.int64)
        self.y = _frozen(y)
        self.w = _frozen(w, dtype=np.int8)
        self.lagged = _frozen(lagged)
        self.lagged_names = tuple(lagged_names)
        self._pos = {c: i for i, c in enumerate(self.lagged_names)}
        self.spec = spec
        for c in spec:
            if c not in self._pos:
                raise SpecOutOfRange(f"column {c!r} is not available (have {self.lagged_names})")
        self.x = _frozen(self.columns(spec))

    def __len__(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def column(self, name: str) -> np.ndarray:
        try:
            return self.lagged[:, self._pos[name]]
        except KeyError:
            raise SpecOutOfRange(f"column {name!r} is not available (have {self.lagged_names})") from None

    def columns(self, spec) -> np.ndarray:
        spec = ColumnSpec.parse(spec)
        if len(spec) == 0:
            return np.zeros((len(self), 0))
        return np.column_stack([self.column(c) for c in spec])

    @property
    def w_prev(self) -> np.ndarray:
        return self.column("w_lag")

    def __getitem__(self, i):
        if isinstance(i, slice) or isinstance(i, np.ndarray):
            return self.take(np.arange(len(self))[i])
        i = int(i)
        return LaggedRow(
            index=int(self.index[i]),
            y=float(self.y[i]),
            w=int(self.w[i]),
            x_prev=self.x[i].copy(),
            columns=self.spec,
            lagged={c: float(self.lagged[i, j]) for j, c in enumerate(self.lagged_names)},
        )

    def __iter__(self) -> Iterator[LaggedRow]:
        for i in range(len(self)):
            yield self[i]

    def take(self, positions) -> "LaggedRows":
        positions = np.asarray(positions)
        return LaggedRows(
            self.index[positions], self.y[positions], self.w[positions],
            self.lagged[positions], self.lagged_names, self.spec,
        )

    def with_spec(self, spec) -> "LaggedRows":
        return LaggedRows(self.index, self.y, self.w, self.lagged, self.lagged_names, ColumnSpec.parse(spec))

    def with_outcomes(self, y) -> "LaggedRows":
        """Replace current outcomes only; lagged columns are left untouched."""
        return LaggedRows(self.index, y, self.w, self.lagged, self.lagged_names, self.spec)

    def __eq__(self, other) -> bool:
        if not isinstance(other, LaggedRows):
            return NotImplemented
        return (
            np.array_equal(self.index, other.index)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.w, other.w)
            and np.array_equal(self.x, other.x)
        )


def build_lagged(series: TimeSeries, spec=()) -> LaggedRows:
    """Pair each ``(Y_t, W_t)`` with ``X_{t-1}`` columns chosen by ``spec``.

    Returns ``T - 1`` rows, ``t = 1..T-1``, in time order.
    """
    spec = ColumnSpec.parse(spec)
    spec.check(series.k)
    names = all_columns(series.k)
    lagged = np.column_stack(
        [series.outcomes[:-1], series.treatments[:-1].astype(float), series.covariates[:-1]]
    )
    return LaggedRows(
        np.arange(1, series.T), series.outcomes[1:], series.treatments[1:],
        lagged, names.columns, spec,
    )


# ----------------------------------------------------------------------------
# CSV


def _header(k: int) -> list:
    return ["t", "y", "w"] + [f"z{j}" for j in range(1, k + 1)]


def load_csv(path) -> TimeSeries:
    """Read a ``t,y,w,z1,...,zk`` file into a validated :class:`TimeSeries`."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedHeader("empty file") from None
        header = [h for h in header]
        k = len(header) - 3
        if k < 0 or header != _header(k):
            raise MalformedHeader(f"expected header t,y,w,z1,...,zk; got {','.join(header)}")
        rows = [r for r in reader if r]

    ts, ys, ws, zs = [], [], [], []
    for line_no, r in enumerate(rows, start=2):
        if len(r) != k + 3:
            raise MalformedHeader(f"line {line_no}: expected {k + 3} fields, got {len(r)}")
        try:
            t = int(r[0])
        except ValueError:
            raise UnsortedTime(f"line {line_no}: time index {r[0]!r} is not an integer") from None
        try:
            vals = [float(v) for v in r[1:]]
        except ValueError as exc:
            raise NonFiniteValue(f"line {line_no}: {exc}") from None
        ts.append(t)
        ys.append(vals[0])
        ws.append(vals[1])
        zs.append(vals[2:])

    if len(ts) and ts != list(range(ts[0], ts[0] + len(ts))):
        raise UnsortedTime("time index must be contiguous increasing integers")
    if len(ts) and ts[0] != 0:
        raise UnsortedTime(f"time index must start at 0 (got {ts[0]})")
    w = np.array(ws, dtype=float)
    bad = np.flatnonzero((w != 0.0) & (w != 1.0))
    if bad.size:
        raise NonBinaryTreatment(int(ts[bad[0]]), ws[bad[0]])
    return TimeSeries(np.array(ys), w, np.array(zs, dtype=float).reshape(len(ts), k))


def write_csv(series: TimeSeries, path) -> None:
    """Write ``series`` with 17 significant digits (lossless for float64)."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_header(series.k))
        for t in range(series.T):
            writer.writerow(
                [t, f"{series.outcomes[t]:.17g}", int(series.treatments[t])]
                + [f"{v:.17g}" for v in series.covariates[t]]
            )
