"""Propensity scores ``e_t(x) = Pr(W_t = 1 | X_{t-1} = x)``.

Four model variants share one evaluation interface:

* :class:`Constant`: known randomization probability.
* :class:`KnownVector`: known per-period probabilities.
* :class:`Logit`: ``logistic(alpha + beta'x)`` fitted by Newton-Raphson.
* :class:`LocalLogit`: kernel-weighted local linear logit in one column,
  solved lazily at each query point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .data import ColumnSpec, LaggedRow, LaggedRows
from .errors import (
    DegenerateDesign,
    DimensionMismatch,
    EmptyWindow,
    PerfectSeparation,
    ValidationError,
)
from .kernels import KernelSpec, rule_of_thumb_bandwidth

MAX_COEF = 30.0
MAX_ITER = 100
GRAD_TOL = 1e-8


def _check_prob(e, what):
    e = np.asarray(e, dtype=float)
    if not np.all((e > 0.0) & (e < 1.0)):
        raise ValidationError(f"{what} must lie strictly inside (0, 1)")
    return e


class PropensityModel:
    """Base class; subclasses implement :meth:`evaluate_rows`."""

    def evaluate_rows(self, rows: LaggedRows) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, row) -> float:
        if isinstance(row, LaggedRow):
            return self._evaluate_row(row)
        return float(self.evaluate_rows(row)[0])

    def _evaluate_row(self, row: LaggedRow) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(PropensityModel):
    e: float

    def __post_init__(self):
        _check_prob(self.e, "constant propensity")

    def evaluate_rows(self, rows):
        return np.full(len(rows), float(self.e))

    def _evaluate_row(self, row):
        return float(self.e)

    def to_dict(self):
        return {"kind": "constant", "e": self.e}


@dataclass(frozen=True, eq=False)
class KnownVector(PropensityModel):
    """Known ``e_t`` for ``t = 1..T-1``; ``values[t - 1]`` is used at row ``t``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        _check_prob(v, "known propensities")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _lookup(self, index):
        index = np.asarray(index)
        if np.any(index < 1) or np.any(index > self.values.shape[0]):
            raise DimensionMismatch(
                f"known propensity vector has length {self.values.shape[0]}, row index out of range"
            )
        return self.values[index - 1]

    def evaluate_rows(self, rows):
        return self._lookup(rows.index).astype(float)

    def _evaluate_row(self, row):
        return float(self._lookup(row.index))

    def to_dict(self):
        return {"kind": "known-vector", "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class Logit(PropensityModel):
    """``logistic(intercept + coefs . x)`` over the named lagged ``columns``."""

    intercept: float
    coefs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    columns: ColumnSpec = field(default_factory=ColumnSpec)
    n_iter: int = 0

    def __post_init__(self):
        b = np.array(self.coefs, dtype=float).ravel()
        cols = ColumnSpec.parse(self.columns)
        if not np.isfinite(self.intercept) or not np.all(np.isfinite(b)):
            raise ValidationError("logit coefficients must be finite")
        if cols.columns and len(cols) != b.shape[0]:
            raise DimensionMismatch(f"{b.shape[0]} coefficients for {len(cols)} columns")
        b.setflags(write=False)
        object.__setattr__(self, "coefs", b)
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "intercept", float(self.intercept))

    def linear_index(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.coefs.shape[0]:
            raise DimensionMismatch(f"model has {self.coefs.shape[0]} coefficients, data has {X.shape[1]} columns")
        return self.intercept + X @ self.coefs

    def _design(self, rows: LaggedRows):
        if self.columns.columns:
            return rows.columns(self.columns)
        if self.coefs.shape[0] == 0:
            return np.zeros((len(rows), 0))
        return rows.x

    def evaluate_rows(self, rows):
        return expit(self.linear_index(self._design(rows)))

    def _evaluate_row(self, row):
        if self.columns.columns:
            x = np.array([row.value(c) for c in self.columns])
        elif self.coefs.shape[0] == 0:
            x = np.zeros(0)
        else:
            x = np.asarray(row.x_prev, dtype=float)
        return float(expit(self.linear_index(x))[0])

    def to_dict(self):
        return {"alpha": self.intercept, "beta": self.coefs.tolist(), "columns": list(self.columns)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["alpha"], d.get("beta", []), ColumnSpec.parse(d.get("columns", ())))


def _loglik(X, w, weights, theta):
    eta = X @ theta
    # log(1 + exp(eta)) computed stably
    return float(np.sum(weights * (w * eta - np.logaddexp(0.0, eta))))


def newton_logit(X, w, weights=None, max_iter=MAX_ITER, tol=GRAD_TOL):
    """Weighted logistic MLE by Newton-Raphson with step halving.

    ``X`` must already contain the intercept column. Iteration stops when the
    score (gradient of the weighted log-likelihood) has sup-norm below ``tol``.

    Returns
    -------
    theta: ndarray
    n_iter: int
    """
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float)
    weights = np.ones_like(w) if weights is None else np.asarray(weights, dtype=float)
    p = X.shape[1]
    if np.linalg.matrix_rank(X[weights > 0]) < p:
        raise DegenerateDesign(f"design matrix with {p} columns is rank deficient")

    theta = np.zeros(p)
    ll = _loglik(X, w, weights, theta)
    for it in range(1, max_iter + 1):
        mu = expit(X @ theta)
        grad = X.T @ (weights * (w - mu))
        if np.max(np.abs(grad)) < tol:
            return theta, it - 1
        H = X.T @ ((weights * mu * (1.0 - mu))[:, None] * X)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise PerfectSeparation("information matrix became singular; likelihood is unbounded") from None
        t = 1.0
        for _ in range(40):
            cand = theta + t * step
            if np.max(np.abs(cand)) > MAX_COEF:
                raise PerfectSeparation(
                    f"coefficient magnitude exceeded {MAX_COEF:g}; the classes are (nearly) separable"
                )
            ll_new = _loglik(X, w, weights, cand)
            if ll_new >= ll:
                break
            t *= 0.5
        theta, ll = cand, ll_new
    return theta, max_iter


def fit_logit(rows: LaggedRows, columns=None) -> Logit:
    """Maximum-likelihood logit of ``w`` on an intercept and lagged columns.

    Parameters
    ----------
    rows: LaggedRows
        Training rows.
    columns: ColumnSpec or str, optional
        Regressors; defaults to the columns selected for ``rows.x``.
    """
    cols = rows.spec if columns is None else ColumnSpec.parse(columns)
    if len(rows) < 2:
        raise ValidationError("need at least 2 rows to fit a propensity model")
    w = rows.w.astype(float)
    if w.min() == w.max():
        raise PerfectSeparation("only one treatment value present; intercept is unbounded")
    Z = rows.columns(cols)
    X = np.column_stack([np.ones(len(rows)), Z])
    theta, n_iter = newton_logit(X, w)
    return Logit(theta[0], theta[1:], cols, n_iter)


def logit_score(model: Logit, rows: LaggedRows) -> np.ndarray:
    """Score (gradient of the summed log-likelihood) at the model's coefficients."""
    Z = model._design(rows)
    X = np.column_stack([np.ones(len(rows)), Z])
    return X.T @ (rows.w - expit(model.linear_index(Z)))


@dataclass(frozen=True, eq=False)
class LocalLogit(PropensityModel):
    """Kernel-weighted local logit in a single column.

    At query point ``x`` the weighted log-likelihood of
    ``logit e = a + b (X - x)`` (``degree=1``) or ``logit e = a``
    (``degree=0``) is maximized over the rows with positive kernel weight,
    and ``logistic(a)`` is returned.
    """

    h: float
    kernel: KernelSpec
    column: str
    train_x: np.ndarray
    train_w: np.ndarray
    degree: int = 1

    def __post_init__(self):
        if not self.h > 0:
            raise ValidationError(f"bandwidth must be positive (got {self.h})")
        if self.degree not in (0, 1):
            raise ValidationError("local logit degree must be 0 or 1")
        for name in ("train_x", "train_w"):
            a = np.array(getattr(self, name), dtype=float).ravel()
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def at(self, x: float) -> float:
        u = self.kernel.weights(self.train_x[:, None], [x], self.h)
        keep = u > 0
        if not np.any(keep):
            raise EmptyWindow(f"no training rows within bandwidth {self.h:g} of x={x:g}")
        xs, ws, us = self.train_x[keep], self.train_w[keep], u[keep]
        us = us / us.max()
        if ws.min() == ws.max():
            raise PerfectSeparation(f"only one treatment value in the window around x={x:g}")
        cols = [np.ones(xs.shape[0])]
        if self.degree == 1:
            cols.append(xs - x)
        theta, _ = newton_logit(np.column_stack(cols), ws, us)
        return float(expit(theta[0]))

    def evaluate_rows(self, rows):
        xs = rows.column(self.column)
        uniq, inverse = np.unique(xs, return_inverse=True)
        vals = np.array([self.at(v) for v in uniq])
        return vals[inverse]

    def _evaluate_row(self, row):
        return self.at(row.value(self.column))

    def to_dict(self):
        return {"kind": "local-logit", "h": self.h, "kernel": self.kernel.name,
                "column": self.column, "degree": self.degree}


def fit_local_logit(rows: LaggedRows, column: Optional[str] = None, h: Optional[float] = None,
                    kernel: KernelSpec = KernelSpec(), degree: int = 1) -> LocalLogit:
    """Store training data for a lazily evaluated local logit.

    ``column`` defaults to the single column of ``rows.x``; ``h`` defaults to
    ``1.06 * sd(x) * n^(-1/5)``.
    """
    if column is None:
        if rows.d != 1:
            raise DimensionMismatch(f"local logit needs a single conditioning column (rows carry {rows.d})")
        column = rows.spec.columns[0]
    x = rows.column(column)
    if h is None:
        h = rule_of_thumb_bandwidth(x)
    return LocalLogit(float(h), kernel, column, x, rows.w.astype(float), degree)


@dataclass(frozen=True)
class OverlapReport:
    min_e: float
    max_e: float
    kappa: float
    violating_indices: tuple

    @property
    def ok(self) -> bool:
        return not self.violating_indices

    def to_dict(self):
        return {"min_e": self.min_e, "max_e": self.max_e, "kappa": self.kappa,
                "violating_indices": list(self.violating_indices)}


def check_overlap(model: PropensityModel, rows: LaggedRows, kappa: float = 0.05) -> OverlapReport:
    if not 0.0 < kappa < 0.5:
        raise ValidationError(f"kappa must lie in (0, 0.5) (got {kappa})")
    e = model.evaluate_rows(rows)
    bad = (e < kappa) | (e > 1.0 - kappa)
    return OverlapReport(float(e.min()), float(e.max()), float(kappa),
                         tuple(int(t) for t in rows.index[bad]))


def evaluate(model: PropensityModel, row) -> float:
    return model.evaluate(row)
