"""Replication harness for threshold-recovery tables and rate diagnostics."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import ColumnSpec, build_lagged
from .errors import InsufficientPoints, InvalidSpec, ReplicationError, TewmError
from .rules import Quadrant
from .search import SearchConfig
from .simulate import DgpSpec, QuadrantAr, default_columns, simulate, true_propensity


@dataclass(frozen=True)
class McConfig:
    spec: DgpSpec
    sample_sizes: tuple = (100, 500, 1000, 2000)
    replications: int = 500
    search: SearchConfig = field(default_factory=SearchConfig)
    workers: int = 1
    keep_raw: bool = False

    def __post_init__(self):
        if self.replications < 2:
            raise InvalidSpec("need at least 2 replications")
        if any(n < 10 for n in self.sample_sizes):
            raise InvalidSpec("sample sizes must be >= 10")
        if not isinstance(self.spec.model, QuadrantAr):
            raise InvalidSpec("threshold tables need a quadrant-ar DGP (known true thresholds)")
        object.__setattr__(self, "sample_sizes", tuple(int(n) for n in self.sample_sizes))

    @property
    def truth(self) -> tuple:
        return (self.spec.model.b1, self.spec.model.b2)

    def to_dict(self):
        return {
            "spec": self.spec.to_dict(),
            "sample_sizes": list(self.sample_sizes),
            "replications": self.replications,
            "search": self.search.to_dict(),
            "workers": self.workers,
        }


@dataclass(frozen=True)
class SizeRow:
    n: int
    mean: tuple
    var: tuple
    mse: tuple
    raw: Optional[np.ndarray] = None

    @property
    def n_var(self):
        return tuple(self.n * v for v in self.var)

    @property
    def n_mse(self):
        return tuple(self.n * v for v in self.mse)

    def to_dict(self):
        out = {"n": self.n}
        for j in range(len(self.mean)):
            b = f"b{j + 1}"
            out.update({
                f"mean_{b}": self.mean[j], f"var_{b}": self.var[j], f"mse_{b}": self.mse[j],
                f"n_var_{b}": self.n_var[j], f"n_mse_{b}": self.n_mse[j],
            })
        if self.raw is not None:
            out["raw"] = self.raw.tolist()
        return out


@dataclass(frozen=True)
class MonteCarloSummary:
    rows: tuple
    truth: tuple

    def row(self, n: int) -> SizeRow:
        return next(r for r in self.rows if r.n == n)

    def to_dict(self):
        return {"truth": list(self.truth), "rows": [r.to_dict() for r in self.rows]}

    def format_table(self) -> str:
        d = len(self.truth)
        head = ["n"]
        for j in range(1, d + 1):
            head += [f"mean_B{j}", f"n*var_B{j}", f"n*MSE_B{j}"]
        lines = ["".join(f"{h:>12}" for h in head)]
        for r in self.rows:
            cells = [f"{r.n:>12d}"]
            for j in range(d):
                cells += [f"{r.mean[j]:>12.4f}", f"{r.n_var[j]:>12.4f}", f"{r.n_mse[j]:>12.4f}"]
            lines.append("".join(cells))
        return "\n".join(lines)


def _finite_thresholds(rule: Quadrant, rows) -> tuple:
    # a sentinel threshold is reported at the edge of the observed support
    out = []
    for b, col in zip(rule.thresholds, rule.columns):
        if math.isinf(b):
            x = rows.column(col)
            b = float(x.max() if b > 0 else x.min())
        out.append(b)
    return tuple(out)


def replicate(spec: DgpSpec, n: int, stream: int, search: SearchConfig) -> tuple:
    """Learn thresholds from one sample of ``n`` rows drawn on ``stream``."""
    try:
        series = simulate(spec.with_length(n + 1).with_stream(stream))
        cols = search.columns or default_columns(spec)
        rows = build_lagged(series, cols)
        result = search.run(rows, true_propensity(spec))
        return _finite_thresholds(result.best_rule, rows)
    except TewmError as exc:
        raise ReplicationError(stream, exc) from exc


def _replicate_task(args):
    return replicate(*args)


def aggregate(n: int, thresholds: np.ndarray, truth: Sequence[float], keep_raw=False) -> SizeRow:
    thresholds = np.asarray(thresholds, dtype=float)
    truth = np.asarray(truth, dtype=float)
    mean = thresholds.mean(axis=0)
    var = thresholds.var(axis=0)
    mse = var + (mean - truth) ** 2
    return SizeRow(int(n), tuple(mean.tolist()), tuple(var.tolist()), tuple(mse.tolist()),
                   thresholds if keep_raw else None)


def run_table(cfg: McConfig) -> MonteCarloSummary:
    """Simulate, learn and aggregate for every sample size and replication.

    Replication ``r`` uses stream ``r`` of ``cfg.spec.seed`` at every sample
    size, so results do not depend on ``workers``.
    """
    tasks = [(cfg.spec, n, r, cfg.search) for n in cfg.sample_sizes for r in range(cfg.replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (8 * cfg.workers))))
    else:
        results = [_replicate_task(t) for t in tasks]
    rows = []
    R = cfg.replications
    for i, n in enumerate(cfg.sample_sizes):
        rows.append(aggregate(n, results[i * R:(i + 1) * R], cfg.truth, cfg.keep_raw))
    return MonteCarloSummary(tuple(rows), cfg.truth)


@dataclass(frozen=True)
class RateReport:
    slopes: tuple
    intercepts: tuple
    residuals: tuple

    def to_dict(self):
        return {"slopes": list(self.slopes), "intercepts": list(self.intercepts),
                "residuals": [list(r) for r in self.residuals]}


def rate_diagnostic(summary: MonteCarloSummary) -> RateReport:
    """OLS slope of log(MSE) on log(n), one per threshold."""
    if len(summary.rows) < 3:
        raise InsufficientPoints(f"need at least 3 sample sizes (got {len(summary.rows)})")
    logn = np.log([r.n for r in summary.rows])
    mse = np.array([r.mse for r in summary.rows])
    if np.any(mse <= 0):
        raise InsufficientPoints("MSE must be positive at every sample size to take logs")
    design = np.column_stack([np.ones_like(logn), logn])
    slopes, intercepts, residuals = [], [], []
    for j in range(mse.shape[1]):
        coef, *_ = np.linalg.lstsq(design, np.log(mse[:, j]), rcond=None)
        intercepts.append(float(coef[0]))
        slopes.append(float(coef[1]))
        residuals.append(tuple((np.log(mse[:, j]) - design @ coef).tolist()))
    return RateReport(tuple(slopes), tuple(intercepts), tuple(residuals))
