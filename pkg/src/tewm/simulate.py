"""Data-generating processes and a long-horizon welfare oracle.

Randomness comes from PCG64 streams ``SeedSequence(seed, spawn_key=(stream,))``.
Each period consumes one block of uniforms in a fixed order (shock, then
covariate, then treatment); normals are obtained by inverting the standard
normal CDF, so a path depends only on the uniform sequence.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np
from scipy.special import logit, ndtri

from .data import ColumnSpec, TimeSeries, build_lagged
from .errors import InvalidSpec, UnsupportedSpec
from .propensity import Constant, Logit, PropensityModel
from .rules import PolicyRule, Quadrant
from .welfare import ipw_components

ORACLE_STREAM = 2**31
N_BATCHES = 100


@dataclass(frozen=True)
class QuadrantAr:
    """``Y_t = W_t mu(Y_{t-1}, Z_{t-1}) + phi Y_{t-1} + eps_t`` with ``W_t ~ Bernoulli(e)``.

    ``mu`` is +1 inside ``{y < b1, z < b2}`` and -1 when ``y > b1`` or
    ``z > b2``.
    """

    phi: float = 0.5
    b1: float = 2.5
    b2: float = 0.52
    e: float = 0.5
    sigma_eps: float = 1.0
    sigma_z: float = 1.0

    def validate(self):
        if not abs(self.phi) < 1:
            raise InvalidSpec(f"|phi| must be < 1 (got {self.phi})")
        if not 0 < self.e < 1:
            raise InvalidSpec(f"e must lie in (0, 1) (got {self.e})")
        if self.sigma_eps < 0 or self.sigma_z < 0:
            raise InvalidSpec("standard deviations must be nonnegative")
        if not (math.isfinite(self.b1) and math.isfinite(self.b2)):
            raise InvalidSpec("thresholds must be finite")


@dataclass(frozen=True)
class MarkovSwitch:
    """``Y_t = beta0 + beta1 W_t + beta2 W_{t-1} + eps_t`` with a two-state chain.

    ``Pr(W_t = 1 | W_{t-1} = 1) = p`` and ``Pr(W_t = 0 | W_{t-1} = 0) = q``.
    """

    p: float = 0.7
    q: float = 0.6
    beta0: float = 0.0
    beta1: float = 1.0
    beta2: float = -0.5
    sigma_eps: float = 1.0

    def validate(self):
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise InvalidSpec(f"p and q must lie in (0, 1) (got p={self.p}, q={self.q})")
        if self.sigma_eps < 0:
            raise InvalidSpec("sigma_eps must be nonnegative")

    @property
    def stationary_treated(self) -> float:
        return (1 - self.q) / (2 - self.p - self.q)


Model = Union[QuadrantAr, MarkovSwitch]


@dataclass(frozen=True)
class DgpSpec:
    model: Model = field(default_factory=QuadrantAr)
    T: int = 1001
    seed: int = 0
    stream: int = 0

    def with_stream(self, stream: int) -> "DgpSpec":
        return replace(self, stream=int(stream))

    def with_length(self, T: int) -> "DgpSpec":
        return replace(self, T=int(T))

    def to_dict(self):
        d = {"dgp": "quadrant-ar" if isinstance(self.model, QuadrantAr) else "markov-switch"}
        d.update(self.model.__dict__)
        d.update(T=self.T, seed=self.seed, stream=self.stream)
        return d


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(stream),))))


def _uniforms(rng, T, width):
    # rng.random() is a multiple of 2^-53 in [0, 1); shift into the open interval
    return rng.random((T, width)) + 2.0**-54


def quadrant_ar_recursion(w, z, eps, phi, b1, b2, y0=0.0) -> np.ndarray:
    """Outcome path given treatments, covariates and shocks (``eps[0]`` unused)."""
    T = len(w)
    y = np.empty(T)
    y[0] = y0
    prev = y0
    w = np.asarray(w, dtype=float)
    for t in range(1, T):
        zp = z[t - 1]
        if prev < b1 and zp < b2:
            mu = 1.0
        elif prev > b1 or zp > b2:
            mu = -1.0
        else:
            mu = 0.0
        prev = w[t] * mu + phi * prev + eps[t]
        y[t] = prev
    return y


def simulate(spec: DgpSpec) -> TimeSeries:
    """Draw a path of length ``spec.T``; ``Y_0 = 0``."""
    if spec.T < 2:
        raise InvalidSpec(f"T must be >= 2 (got {spec.T})")
    m = spec.model
    m.validate()
    rng = generator(spec.seed, spec.stream)
    if isinstance(m, QuadrantAr):
        u = _uniforms(rng, spec.T, 3)
        eps = m.sigma_eps * ndtri(u[:, 0])
        z = m.sigma_z * ndtri(u[:, 1])
        w = (u[:, 2] < m.e).astype(float)
        y = quadrant_ar_recursion(w, z, eps, m.phi, m.b1, m.b2)
        return TimeSeries(y, w, z[:, None])
    if isinstance(m, MarkovSwitch):
        u = _uniforms(rng, spec.T, 2)
        eps = m.sigma_eps * ndtri(u[:, 0])
        w = np.empty(spec.T)
        w[0] = float(u[0, 1] < m.stationary_treated)
        stay, enter = m.p, 1.0 - m.q
        for t in range(1, spec.T):
            w[t] = float(u[t, 1] < (stay if w[t - 1] else enter))
        y = m.beta0 + m.beta1 * w + m.beta2 * np.concatenate([[0.0], w[:-1]]) + eps
        y[0] = 0.0
        return TimeSeries(y, w)
    raise InvalidSpec(f"unknown model {m!r}")


def true_propensity(spec: DgpSpec) -> PropensityModel:
    m = spec.model
    if isinstance(m, QuadrantAr):
        return Constant(m.e)
    if isinstance(m, MarkovSwitch):
        a = float(logit(1.0 - m.q))
        return Logit(a, [float(logit(m.p)) - a], ColumnSpec(("w_lag",)))
    raise InvalidSpec(f"unknown model {m!r}")


def first_best_rule(spec: DgpSpec) -> Quadrant:
    m = spec.model
    if not isinstance(m, QuadrantAr):
        raise UnsupportedSpec("a closed-form first-best rule is available for quadrant-ar only")
    return Quadrant((-1, -1), (m.b1, m.b2), ColumnSpec(("y_lag", "z1_lag")))


def default_columns(spec: DgpSpec) -> ColumnSpec:
    if isinstance(spec.model, QuadrantAr):
        return ColumnSpec(("y_lag", "z1_lag"))
    return ColumnSpec(("w_lag",))


@dataclass(frozen=True)
class OracleReport:
    welfare_true: float
    regret: Optional[float]
    horizon: int
    std_error: float

    def to_dict(self):
        return dict(self.__dict__)


@functools.lru_cache(maxsize=4)
def _oracle_components(spec: DgpSpec, horizon: int):
    path_spec = replace(spec, T=horizon + 1, stream=ORACLE_STREAM)
    rows = build_lagged(simulate(path_spec), default_columns(spec))
    treated, control = ipw_components(rows, true_propensity(spec))
    return rows, treated, control


def batch_means_se(terms, n_batches: int = N_BATCHES) -> float:
    batches = np.array_split(np.asarray(terms, dtype=float), n_batches)
    means = np.array([b.mean() for b in batches])
    return float(means.std(ddof=1) / math.sqrt(n_batches))


def _oracle_terms(spec, rule, horizon):
    if horizon < 10_000:
        raise InvalidSpec(f"oracle horizon must be >= 10^4 (got {horizon})")
    spec.model.validate()
    rows, treated, control = _oracle_components(spec, int(horizon))
    return np.where(rule.assign(rows), treated, control)


def oracle_welfare(spec: DgpSpec, rule: PolicyRule, horizon: int = 1_000_000) -> OracleReport:
    """IPW welfare of ``rule`` under the true propensity on a fresh long path.

    The path uses ``spec.seed`` on a dedicated oracle stream, so it never
    coincides with a replication stream of the same seed.
    """
    terms = _oracle_terms(spec, rule, horizon)
    return OracleReport(float(np.mean(terms)), None, int(horizon), batch_means_se(terms))


def regret(spec: DgpSpec, learned: PolicyRule, horizon: int = 1_000_000) -> OracleReport:
    """Oracle welfare of the first-best rule minus that of ``learned`` (same path)."""
    best = first_best_rule(spec)
    a = _oracle_terms(spec, best, horizon)
    b = _oracle_terms(spec, learned, horizon)
    diff = a - b
    return OracleReport(float(np.mean(a)), float(np.mean(a) - np.mean(b)), int(horizon), batch_means_se(diff))
