import math

import numpy as np
import pytest

from tewm.data import build_lagged
from tewm.errors import InvalidSpec, UnsupportedSpec
from tewm.rules import Complement, control_all
from tewm.simulate import (
    DgpSpec, MarkovSwitch, QuadrantAr, first_best_rule, oracle_welfare, quadrant_ar_recursion, regret,
    simulate, true_propensity,
)


def test_noiseless_recursion_first_step():
    y = quadrant_ar_recursion(w=[0, 1], z=[0.0, 0.0], eps=[0.0, 0.0], phi=0.0, b1=2.5, b2=0.52, y0=0.0)
    assert y[1] == 1.0


def test_noiseless_simulation_treated_and_untreated():
    # sigma = 0 removes both shocks; Y_t = W_t mu + phi Y_{t-1} with Z = 0 < b2
    spec = DgpSpec(QuadrantAr(phi=0.0, sigma_eps=0.0, sigma_z=0.0), T=50, seed=3)
    s = simulate(spec)
    np.testing.assert_array_equal(s.outcomes[1:], s.treatments[1:].astype(float))


def test_paper_defaults():
    m = QuadrantAr()
    assert (m.phi, m.b1, m.b2, m.e, m.sigma_eps, m.sigma_z) == (0.5, 2.5, 0.52, 0.5, 1.0, 1.0)
    # b2 sits near the 70% quantile of the standard normal
    from scipy.stats import norm
    assert abs(norm.ppf(0.7) - m.b2) < 0.01


@pytest.mark.parametrize("model", [QuadrantAr(phi=1.0), QuadrantAr(e=0.0), MarkovSwitch(p=1.0), MarkovSwitch(q=0.0)])
def test_invalid_specs(model):
    with pytest.raises(InvalidSpec):
        simulate(DgpSpec(model, T=10))


def test_markov_transition_frequency():
    m = MarkovSwitch(p=0.7, q=0.6)
    s = simulate(DgpSpec(m, T=100_000, seed=11))
    w = s.treatments.astype(int)
    prev, cur = w[:-1], w[1:]
    p_hat = cur[prev == 1].mean()
    q_hat = 1 - cur[prev == 0].mean()
    assert abs(p_hat - m.p) < 0.01
    assert abs(q_hat - m.q) < 0.01
    assert abs(w.mean() - m.stationary_treated) < 0.01


def test_quadrant_ar_marginal_treatment():
    s = simulate(DgpSpec(QuadrantAr(e=0.3), T=100_000, seed=12))
    assert abs(s.treatments.mean() - 0.3) < 0.01


def test_reproducible_and_stream_dependent():
    spec = DgpSpec(T=500, seed=42)
    assert simulate(spec) == simulate(spec)
    assert not simulate(spec) == simulate(spec.with_stream(1))
    assert not simulate(spec) == simulate(DgpSpec(T=500, seed=43))


def test_markov_true_propensity():
    spec = DgpSpec(MarkovSwitch(p=0.8, q=0.55), T=20, seed=1)
    rows = build_lagged(simulate(spec), "w_lag")
    e = true_propensity(spec).evaluate_rows(rows)
    np.testing.assert_allclose(e, np.where(rows.w_prev == 1, 0.8, 0.45), atol=1e-14)


HORIZON = 1_000_000


def test_oracle_two_seed_agreement():
    rule = control_all(("y_lag", "z1_lag"))
    a = oracle_welfare(DgpSpec(seed=0), rule, HORIZON)
    b = oracle_welfare(DgpSpec(seed=1), rule, HORIZON)
    assert abs(a.welfare_true - b.welfare_true) < 3 * math.hypot(a.std_error, b.std_error)


def test_oracle_first_best_dominates_complement():
    spec = DgpSpec(seed=0)
    g = first_best_rule(spec)
    best = oracle_welfare(spec, g, HORIZON)
    worst = oracle_welfare(spec, Complement(g), HORIZON)
    assert best.welfare_true - worst.welfare_true > 3 * math.hypot(best.std_error, worst.std_error)


def test_regret_examples():
    spec = DgpSpec(seed=0)
    g = first_best_rule(spec)
    assert regret(spec, g, HORIZON).regret == 0.0
    r = regret(spec, Complement(g), HORIZON)
    assert r.regret > 3 * r.std_error
    with pytest.raises(UnsupportedSpec):
        regret(DgpSpec(MarkovSwitch()), g, HORIZON)
    with pytest.raises(InvalidSpec):
        oracle_welfare(spec, g, horizon=100)
