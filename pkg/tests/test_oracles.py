import numpy as np
import pytest

from src.core.errors import ValidacionError
from src.core.oracles import (
    app1_decreasing_returns_producer,
    app1_optimal_labor,
    app1_producer,
    app1_wtp_closed_form,
    app2_optimal_labor,
    app2_producer,
    app2_wtp,
    app3_optimal_labor,
    app3_producer,
    app3_wtp_implicit,
    crowd_out_derivative,
    generic_wtp,
    identify_alpha_app1,
    solve_generic_wtp,
)


def test_linear_production_matches_closed_form():
    rng = np.random.default_rng(5)
    for _ in range(100):
        w = rng.uniform(0.5, 2.0)
        c = rng.uniform(0.5, 2.0)
        psi = rng.uniform(1.5, 3.0)
        l_hat = rng.uniform(0.5, 3.0)
        delta = rng.uniform(0.01, 0.5)
        numeric = generic_wtp(app1_producer(w, c, psi, l_hat), delta)
        assert numeric == pytest.approx(app1_wtp_closed_form(w, c, psi, l_hat, delta), rel=1e-8)


def test_identified_tfp_inverts_optimal_labor():
    alpha = identify_alpha_app1(1.7, 1.0, 0.8, 2.5)
    assert app1_optimal_labor(alpha, 1.0, 0.8, 2.5) == pytest.approx(1.7, rel=1e-12)
    assert app1_optimal_labor(0.5, 1.0, 0.8, 2.5) == 0.0
    with pytest.raises(ValidacionError):
        identify_alpha_app1(1.0, 1.0, 0.8, 1.0)


def test_linear_production_has_no_crowd_out():
    prod = app1_producer(1.0, 1.0, 2.0, 1.5)
    assert crowd_out_derivative(prod, 0.2) == pytest.approx(0.0, abs=1e-3)


def test_decreasing_returns_partial_crowd_out():
    prod = app1_decreasing_returns_producer(w=0.5, c=0.2, psi=2.0, beta=0.5, alpha=4.0)
    d = crowd_out_derivative(prod, 0.1)
    assert -1.0 < d < 0.0


def test_linear_cost_wtp_does_not_reveal_tfp():
    w, beta, delta = 3.0, 0.5, 0.1
    values = []
    for alpha in (2.0, 4.0, 10.0):
        assert app2_optimal_labor(w, beta, alpha) >= delta
        numeric = generic_wtp(app2_producer(w, beta, alpha), delta)
        assert numeric == pytest.approx(app2_wtp(w, beta, alpha, delta), rel=1e-7)
        values.append(numeric)
    assert max(values) - min(values) <= 1e-7 * w * delta


def test_linear_cost_closed_form_needs_full_crowd_out():
    with pytest.raises(ValidacionError):
        app2_wtp(3.0, 0.5, 1.0, 0.1)


def test_log_benefit_matches_implicit_solution():
    params = dict(alpha=2.0, beta=0.3, eta=0.5, phi=1.0, psi=2.0)
    m, d, delta = 10.0, 1.0, 0.5
    numeric = generic_wtp(app3_producer(m=m, d=d, **params), delta)
    assert numeric == pytest.approx(app3_wtp_implicit(m=m, d=d, delta=delta, **params), rel=1e-6)
    assert 0 < numeric < m


def test_log_benefit_optimal_labor():
    params = dict(alpha=2.0, beta=0.3, eta=0.5, phi=1.0, psi=2.0)
    result = solve_generic_wtp(app3_producer(m=10.0, d=1.0, **params), 0.0)
    assert result.wtp == 0.0
    assert result.x_star == pytest.approx(app3_optimal_labor(d=1.0, **params), rel=1e-6)


def test_negative_offer_rejected():
    with pytest.raises(ValidacionError):
        generic_wtp(app1_producer(1.0, 1.0, 2.0, 1.0), -0.1)
