import logging
import math

import numpy as np
import pytest

from src.core import planner
from src.core.errors import InfeasibleError, ValidacionError
from src.core.model import Attributes, ContractState
from src.core.planner import (
    DUTY_MARGIN,
    PlannerProblem,
    PlannerResearcher,
    _conserve,
    _equalize,
    aggregate_objective,
    build_field_problems,
    feasibility_fixed_point,
    frozen_allocation,
    marginal_values,
    optimize_allocation,
    reallocation_magnitude,
)
from src.core.policy import solve_policy
from src.core.synth import PopulationConfig, generate_population
from tests.factories import make_planner_researcher


@pytest.fixture
def pair(cal, prefs):
    """Dos investigadores sin fundraising (φ = 1); el segundo duplica α"""
    out = []
    for i, alpha in enumerate((0.0025, 0.005)):
        c = ContractState(110_000.0, 100_000.0, 15.0)
        a = Attributes(alpha, 0.35, 1.0)
        out.append(make_planner_researcher(f"r{i}", c, a, prefs, cal))
    return out


def test_problem_validation(pair):
    with pytest.raises(ValidacionError):
        PlannerProblem(pair, objective="welfare")
    with pytest.raises(ValidacionError):
        PlannerProblem(pair, levers=())
    with pytest.raises(ValidacionError):
        PlannerProblem(pair, levers=("G",), unconstrained_budget=True)
    assert PlannerProblem(pair, levers=("D", "G")).levers == ("G", "D")


def test_funding_lever_matches_brute_force(cal, pair):
    problem = PlannerProblem(pair, objective="output", levers=("G",), cal=cal)
    result = optimize_allocation(problem)
    total = problem.g_total

    grid = np.linspace(0.0, total, 2001)
    best_value, best_g = -math.inf, None
    for g in grid:
        value, _ = aggregate_objective(problem, np.array([g, total - g]), np.array([15.0, 15.0]), 1.0)
        if value > best_value:
            best_value, best_g = value, g

    assert result.G_tilde.sum() == pytest.approx(total, rel=1e-12)
    assert result.objective_value >= best_value * (1.0 - 1e-9)
    assert abs(result.G_tilde[0] - best_g) <= 0.01 * total
    # el más productivo recibe más fondos
    assert result.G_tilde[1] > result.G_tilde[0]
    assert result.improved
    assert result.pi == 1.0


@pytest.mark.slow
def test_conservation_with_both_levers(cal, pair):
    problem = PlannerProblem(pair, objective="utility", levers=("G", "D"), kappa=10.0, cal=cal)
    result = optimize_allocation(problem)
    assert result.G_tilde.sum() == pytest.approx(problem.g_total, rel=1e-9)
    assert result.D_tilde.sum() == pytest.approx(problem.d_total, rel=1e-9)
    assert np.all(result.G_tilde >= 0)
    assert np.all((result.D_tilde >= 0) & (result.D_tilde < cal.max_hours))
    assert result.objective_value >= result.actual_objective - 1e-9 * abs(result.actual_objective)


def test_unconstrained_budget_keeps_pi_at_one(cal, pair):
    problem = PlannerProblem(pair, levers=("D",), unconstrained_budget=True, cal=cal)
    result = optimize_allocation(problem)
    assert result.pi == 1.0
    assert result.D_tilde.sum() == pytest.approx(problem.d_total, rel=1e-9)


def test_frozen_allocation_is_identity(cal, pair):
    problem = PlannerProblem(pair, cal=cal)
    frozen = frozen_allocation(problem)
    np.testing.assert_array_equal(frozen.G_tilde, [100_000.0, 100_000.0])
    assert frozen.objective_value == frozen.actual_objective
    assert reallocation_magnitude(frozen.G_tilde, frozen.G_tilde) == 0.0


def test_envelope_condition(cal, contract, fundraiser, non_fundraiser, prefs):
    for a in (fundraiser, non_fundraiser):
        r = make_planner_researcher("r", contract, a, prefs, cal)
        mv = marginal_values(r, contract.guaranteed_funding, contract.duties, 1.0, 1.0, cal)
        sol = solve_policy(contract, a, prefs, cal)
        expected = sol.Y ** (-prefs.eta) * a.funding_intensity * sol.Y / sol.B
        assert mv.dV_dG == pytest.approx(expected, rel=1e-5)
        assert mv.dY_dG > 0
        assert mv.dV_dD < 0


def test_feasibility_factor_reproduces_raised_funds(cal, contract, fundraiser, prefs):
    r = make_planner_researcher("r", contract, fundraiser, prefs, cal)
    moved = contract.guaranteed_funding * 2.0
    result = feasibility_fixed_point([r], [moved], [contract.duties], cal)
    assert result.converged
    sol = solve_policy(contract.with_levers(G=moved), fundraiser, prefs, cal, result.pi)
    raised = result.pi * fundraiser.fundraising_ability * sol.F
    assert raised == pytest.approx(r.expected_extra_funding, rel=1e-5)


def test_feasibility_at_status_quo_is_one(cal, contract, fundraiser, prefs):
    r = make_planner_researcher("r", contract, fundraiser, prefs, cal)
    result = feasibility_fixed_point([r], [contract.guaranteed_funding], [contract.duties], cal)
    assert result.pi == pytest.approx(1.0, rel=1e-6)


def test_vacuous_feasibility_without_fundraisers(cal, pair):
    result = feasibility_fixed_point(pair, [1.0, 2.0], [15.0, 15.0], cal)
    assert (result.pi, result.method) == (1.0, "vacuous")


def test_reallocation_magnitude():
    assert reallocation_magnitude([1.0, 3.0], [2.0, 2.0]) == pytest.approx(0.25)
    assert reallocation_magnitude([0.0, 0.0], [1.0, 0.0]) is None
    with pytest.raises(ValidacionError):
        reallocation_magnitude([1.0], [1.0, 2.0])


def test_build_field_problems(population):
    researchers = population.planner_researchers()
    problems = build_field_problems(researchers, objective="output")
    assert sum(len(p.researchers) for p in problems) == len(researchers)
    assert [p.field_label for p in problems] == sorted({r.field_label for r in researchers})
    pooled = build_field_problems(researchers, across_fields=True)
    assert len(pooled) == 1 and pooled[0].field_label == "all"


def test_conserve_redistributes_clipped_excess():
    np.testing.assert_allclose(_conserve([30.0, 90.0], 100.0, [10.0, 200.0]), [10.0, 90.0])
    np.testing.assert_allclose(_conserve([40.0, 40.0], 100.0, [10.0, 200.0]), [10.0, 90.0])
    out = _conserve([0.0, 50.0, 70.0], 100.0, 200.0)
    assert math.fsum(out) == pytest.approx(100.0, rel=1e-13)
    assert out[0] == 0.0
    with pytest.raises(InfeasibleError):
        _conserve([1.0, 1.0], 30.0, 10.0)


def test_equalize_without_crossing_keeps_bounds(monkeypatch, caplog, cal, prefs, non_fundraiser):
    researchers = [
        PlannerResearcher(f"r{i}", "Natural Sciences", ContractState(110_000.0, 80_000.0, d), non_fundraiser, prefs, 0.0)
        for i, d in enumerate((61.5, 0.5))
    ]
    problem = PlannerProblem(researchers, levers=("D",), cal=cal, field_label="plano")
    monkeypatch.setattr(planner, "_lever_marginal", lambda *args: 1.0)
    G = np.array([80_000.0, 80_000.0])
    D = np.array([61.5, 0.5])
    with caplog.at_level(logging.WARNING, logger="src.core.planner"):
        values, _ = _equalize(problem, "D", G, D, 1.0)
    upper = cal.max_hours - DUTY_MARGIN
    assert np.all(values <= upper)
    assert math.fsum(values) == pytest.approx(62.0, rel=1e-13)
    np.testing.assert_allclose(values, [upper, 62.0 - upper])
    assert any("sin cruce" in rec.getMessage() for rec in caplog.records)


def test_low_productivity_researcher_sits_at_zero_funding(cal, prefs):
    researchers = [
        make_planner_researcher(f"r{i}", ContractState(110_000.0, 100_000.0, 15.0), Attributes(alpha, 0.35, 1.0), prefs, cal)
        for i, alpha in enumerate((5e-6, 0.005))
    ]
    problem = PlannerProblem(researchers, objective="output", levers=("G",), cal=cal)
    result = optimize_allocation(problem)
    assert result.G_tilde[0] == 0.0
    assert result.G_tilde.sum() == pytest.approx(problem.g_total, rel=1e-12)
    assert result.kkt_residuals["G"] <= 1e-6


def test_identical_researchers_split_evenly(cal, prefs):
    c = ContractState(110_000.0, 100_000.0, 15.0)
    researchers = [make_planner_researcher(f"r{i}", c, Attributes(0.0025, 0.35, 1.0), prefs, cal) for i in range(3)]
    result = optimize_allocation(PlannerProblem(researchers, objective="output", levers=("G",), cal=cal))
    np.testing.assert_allclose(result.G_tilde, [100_000.0] * 3, rtol=1e-6)
    assert result.converged


def test_single_researcher_is_unchanged(cal, contract, fundraiser, prefs):
    r = make_planner_researcher("r0", contract, fundraiser, prefs, cal)
    result = optimize_allocation(PlannerProblem([r], cal=cal))
    np.testing.assert_array_equal(result.G_tilde, [contract.guaranteed_funding])
    np.testing.assert_array_equal(result.D_tilde, [contract.duties])
    assert result.converged
    assert result.iterations == 0


@pytest.mark.slow
def test_fundraisers_keep_raised_funds(cal, contract, prefs):
    researchers = [
        make_planner_researcher(f"r{i}", contract, Attributes(alpha, 0.35, 20_000.0), prefs, cal)
        for i, alpha in enumerate((0.0025, 0.004))
    ]
    problem = PlannerProblem(researchers, objective="output", levers=("G",), cal=cal)
    result = optimize_allocation(problem)
    assert result.G_tilde.sum() == pytest.approx(problem.g_total, rel=1e-9)
    assert np.all(result.G_tilde >= 0)
    raised = result.pi * math.fsum(
        r.attributes.fundraising_ability * s.F for r, s in zip(researchers, result.solutions)
    )
    expected = math.fsum(r.expected_extra_funding for r in researchers)
    assert raised == pytest.approx(expected, rel=1e-5)
    assert result.objective_value >= result.actual_objective * (1.0 - 1e-12)


@pytest.mark.slow
def test_multipliers_equalized_across_population(cal):
    cfg = PopulationConfig(
        n=10, seed=5, field_shares={"Natural Sciences": 1.0}, low_phi_share=1.0, low_phi_median=1.0
    )
    researchers = generate_population(cfg).planner_researchers()
    problem = PlannerProblem(researchers, objective="output", levers=("G",), cal=cal)
    result = optimize_allocation(problem)
    assert result.improved
    assert result.G_tilde.sum() == pytest.approx(problem.g_total, rel=1e-8)
    assert result.multiplier_dispersion["G"] <= 1e-4
    assert result.objective_value >= result.actual_objective
