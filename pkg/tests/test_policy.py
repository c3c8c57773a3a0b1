import numpy as np
import pytest

from src.core.errors import ValidacionError
from src.core.model import Attributes, ContractState, cobb_douglas
from src.core.policy import (
    LEFT,
    RIGHT,
    fundraising_threshold,
    hours_residual,
    interior_fundraising,
    objective_at,
    output_marginal_benefit,
    solve_policy,
)


def test_fundraiser_interior_solution(cal, contract, fundraiser, prefs):
    sol = solve_policy(contract, fundraiser, prefs, cal)
    assert sol.F > 0
    assert not sol.fundraising_corner
    assert not sol.hours_corner
    assert sol.lambda_F == 0.0 and sol.lambda_H == 0.0
    assert abs(sol.residual) <= 1e-8


def test_non_fundraiser_has_corner_multiplier(cal, contract, non_fundraiser, prefs):
    sol = solve_policy(contract, non_fundraiser, prefs, cal)
    assert sol.F == 0.0
    assert sol.fundraising_corner
    assert sol.lambda_F >= 0.0
    assert sol.H <= fundraising_threshold(contract, non_fundraiser, cal)
    assert abs(sol.residual) <= 1e-8


def test_accounting_identities(cal, contract, fundraiser, prefs):
    sol = solve_policy(contract, fundraiser, prefs, cal)
    assert sol.R + sol.F + contract.duties == pytest.approx(sol.H, abs=1e-9)
    phi = fundraiser.fundraising_ability
    assert sol.B == pytest.approx(cal.min_funding + contract.guaranteed_funding + phi * sol.F)
    assert sol.Y == pytest.approx(cobb_douglas(fundraiser.tfp, fundraiser.funding_intensity, sol.B, sol.R))
    assert sol.F == pytest.approx(interior_fundraising(sol.H, contract, fundraiser, cal))


def test_solution_beats_feasible_perturbations(cal, prefs):
    rng = np.random.default_rng(2024)
    for _ in range(20):
        c = ContractState(
            salary=float(rng.uniform(60_000, 200_000)),
            guaranteed_funding=float(rng.uniform(0, 300_000)),
            duties=float(rng.uniform(0, 30)),
        )
        a = Attributes(
            tfp=float(np.exp(rng.normal(np.log(0.0025), 0.4))),
            funding_intensity=float(rng.uniform(0.1, 0.6)),
            fundraising_ability=float(np.exp(rng.normal(np.log(5_000), 1.5))) + 1.0,
        )
        sol = solve_policy(c, a, prefs, cal)
        best = objective_at(sol.H, sol.F, c, a, prefs, cal)
        assert best == pytest.approx(sol.V, rel=1e-12)
        for _ in range(200):
            H = float(rng.uniform(c.duties + 1e-3, cal.max_hours))
            F = float(rng.uniform(0, H - c.duties))
            assert objective_at(H, F, c, a, prefs, cal) <= sol.V + 1e-12 * abs(sol.V)


def test_marginal_benefit_continuous_at_kink(cal, contract, fundraiser, prefs):
    H = fundraising_threshold(contract, fundraiser, cal)
    g, phi = fundraiser.funding_intensity, fundraiser.fundraising_ability
    left = output_marginal_benefit(H, LEFT, contract, g, phi, prefs.eta, cal)
    right = output_marginal_benefit(H, RIGHT, contract, g, phi, prefs.eta, cal)
    assert left == pytest.approx(right, rel=1e-9)


def test_hours_residual_rejects_wrong_branch(cal, contract, fundraiser, prefs):
    threshold = fundraising_threshold(contract, fundraiser, cal)
    with pytest.raises(ValidacionError):
        hours_residual(threshold + 1.0, LEFT, contract, fundraiser, prefs, cal)
    with pytest.raises(ValidacionError):
        hours_residual(threshold - 1.0, RIGHT, contract, fundraiser, prefs, cal)
    with pytest.raises(ValidacionError):
        hours_residual(cal.max_hours + 1.0, RIGHT, contract, fundraiser, prefs, cal)


def test_hours_corner_for_very_productive_researcher(cal, contract, prefs):
    a = Attributes(tfp=5.0, funding_intensity=0.35, fundraising_ability=20_000.0)
    sol = solve_policy(contract, a, prefs, cal)
    assert sol.H == cal.max_hours
    assert sol.hours_corner
    assert sol.lambda_H > 0


def test_pi_scales_fundraising_ability(cal, contract, fundraiser, prefs):
    scaled = solve_policy(contract, fundraiser, prefs, cal, pi=0.5)
    halved = Attributes(fundraiser.tfp, fundraiser.funding_intensity, fundraiser.fundraising_ability / 2)
    direct = solve_policy(contract, halved, prefs, cal)
    assert scaled.H == pytest.approx(direct.H, rel=1e-10)
    assert scaled.F == pytest.approx(direct.F, rel=1e-9)
    with pytest.raises(ValidacionError):
        solve_policy(contract, fundraiser, prefs, cal, pi=0.0)


def test_output_increases_with_tfp(cal, contract, fundraiser, prefs):
    richer = Attributes(2 * fundraiser.tfp, fundraiser.funding_intensity, fundraiser.fundraising_ability)
    assert solve_policy(contract, richer, prefs, cal).Y > solve_policy(contract, fundraiser, prefs, cal).Y


def test_zero_duties_solve(cal, fundraiser, prefs):
    sol = solve_policy(ContractState(90_000, 0.0, 0.0), fundraiser, prefs, cal)
    assert sol.R + sol.F == pytest.approx(sol.H, abs=1e-9)
