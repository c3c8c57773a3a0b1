import logging
import math

import numpy as np
import pytest
from scipy.optimize import rosen

from src.core.errors import EstimationError
from src.core.estimator import (
    FAILURE_PENALTY,
    DEFAULT_GRID,
    EstimationConfig,
    estimate,
    evaluate_loss,
    gmm_loss,
    initial_grid,
    simplex_minimize,
)
from src.core.type_index import DeepParams


def small_grid(**overrides):
    truth = DeepParams.homogeneous(omega=1100.0, psi=7e-4, sigma=1.5, eta=0.5, xi=1.2, zeta=1.0)
    grid = {name: (value,) for name, value in truth.to_dict().items()}
    grid.update(overrides)
    return truth, grid


@pytest.fixture(scope="module")
def fundraisers(fundraiser_population):
    return [r for r in fundraiser_population.records if r.allocation.fundraising > 0]


def test_default_grid_size():
    assert len(initial_grid()) == 216
    assert len(initial_grid(DEFAULT_GRID)) == 216


def test_loss_vanishes_at_truth(cal, fundraisers):
    truth, _ = small_grid()
    evaluation = evaluate_loss(truth, fundraisers, cal)
    assert evaluation.n_penalized == 0
    assert evaluation.value < 1e-6 * len(fundraisers)
    assert {row["experiment"] for row in evaluation.residuals} <= {1, 2, 3, 4}


def test_loss_is_deterministic(cal, fundraisers):
    truth, _ = small_grid()
    mu = DeepParams(**{**truth.to_dict(), "omega": 900.0})
    assert gmm_loss(mu, fundraisers, cal) == gmm_loss(mu, list(reversed(fundraisers)), cal)


def test_failures_are_penalized(cal, fundraisers):
    # σ = 1 no tiene utilidad de ingreso definida
    truth, _ = small_grid()
    mu = DeepParams(**{**truth.to_dict(), "d_sigma0": 0.0})
    evaluation = evaluate_loss(mu, fundraisers, cal)
    assert evaluation.n_penalized == len(fundraisers)
    assert evaluation.value == FAILURE_PENALTY * len(fundraisers)


def test_grid_recovers_truth(cal, fundraisers):
    truth, grid = small_grid(
        omega=(110.0, 1100.0, 11_000.0),
        d_sigma0=(math.log(1.5), math.log(2.0)),
    )
    result = estimate(fundraisers, EstimationConfig(grid=grid, grid_only=True), cal)
    assert result.mu_hat.omega == 1100.0
    assert result.mu_hat.d_sigma0 == pytest.approx(math.log(1.5))
    assert result.loss < 1e-6 * len(fundraisers)
    assert result.grid_only
    assert sum(1 for t in result.trace if t["stage"] == 0) == 6
    assert list(result.residuals.columns) == ["id", "experiment", "observed", "predicted", "residual"]


def test_all_candidates_penalized(cal, fundraisers):
    _, grid = small_grid(d_sigma0=(0.0,))
    with pytest.raises(EstimationError):
        estimate(fundraisers[:5], EstimationConfig(grid=grid, grid_only=True), cal)


@pytest.mark.slow
def test_refinement_never_worsens_grid_point(cal, fundraisers):
    _, grid = small_grid(omega=(900.0,))
    cfg_grid = EstimationConfig(grid=grid, grid_only=True)
    cfg_full = EstimationConfig(grid=grid, max_evaluations=60, final_repeats=1)
    coarse = estimate(fundraisers[:10], cfg_grid, cal)
    refined = estimate(fundraisers[:10], cfg_full, cal)
    assert refined.loss <= coarse.loss
    assert {t["stage"] for t in refined.trace} == {0, 1, 2, 3}


def test_simplex_on_quadratic():
    res = simplex_minimize(
        lambda x: (x[0] - 1.0) ** 2 + (x[1] + 2.0) ** 2,
        [0.0, 0.0],
        xatol=1e-9,
        fatol=1e-14,
        step=0.5,
    )
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, -2.0], atol=1e-6)


def test_simplex_flat_function_returns_start():
    res = simplex_minimize(lambda x: 3.0, [0.5, 0.5])
    assert res.converged
    assert res.fun == 3.0
    np.testing.assert_array_equal(res.x, [0.5, 0.5])


def test_simplex_flat_start_is_reported(caplog):
    with caplog.at_level(logging.WARNING, logger="src.core.estimator"):
        res = simplex_minimize(lambda x: 3.0, [0.5, 0.5])
    assert res.flat
    assert res.n_iter == 0
    assert any("plano" in rec.getMessage() for rec in caplog.records)
    assert not simplex_minimize(lambda x: float(x[0] ** 2), [0.5], step=0.1).flat


def test_simplex_on_rosenbrock():
    res = simplex_minimize(rosen, [-1.2, 1.0], xatol=1e-10, fatol=1e-14, max_evals=5000)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)
    assert res.fun < 1e-8


def test_simplex_on_scaled_quadratic_in_six_dimensions():
    center = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 2.0])
    scales = np.arange(1.0, 7.0)

    def f(x):
        return float(np.sum(scales * (x - center) ** 2))

    res = simplex_minimize(f, np.zeros(6), xatol=1e-9, fatol=1e-16, max_evals=50_000, step=0.5)
    assert res.converged
    np.testing.assert_allclose(res.x, center, atol=1e-5)


@pytest.mark.slow
def test_full_default_grid_then_refinement(cal, fundraisers):
    records = fundraisers[:10]
    cfg = EstimationConfig(max_evaluations=200, final_repeats=1, threads=1)
    result = estimate(records, cfg, cal)

    grid_points = [t for t in result.trace if t["stage"] == 0]
    assert len(grid_points) == len(initial_grid(DEFAULT_GRID)) == 216
    # σ = exp(0) = 1 no tiene utilidad de ingreso definida
    assert all(t["penalized"] for t in grid_points if t["mu"]["d_sigma0"] == 0.0)
    best_grid = min(t["loss"] for t in grid_points if not t["penalized"])
    assert result.loss < best_grid
    assert {t["stage"] for t in result.trace} == {0, 1, 2, 3}
    assert all("flat_start" in t for t in result.trace if t["stage"] > 0)
