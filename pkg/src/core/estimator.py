"""Estimación GMM de μ: grilla inicial y refinamiento Nelder-Mead por etapas"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .errors import EstimationError, ModeloError, ValidacionError
from .identification import ZeroFundraiserModels, fit_models_for, identify_researcher
from .model import Calibration, ResearcherRecord
from .policy import solve_policy
from .type_index import DeepParams, preference_params_from_type
from .wtp import indifference_salary, standard_offers

logger = logging.getLogger(__name__)

FAILURE_PENALTY = 1e12

DEFAULT_GRID = {
    "omega": (0.1, 1.0, 10.0),
    "psi": (1e-5, 1.0, 10.0),
    "d_sigma0": (-100.0, 0.0),
    "d_sigma1": (0.0,),
    "d_eta0": (math.log(0.8) - math.log(0.2), 0.0, math.log(0.2) - math.log(0.8)),
    "d_eta1": (0.0,),
    "d_xi0": (-11.5, math.log(2.0)),
    "d_xi1": (0.0,),
    "d_zeta0": (-11.5, 0.0),
    "d_zeta1": (0.0,),
}


@dataclass
class EstimationConfig:
    """Grilla inicial, tolerancias por etapa y umbrales de supervivencia"""

    grid: Dict[str, Sequence[float]] = field(default_factory=lambda: dict(DEFAULT_GRID))
    grid_survivor_share: float = 0.005
    stage_survivor_share: float = 0.01
    stage_loss_tolerances: Sequence[float] = (1e-2, 1e-4, 1e-6)
    param_tolerance: float = 1e-6
    max_evaluations: int = 2000
    final_repeats: int = 2
    loss_floor: float = 1e-8
    threads: int = 1
    grid_only: bool = False

    def __post_init__(self):
        if not (self.grid_survivor_share > 0 and self.stage_survivor_share > 0):
            raise ValidacionError("Los umbrales de supervivencia deben ser positivos")
        for name in DeepParams.NAMES:
            if not self.grid.get(name):
                raise ValidacionError(f"Grilla vacía para '{name}'")


@dataclass
class LossEvaluation:
    value: float
    n_penalized: int
    failures: Dict[str, str]
    residuals: List[dict]


@dataclass
class EstimationResult:
    mu_hat: DeepParams
    loss: float
    trace: List[dict]
    residuals: pd.DataFrame
    n_penalized: int
    grid_only: bool = False


def initial_grid(grid: Optional[Dict[str, Sequence[float]]] = None) -> List[DeepParams]:
    """Producto cartesiano de la grilla (216 candidatos por defecto)"""
    grid = grid or DEFAULT_GRID
    axes = [grid[name] for name in DeepParams.NAMES]
    return [DeepParams.from_vector(values) for values in itertools.product(*axes)]


def evaluate_loss(
    mu: DeepParams,
    records: Sequence[ResearcherRecord],
    cal: Calibration,
    models: Optional[ZeroFundraiserModels] = None,
) -> LossEvaluation:
    """
    Σ_i Σ_j (M_obs − M̂)² en orden fijo (id, j) con suma compensada.

    Un investigador que falla en identificación o predicción aporta una
    penalización finita por falla.
    """
    terms: List[float] = []
    failures: Dict[str, str] = {}
    residuals: List[dict] = []
    n_failures = 0

    for r in sorted(records, key=lambda rec: rec.id):
        try:
            p = preference_params_from_type(r.type_index, mu)
            attrs, _, _ = identify_researcher(r, p, cal, models)
            c = r.contract
            offers = {o.label: o for o in standard_offers(c)}
            baseline = solve_policy(c, attrs, p, cal).non_salary_value
            predictions = {}
            for j in range(1, 5):
                observed = r.wtp_answers[j - 1]
                offer = offers.get(str(j))
                if observed is None or offer is None:
                    continue
                predictions[j] = (
                    observed,
                    indifference_salary(r, attrs, p, cal, offer, baseline_value=baseline),
                )
        except (ModeloError, ValueError, OverflowError, ZeroDivisionError) as e:
            failures[r.id] = str(e)
            n_failures += 1
            continue
        for j, (observed, predicted) in sorted(predictions.items()):
            diff = observed - predicted
            terms.append(diff * diff)
            residuals.append(
                {"id": r.id, "experiment": j, "observed": observed, "predicted": predicted, "residual": diff}
            )

    value = math.fsum(terms) + FAILURE_PENALTY * n_failures
    if not math.isfinite(value):
        value = FAILURE_PENALTY * max(1, len(records))
    return LossEvaluation(value=value, n_penalized=n_failures, failures=failures, residuals=residuals)


def gmm_loss(
    mu: DeepParams,
    records: Sequence[ResearcherRecord],
    cal: Calibration,
    models: Optional[ZeroFundraiserModels] = None,
) -> float:
    return evaluate_loss(mu, records, cal, models).value


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    converged: bool
    n_evals: int
    n_iter: int
    flat: bool = False


def simplex_minimize(
    f: Callable[[np.ndarray], float],
    x0,
    xatol: float = 1e-6,
    fatol: float = 1e-8,
    max_evals: int = 2000,
    step: Optional[float] = None,
) -> SimplexResult:
    """
    Nelder-Mead con coeficientes (1, 2, 0.5, 0.5).

    Detiene cuando la dispersión de la pérdida y el diámetro del símplex
    caen bajo las tolerancias; al agotar evaluaciones retorna el mejor punto
    con converged=False.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for i in range(n):
        if step is not None:
            simplex[i + 1, i] += step
        elif x0[i] != 0:
            simplex[i + 1, i] *= 1.05
        else:
            simplex[i + 1, i] = 0.00025

    f0 = f(x0)
    if not math.isfinite(f0):
        raise ValidacionError(f"La función no es finita en x0: {f0}")
    values = [f0] + [f(v) for v in simplex[1:]]
    if max(values) - min(values) == 0.0:
        logger.warning(f"⚠ Símplex inicial plano (pérdida {f0:.6g}): se retorna el punto inicial")
        return SimplexResult(x0, f0, True, n + 1, 0, flat=True)

    res = minimize(
        f,
        x0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": xatol,
            "fatol": fatol,
            "maxfev": max_evals,
            "maxiter": max_evals,
            "adaptive": False,
        },
    )
    x, fun = np.asarray(res.x), float(res.fun)
    if f0 < fun:
        x, fun = x0, f0
    return SimplexResult(x, fun, bool(res.success), int(res.nfev) + n + 1, int(res.nit))


def _grid_loss(args) -> float:
    mu, records, cal, models = args
    return gmm_loss(mu, records, cal, models)


def _evaluate_grid(candidates, records, cal, models, threads: int) -> List[float]:
    jobs = [(mu, records, cal, models) for mu in candidates]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_grid_loss, jobs))
    return [_grid_loss(job) for job in jobs]


def _survivors(points: List[dict], share: float) -> List[dict]:
    best = min(p["loss"] for p in points)
    return [p for p in points if p["loss"] <= best + share * abs(best)]


def estimate(
    records: Sequence[ResearcherRecord],
    cfg: EstimationConfig,
    cal: Calibration,
    models: Optional[ZeroFundraiserModels] = None,
) -> EstimationResult:
    """Etapa 0: grilla; etapa 1: símplex laxo; etapas 2–3: tolerancias crecientes"""
    if not records:
        raise ValidacionError("Dataset vacío")
    if models is None:
        models = fit_models_for(records, cal)

    trace: List[dict] = []
    candidates = initial_grid(cfg.grid)
    logger.info(f"Evaluando grilla inicial: {len(candidates)} candidatos, {len(records)} investigadores")
    losses = _evaluate_grid(candidates, records, cal, models, cfg.threads)

    n = len(records)
    points = []
    for mu, loss in zip(candidates, losses):
        penalized = loss >= FAILURE_PENALTY
        trace.append({"stage": 0, "mu": mu.to_dict(), "loss": loss, "penalized": penalized})
        if not penalized:
            points.append({"mu": mu, "loss": loss})

    if not points:
        raise EstimationError(
            f"Todos los {len(candidates)} candidatos de la grilla fueron penalizados ({n} investigadores)",
            trace,
        )

    survivors = _survivors(points, cfg.grid_survivor_share)
    logger.info(f"✓ Etapa 0: mínimo {min(p['loss'] for p in points):.6g}, {len(survivors)} sobrevivientes")

    if not cfg.grid_only:
        def objective(v: np.ndarray) -> float:
            try:
                mu = DeepParams.from_search_vector(v)
            except (OverflowError, ValueError):
                return FAILURE_PENALTY * n
            return gmm_loss(mu, records, cal, models)

        def refine(start: dict, stage: int, rel_tol: float, reference: float) -> dict:
            fatol = max(rel_tol * abs(reference), cfg.loss_floor)
            res = simplex_minimize(
                objective,
                start["mu"].to_search_vector(),
                xatol=cfg.param_tolerance,
                fatol=fatol,
                max_evals=cfg.max_evaluations,
            )
            mu = DeepParams.from_search_vector(res.x)
            loss = res.fun
            if loss > start["loss"]:
                mu, loss = start["mu"], start["loss"]
            trace.append(
                {
                    "stage": stage,
                    "start": start["mu"].to_dict(),
                    "mu": mu.to_dict(),
                    "loss": loss,
                    "converged": res.converged,
                    "n_evals": res.n_evals,
                    "flat_start": res.flat,
                }
            )
            return {"mu": mu, "loss": loss}

        tol1, tol2, tol3 = cfg.stage_loss_tolerances
        reference = min(p["loss"] for p in survivors)
        stage1 = [refine(s, 1, tol1, reference) for s in survivors]
        survivors = _survivors(stage1 + survivors, cfg.stage_survivor_share)
        logger.info(f"✓ Etapa 1: {len(survivors)} sobrevivientes")

        reference = min(p["loss"] for p in survivors)
        stage2 = [refine(s, 2, tol2, reference) for s in survivors]
        best = min(stage2 + survivors, key=lambda p: p["loss"])
        logger.info(f"✓ Etapa 2: pérdida {best['loss']:.6g}")

        for _ in range(cfg.final_repeats):
            best = min([refine(best, 3, tol3, best["loss"]), best], key=lambda p: p["loss"])
        logger.info(f"✓ Etapa 3: pérdida {best['loss']:.6g}")
    else:
        best = min(survivors, key=lambda p: p["loss"])

    final = evaluate_loss(best["mu"], records, cal, models)
    if final.n_penalized:
        logger.warning(f"⚠ {final.n_penalized} investigadores penalizados en μ̂")
    return EstimationResult(
        mu_hat=best["mu"],
        loss=final.value,
        trace=trace,
        residuals=pd.DataFrame(
            final.residuals, columns=["id", "experiment", "observed", "predicted", "residual"]
        ),
        n_penalized=final.n_penalized,
        grid_only=cfg.grid_only,
    )
