"""Identificación de atributos θ̂ = (α̂, γ̂, φ̂) a partir de asignaciones observadas"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import statsmodels.api as sm
from scipy.optimize import brentq

from .errors import ModeloError, NumericalError, ValidacionError
from .model import (
    Attributes,
    Calibration,
    ContractState,
    PreferenceParams,
    ResearcherRecord,
    TimeAllocation,
)
from .policy import (
    LEFT,
    RIGHT,
    effort_marginal_cost,
    fundraising_threshold,
    output_marginal_benefit,
    solve_policy,
)
from .type_index import DeepParams, preference_params_from_type

logger = logging.getLogger(__name__)

MIN_FUNDRAISERS = 30
RESCALE_FACTOR = 0.999
GAMMA_CLIP = 1e-12
STATE_NAMES = ("G", "D", "M")


def infer_phi(EG: float, F: float) -> float:
    """φ̂ = max(EG/F, 1)"""
    if not F > 0:
        raise ValidacionError("F = 0: usar la ruta de no-recaudadores")
    return max(EG / F, 1.0)


def infer_gamma(c: ContractState, phi: float, F: float, R: float, cal: Calibration) -> float:
    """γ̂ = B/(B + φ̂R) con B = B_min + G + φ̂F"""
    if not (R > 0 and phi >= 1):
        raise ValidacionError(f"Requiere R > 0 y φ̂ ≥ 1: R={R}, φ̂={phi}")
    B = cal.min_funding + c.guaranteed_funding + phi * F
    return B / (B + phi * R)


@dataclass(frozen=True)
class AlphaInference:
    alpha: float
    hours_corner: bool


def infer_alpha_detail(
    c: ContractState,
    alloc: TimeAllocation,
    gamma: float,
    phi: float,
    p: PreferenceParams,
    cal: Calibration,
) -> AlphaInference:
    """
    α tal que la asignación observada cumple la condición de horas de la rama activa.

    Usa el mismo beneficio marginal y costo marginal que `policy.hours_residual`;
    el residuo es α^(1−η)·beneficio − costo, así que α tiene forma cerrada.
    """
    H = alloc.total_hours
    if not (c.duties < H <= cal.max_hours and alloc.research > 0):
        raise ValidacionError(f"Asignación fuera del dominio: H={H}, D={c.duties}, R={alloc.research}")
    branch = RIGHT if alloc.fundraising > 0 else LEFT
    benefit = output_marginal_benefit(H, branch, c, gamma, phi, p.eta, cal)
    cost = effort_marginal_cost(H, c, p)
    if not (benefit > 0 and cost > 0 and math.isfinite(benefit) and math.isfinite(cost)):
        raise NumericalError(
            "Beneficio o costo marginal no positivo al identificar α",
            {"benefit": benefit, "cost": cost},
        )
    alpha = (cost / benefit) ** (1.0 / (1.0 - p.eta))
    if not (alpha > 0 and math.isfinite(alpha)):
        raise NumericalError(f"α̂ no finito: {alpha}", {"benefit": benefit, "cost": cost})
    return AlphaInference(alpha=alpha, hours_corner=H >= cal.max_hours)


def infer_alpha(
    c: ContractState,
    alloc: TimeAllocation,
    gamma: float,
    phi: float,
    p: PreferenceParams,
    cal: Calibration,
) -> float:
    """α̂; en la esquina H = H_max es la cota inferior del conjunto identificado"""
    return infer_alpha_detail(c, alloc, gamma, phi, p, cal).alpha


# ---------------------------------------------------------------------------
# Regresiones para investigadores sin fundraising
# ---------------------------------------------------------------------------

@dataclass
class ZeroFundraiserModels:
    """Polinomios cúbicos en (G, D, M) estandarizados: φ con enlace log, γ con logit"""

    state_means: List[float]
    state_sds: List[float]
    columns: List[str]
    phi_coefficients: List[float]
    gamma_coefficients: List[float]
    dropped_columns: List[str] = field(default_factory=list)
    n_obs: int = 0

    def design(self, states: np.ndarray) -> np.ndarray:
        full, names = _polynomial_design(states, self.state_means, self.state_sds)
        index = [names.index(c) for c in self.columns]
        return full[:, index]

    def predict(self, states) -> Tuple[np.ndarray, np.ndarray]:
        X = self.design(np.atleast_2d(np.asarray(states, dtype=float)))
        phi = np.exp(X @ np.asarray(self.phi_coefficients))
        gamma = 1.0 / (1.0 + np.exp(-(X @ np.asarray(self.gamma_coefficients))))
        phi = np.maximum(phi, 1.0)
        gamma = np.clip(gamma, GAMMA_CLIP, 1.0 - GAMMA_CLIP)
        return phi, gamma

    def to_dict(self) -> dict:
        return {
            "state_means": self.state_means,
            "state_sds": self.state_sds,
            "columns": self.columns,
            "phi_coefficients": self.phi_coefficients,
            "gamma_coefficients": self.gamma_coefficients,
            "dropped_columns": self.dropped_columns,
            "n_obs": self.n_obs,
        }


def state_vector(c: ContractState) -> List[float]:
    return [c.guaranteed_funding, c.duties, c.salary]


def _polynomial_design(states: np.ndarray, means, sds) -> Tuple[np.ndarray, List[str]]:
    means = np.asarray(means, dtype=float)
    sds = np.asarray(sds, dtype=float)
    Z = np.zeros_like(states, dtype=float)
    used = sds > 0
    Z[:, used] = (states[:, used] - means[used]) / sds[used]
    cols = [np.ones(states.shape[0])]
    names = ["const"]
    for power in (1, 2, 3):
        for j, name in enumerate(STATE_NAMES):
            cols.append(Z[:, j] ** power)
            names.append(f"{name}^{power}")
    return np.column_stack(cols), names


def _drop_collinear(X: np.ndarray, names: List[str]) -> Tuple[List[int], List[str]]:
    """Elimina términos de mayor orden hasta que el diseño tenga rango completo"""
    keep = list(range(X.shape[1]))
    dropped = []
    # orden de eliminación: cúbicos, cuadráticos, lineales (nunca la constante)
    order = [i for power in (3, 2, 1) for i, n in enumerate(names) if n.endswith(f"^{power}")]
    for idx in order:
        sub = X[:, keep]
        if np.linalg.matrix_rank(sub) == len(keep):
            break
        if np.allclose(X[:, idx], 0.0) or np.linalg.matrix_rank(
            X[:, [k for k in keep if k != idx]]
        ) == np.linalg.matrix_rank(sub):
            keep.remove(idx)
            dropped.append(names[idx])
    return keep, dropped


def fit_zero_fundraiser_models(
    states: Sequence[Sequence[float]],
    phi_hat: Sequence[float],
    gamma_hat: Sequence[float],
    min_obs: int = MIN_FUNDRAISERS,
) -> ZeroFundraiserModels:
    """
    Ajusta por IRLS las regresiones de φ̂ (quasi-Poisson, enlace log) y γ̂
    (logit fraccional) sobre los investigadores con F > 0.
    """
    S = np.asarray(states, dtype=float)
    phi = np.asarray(phi_hat, dtype=float)
    gamma = np.asarray(gamma_hat, dtype=float)
    if S.shape[0] < min_obs:
        raise ValidacionError(
            f"Se requieren al menos {min_obs} investigadores con F > 0: {S.shape[0]}"
        )

    means = S.mean(axis=0)
    sds = S.std(axis=0)
    sds = np.where(sds > 1e-12 * np.maximum(1.0, np.abs(means)), sds, 0.0)
    X_full, names = _polynomial_design(S, means, sds)
    keep, dropped = _drop_collinear(X_full, names)
    if dropped:
        logger.warning(f"⚠ Diseño singular: se eliminan los términos {dropped}")
    X = X_full[:, keep]

    phi_fit = sm.GLM(phi, X, family=sm.families.Poisson()).fit(
        method="IRLS", tol=1e-12, maxiter=500
    )
    gamma_fit = sm.GLM(gamma, X, family=sm.families.Binomial()).fit(
        method="IRLS", tol=1e-12, maxiter=500
    )
    if not (phi_fit.converged and gamma_fit.converged):
        logger.warning("⚠ IRLS no reportó convergencia en alguna regresión de no-recaudadores")

    models = ZeroFundraiserModels(
        state_means=means.tolist(),
        state_sds=sds.tolist(),
        columns=[names[i] for i in keep],
        phi_coefficients=np.asarray(phi_fit.params).tolist(),
        gamma_coefficients=np.asarray(gamma_fit.params).tolist(),
        dropped_columns=dropped,
        n_obs=int(S.shape[0]),
    )
    logger.info(f"✓ Regresiones de no-recaudadores: {S.shape[0]} obs, {len(keep)} términos")
    return models


@dataclass(frozen=True)
class ZeroFundraiserPrediction:
    phi: float
    gamma: float
    raw_phi: float
    rescaled: bool


def predict_and_rescale(
    models: ZeroFundraiserModels,
    record: ResearcherRecord,
    p: PreferenceParams,
    cal: Calibration,
) -> ZeroFundraiserPrediction:
    """
    φ̂, γ̂ para un investigador con F = 0, con φ̂ re-escalado bajo φ̄ si la
    predicción cruda implicaría F* > 0 en sus estados observados.
    """
    c = record.contract
    raw_phi, gamma = (float(v[0]) for v in models.predict([state_vector(c)]))
    alpha = infer_alpha(c, record.allocation, gamma, raw_phi, p, cal)

    def excess(log_phi: float) -> float:
        a = Attributes(alpha, gamma, math.exp(log_phi))
        return solve_policy(c, a, p, cal).H - fundraising_threshold(c, a, cal)

    if excess(math.log(raw_phi)) <= 0:
        return ZeroFundraiserPrediction(raw_phi, gamma, raw_phi, False)

    if excess(0.0) > 0:
        logger.warning(f"⚠ [{record.id}] φ̂ llega al piso 1 sin anular el fundraising")
        return ZeroFundraiserPrediction(1.0, gamma, raw_phi, True)

    log_bar = brentq(excess, 0.0, math.log(raw_phi), xtol=1e-12, maxiter=200)
    phi = max(1.0, RESCALE_FACTOR * math.exp(log_bar))
    return ZeroFundraiserPrediction(phi, gamma, raw_phi, True)


# ---------------------------------------------------------------------------
# Población completa
# ---------------------------------------------------------------------------

@dataclass
class IdentificationResult:
    attributes: Dict[str, Attributes] = field(default_factory=dict)
    hours_corner: Dict[str, bool] = field(default_factory=dict)
    rescaled: Dict[str, bool] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def n_failures(self) -> int:
        return len(self.failures)


def fundraiser_sample(
    records: Sequence[ResearcherRecord], cal: Calibration
) -> Tuple[List[List[float]], List[float], List[float]]:
    """Estados, φ̂ y γ̂ de los investigadores con F > 0 (no dependen de μ)"""
    states, phis, gammas = [], [], []
    for r in records:
        F = r.allocation.fundraising
        if F > 0:
            phi = infer_phi(r.expected_extra_funding, F)
            states.append(state_vector(r.contract))
            phis.append(phi)
            gammas.append(infer_gamma(r.contract, phi, F, r.allocation.research, cal))
    return states, phis, gammas


def fit_models_for(
    records: Sequence[ResearcherRecord], cal: Calibration, min_obs: int = MIN_FUNDRAISERS
) -> Optional[ZeroFundraiserModels]:
    """Ajusta las regresiones solo si hay investigadores con F = 0"""
    if all(r.allocation.fundraising > 0 for r in records):
        return None
    states, phis, gammas = fundraiser_sample(records, cal)
    return fit_zero_fundraiser_models(states, phis, gammas, min_obs=min_obs)


def identify_researcher(
    record: ResearcherRecord,
    p: PreferenceParams,
    cal: Calibration,
    models: Optional[ZeroFundraiserModels] = None,
) -> Tuple[Attributes, bool, bool]:
    """Retorna (θ̂, esquina de horas, φ̂ re-escalado)"""
    c = record.contract
    alloc = record.allocation
    if alloc.fundraising > 0:
        phi = infer_phi(record.expected_extra_funding, alloc.fundraising)
        gamma = infer_gamma(c, phi, alloc.fundraising, alloc.research, cal)
        rescaled = False
    else:
        if models is None:
            raise ValidacionError(f"[{record.id}] F = 0 requiere las regresiones de no-recaudadores")
        pred = predict_and_rescale(models, record, p, cal)
        phi, gamma, rescaled = pred.phi, pred.gamma, pred.rescaled
    detail = infer_alpha_detail(c, alloc, gamma, phi, p, cal)
    return Attributes(detail.alpha, gamma, phi), detail.hours_corner, rescaled


def identify_population(
    records: Sequence[ResearcherRecord],
    deep: DeepParams,
    cal: Calibration,
    models: Optional[ZeroFundraiserModels] = None,
) -> IdentificationResult:
    """θ̂ para cada investigador dado μ; las fallas se acumulan por id"""
    result = IdentificationResult()
    if not records:
        return result
    if models is None:
        models = fit_models_for(records, cal)

    for r in records:
        if r.type_index is None:
            raise ValidacionError(f"[{r.id}] índice de tipo T no asignado")
        try:
            p = preference_params_from_type(r.type_index, deep)
            attrs, corner, rescaled = identify_researcher(r, p, cal, models)
        except (ModeloError, ValueError, OverflowError, ZeroDivisionError) as e:
            result.failures[r.id] = str(e)
            continue
        result.attributes[r.id] = attrs
        result.hours_corner[r.id] = corner
        result.rescaled[r.id] = rescaled

    if result.failures:
        logger.warning(f"⚠ Identificación falló para {len(result.failures)} investigadores")
    logger.debug(
        f"ℹ Identificados {len(result.attributes)} investigadores, "
        f"{sum(result.rescaled.values())} re-escalados, {sum(result.hours_corner.values())} en H_max"
    )
    return result
