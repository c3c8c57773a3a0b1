"""Generación de poblaciones sintéticas consistentes con el modelo"""

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import ModeloError, NumericalError, UnboundedCompensationError, ValidacionError
from .model import (
    FIELDS,
    Attributes,
    Calibration,
    ContractState,
    PreferenceParams,
    ResearcherRecord,
    TimeAllocation,
    income_utility,
    inverse_income_utility,
)
from .planner import PlannerResearcher
from .policy import PolicySolution, solve_policy
from .type_index import DeepParams, TypeModel, fit_type_index, preference_params_from_type
from .wtp import FUNDING_STEP_1, SALARY_FLOOR, indifference_salary, standard_offers

logger = logging.getLogger(__name__)

MAX_RETRIES = 100

# Cuantil normal 0.9: un log-sd s da razón 90-10 = exp(2·1.2816·s)
Z90 = 1.2815515655446004

TARGET_MEAN_RESEARCH = 18.5
TARGET_MEAN_BUDGET = 147_100.0
TARGET_MEDIAN_WTP_PER_DOLLAR = 0.10
TARGET_TFP_RATIO = 30.0
CALIBRATION_SEED = 7

DEFAULT_GAMMA_MEANS = {
    "Engineering & Math": 0.45,
    "Humanities": 0.15,
    "Medicine": 0.40,
    "Natural Sciences": 0.45,
    "Social Sciences": 0.25,
}


@dataclass(frozen=True)
class PopulationConfig:
    """
    Distribuciones de estados, atributos y features de una población sintética.

    Los valores por defecto forman una población suave (η = 0.5, ζ = 1) con
    poca dispersión de α; `calibrated_defaults()` produce la calibrada a los
    momentos publicados.
    """

    n: int = 500
    seed: int = 0
    field_shares: Dict[str, float] = field(default_factory=lambda: {f: 1.0 / len(FIELDS) for f in FIELDS})
    salary_median: float = 110_000.0
    salary_log_sd: float = 0.3
    g_scale: float = 80_000.0
    g_log_sd: float = 0.8
    duties_mean: float = 15.0
    duties_sd: float = 8.0
    duties_max: float = 45.0
    alpha_log_mean: float = math.log(0.0025)
    alpha_log_sd: float = 0.5
    gamma_means: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_GAMMA_MEANS))
    gamma_concentration: float = 30.0
    phi_median: float = 20_000.0
    phi_log_sd: float = 0.5
    low_phi_share: float = 0.3
    low_phi_median: float = 500.0
    n_features: int = 4
    type_share: float = 0.5
    feature_shift: float = 3.0
    answer_noise_sd: float = 0.0
    deep: DeepParams = field(
        default_factory=lambda: DeepParams.homogeneous(
            omega=1100.0, psi=7e-4, sigma=1.5, eta=0.5, xi=1.2, zeta=1.0
        )
    )
    cal: Calibration = field(default_factory=Calibration)

    def __post_init__(self):
        if self.n < 1:
            raise ValidacionError(f"N debe ser ≥ 1: {self.n}")
        unknown = set(self.field_shares) - set(self.gamma_means)
        if unknown:
            raise ValidacionError(f"Campos sin media de γ: {sorted(unknown)}")
        if any(s < 0 for s in self.field_shares.values()) or sum(self.field_shares.values()) <= 0:
            raise ValidacionError("Participaciones por campo inválidas")
        if not all(0 < m < 1 for m in self.gamma_means.values()):
            raise ValidacionError("Las medias de γ deben estar en (0,1)")
        if not 0 <= self.low_phi_share <= 1:
            raise ValidacionError(f"Participación de φ bajo fuera de [0,1]: {self.low_phi_share}")
        if not 0 <= self.duties_max < self.cal.max_hours:
            raise ValidacionError(f"D máximo debe ser < H_max: {self.duties_max}")
        if self.n_features < 1:
            raise ValidacionError("Se requiere al menos una feature")
        if self.answer_noise_sd < 0:
            raise ValidacionError("El ruido de respuestas debe ser ≥ 0")


@dataclass(frozen=True)
class _Shocks:
    """Shocks estándar de un investigador; la escala la aplica la configuración"""

    field_u: float
    salary: float
    funding: float
    duties: float
    alpha: float
    phi_u: float
    phi: float


def _draw_shocks(rng: np.random.Generator) -> _Shocks:
    return _Shocks(
        field_u=float(rng.random()),
        salary=float(rng.standard_normal()),
        funding=float(rng.standard_normal()),
        duties=float(rng.standard_normal()),
        alpha=float(rng.standard_normal()),
        phi_u=float(rng.random()),
        phi=float(rng.standard_normal()),
    )


def _field_for(u: float, cfg: PopulationConfig) -> str:
    labels = [f for f in FIELDS if f in cfg.field_shares] + sorted(set(cfg.field_shares) - set(FIELDS))
    weights = np.array([cfg.field_shares[f] for f in labels], dtype=float)
    cum = np.cumsum(weights / weights.sum())
    return labels[min(int(np.searchsorted(cum, u, side="right")), len(labels) - 1)]


def _realize(s: _Shocks, rng_gamma: np.random.Generator, cfg: PopulationConfig) -> Tuple[str, ContractState, Attributes]:
    field_label = _field_for(s.field_u, cfg)
    M = cfg.salary_median * math.exp(cfg.salary_log_sd * s.salary)
    G = cfg.g_scale * math.exp(cfg.g_log_sd * s.funding)
    D = min(max(cfg.duties_mean + cfg.duties_sd * s.duties, 0.0), cfg.duties_max)
    alpha = math.exp(cfg.alpha_log_mean + cfg.alpha_log_sd * s.alpha)
    mean = cfg.gamma_means[field_label]
    gamma = float(rng_gamma.beta(mean * cfg.gamma_concentration, (1.0 - mean) * cfg.gamma_concentration))
    gamma = min(max(gamma, 1e-6), 1.0 - 1e-6)
    low = s.phi_u < cfg.low_phi_share
    median = cfg.low_phi_median if low else cfg.phi_median
    phi = max(1.0, median * math.exp(cfg.phi_log_sd * s.phi))
    return field_label, ContractState(M, G, D), Attributes(alpha, gamma, phi)


def _rng(seed: int, i: int, stream: int) -> np.random.Generator:
    # flujo por id: el resultado no depende del orden de generación
    return np.random.default_rng([seed, i, stream])


@dataclass
class SyntheticPopulation:
    config: PopulationConfig
    records: List[ResearcherRecord]
    attributes: List[Attributes]
    prefs: List[PreferenceParams]
    solutions: List[PolicySolution]
    type_model: Optional[TypeModel]

    def planner_researchers(self) -> List[PlannerResearcher]:
        return [
            PlannerResearcher(
                id=r.id,
                field_label=r.field_label,
                contract=r.contract,
                attributes=a,
                prefs=p,
                expected_extra_funding=r.expected_extra_funding,
            )
            for r, a, p in zip(self.records, self.attributes, self.prefs)
        ]

    def truth_dict(self) -> dict:
        """μ0 y θ por investigador para correr contrafactuales con la verdad"""
        return {
            "deep": self.config.deep.to_dict(),
            "type_model": self.type_model.to_dict() if self.type_model is not None else None,
            "researchers": [
                {"id": r.id, "T": r.type_index, **a.to_dict()}
                for r, a in zip(self.records, self.attributes)
            ],
        }


def _draw_features(i: int, cfg: PopulationConfig) -> np.ndarray:
    rng = _rng(cfg.seed, i, 0)
    member = rng.random() < cfg.type_share
    return cfg.feature_shift * float(member) + rng.standard_normal(cfg.n_features)


def _wtp_answers(
    record: ResearcherRecord,
    a: Attributes,
    p: PreferenceParams,
    cfg: PopulationConfig,
    baseline: float,
    rng: np.random.Generator,
) -> Tuple[Optional[float], ...]:
    by_label = {o.label: o for o in standard_offers(record.contract)}
    answers: List[Optional[float]] = []
    for j in range(1, 5):
        offer = by_label.get(str(j))
        noise = float(rng.standard_normal()) * cfg.answer_noise_sd
        if offer is None:
            answers.append(None)
            continue
        try:
            M_tilde = indifference_salary(record, a, p, cfg.cal, offer, baseline_value=baseline)
        except UnboundedCompensationError as e:
            logger.warning(f"⚠ {e}: respuesta {j} queda vacía")
            answers.append(None)
            continue
        answers.append(max(M_tilde + noise, SALARY_FLOOR))
    return tuple(answers)


def generate_population(cfg: PopulationConfig) -> SyntheticPopulation:
    """
    Sortea estados y atributos, resuelve la política y calcula las respuestas WTP.

    La asignación observada es la solución del modelo y EG = φ·F*; el ruido
    entra solo en las respuestas. Los sorteos que violan invariantes o no
    tienen solución se repiten hasta MAX_RETRIES veces por investigador.
    """
    ids = [f"r{i:05d}" for i in range(cfg.n)]
    features = np.vstack([_draw_features(i, cfg) for i in range(cfg.n)])
    if cfg.n >= 2:
        type_model, T = fit_type_index(features, seed=cfg.seed)
    else:
        type_model, T = None, np.zeros(cfg.n)

    records, attributes, prefs, solutions = [], [], [], []
    for i, rid in enumerate(ids):
        p = preference_params_from_type(float(T[i]), cfg.deep)
        rng = _rng(cfg.seed, i, 1)
        last_error = None
        for attempt in range(MAX_RETRIES):
            try:
                field_label, c, a = _realize(_draw_shocks(rng), rng, cfg)
                c.validate(cfg.cal)
                sol = solve_policy(c, a, p, cfg.cal)
                record = ResearcherRecord(
                    id=rid,
                    field_label=field_label,
                    contract=c,
                    allocation=TimeAllocation(sol.R, sol.F, sol.H),
                    expected_extra_funding=a.fundraising_ability * sol.F,
                    wtp_answers=(None, None, None, None),
                    features=tuple(float(x) for x in features[i]),
                    type_index=float(T[i]),
                )
                record.validate(cfg.cal)
                break
            except (ModeloError, ValueError, OverflowError, ZeroDivisionError) as e:
                last_error = e
                logger.debug(f"ℹ [{rid}] sorteo {attempt + 1} descartado: {e}")
        else:
            raise NumericalError(
                f"[{rid}] sin sorteo válido tras {MAX_RETRIES} intentos: {last_error}",
                {"id": rid},
            )

        answers = _wtp_answers(record, a, p, cfg, sol.non_salary_value, _rng(cfg.seed, i, 2))
        records.append(replace(record, wtp_answers=answers))
        attributes.append(a)
        prefs.append(p)
        solutions.append(sol)

    n_zero = sum(1 for r in records if r.allocation.fundraising == 0)
    logger.info(f"✓ Población sintética: {cfg.n} investigadores, {n_zero} sin fundraising (semilla {cfg.seed})")
    return SyntheticPopulation(cfg, records, attributes, prefs, solutions, type_model)


# ---------------------------------------------------------------------------
# Calibración
# ---------------------------------------------------------------------------

def _solve_sample(cfg: PopulationConfig, shocks, gamma_rngs, p: PreferenceParams):
    out = []
    for s, seed_seq in zip(shocks, gamma_rngs):
        try:
            _, c, a = _realize(s, np.random.default_rng(seed_seq), cfg)
            c.validate(cfg.cal)
            out.append((c, a, solve_policy(c, a, p, cfg.cal)))
        except (ModeloError, ValueError, OverflowError):
            continue
    if not out:
        raise NumericalError("Ninguna observación de calibración tiene solución", {})
    return out


def _bracket(f, x0: float, step: float = 1.0, max_steps: int = 80) -> Tuple[float, float]:
    """Intervalo [lo, hi] con cambio de signo de una función creciente"""
    lo = hi = x0
    if f(x0) < 0:
        for _ in range(max_steps):
            hi += step
            if f(hi) >= 0:
                return hi - step, hi
        raise NumericalError("No se encontró intervalo de calibración (cota superior)", {"x0": x0})
    for _ in range(max_steps):
        lo -= step
        if f(lo) < 0:
            return lo, lo + step
    raise NumericalError("No se encontró intervalo de calibración (cota inferior)", {"x0": x0})


@lru_cache(maxsize=8)
def _calibrate(n: int, seed: int, rounds: int) -> Tuple[float, float, float]:
    """Retorna (media de log α, escala de G, escala de utilidad c)"""
    base = PopulationConfig(
        n=n,
        seed=seed,
        deep=DeepParams.draft_homogeneous(),
        alpha_log_sd=math.log(TARGET_TFP_RATIO) / (2.0 * Z90),
        g_scale=60_000.0,
        g_log_sd=1.0,
    )
    p = preference_params_from_type(0.0, base.deep)
    rng = _rng(seed, 0, 9)
    shocks = [_draw_shocks(rng) for _ in range(n)]
    gamma_rngs = [[seed, i, 8] for i in range(n)]

    alpha_mean, g_scale = 0.0, base.g_scale
    for k in range(rounds):
        def research_gap(m: float) -> float:
            cfg = replace(base, alpha_log_mean=m, g_scale=g_scale)
            sample = _solve_sample(cfg, shocks, gamma_rngs, p)
            return float(np.mean([sol.R for _, _, sol in sample])) - TARGET_MEAN_RESEARCH

        lo, hi = _bracket(research_gap, alpha_mean, step=2.0)
        alpha_mean = brentq(research_gap, lo, hi, xtol=1e-6, maxiter=200)

        cfg = replace(base, alpha_log_mean=alpha_mean, g_scale=g_scale)
        sample = _solve_sample(cfg, shocks, gamma_rngs, p)
        mean_G = float(np.mean([c.guaranteed_funding for c, _, _ in sample]))
        mean_raised = float(np.mean([a.fundraising_ability * sol.F for _, a, sol in sample]))
        room = TARGET_MEAN_BUDGET - base.cal.min_funding - mean_raised
        g_scale = g_scale * (room / mean_G if room > 0 else 0.5)
        logger.debug(f"ℹ Calibración ronda {k + 1}: log α medio {alpha_mean:.4f}, escala G {g_scale:.1f}")

    cfg = replace(base, alpha_log_mean=alpha_mean, g_scale=g_scale)
    sample = _solve_sample(cfg, shocks, gamma_rngs, p)

    # Ψ escala por c con ψ → cψ y α → c^(1/(1−η))α; la asignación no cambia
    gaps = []
    for c, a, sol in sample:
        offered = c.with_levers(G=c.guaranteed_funding + FUNDING_STEP_1)
        gaps.append((c.salary, solve_policy(offered, a, p, base.cal).non_salary_value - sol.non_salary_value))

    def median_wtp_gap(log_scale: float) -> float:
        scale = math.exp(log_scale)
        values = []
        for M, delta in gaps:
            M_tilde = inverse_income_utility(income_utility(M, p) - scale * delta, p)
            # sin M̃ > 0 la WTP alcanza su cota M
            values.append((M if M_tilde is None else M - M_tilde) / FUNDING_STEP_1)
        return float(np.median(values)) - TARGET_MEDIAN_WTP_PER_DOLLAR

    lo, hi = _bracket(median_wtp_gap, 0.0, step=2.0, max_steps=200)
    log_scale = brentq(median_wtp_gap, lo, hi, xtol=1e-10, maxiter=300)
    return alpha_mean, g_scale, math.exp(log_scale)


def calibrated_defaults(n: int = 500, seed: int = 0, calibration_n: int = 400, rounds: int = 4) -> PopulationConfig:
    """
    Configuración calibrada: parámetros de preferencia del borrador homogéneo,
    razón 90-10 de α ≈ 30, media de R ≈ 18.5 h/semana, media de B ≈ $147.1K y
    mediana de WTP por dólar ≈ 0.10.

    ψ (y α con él) se re-escala para fijar la WTP sin cambiar las asignaciones.
    """
    alpha_mean, g_scale, scale = _calibrate(calibration_n, CALIBRATION_SEED, rounds)
    draft = DeepParams.draft_homogeneous()
    eta = preference_params_from_type(0.0, draft).eta
    deep = replace(draft, psi=draft.psi * scale)
    cfg = PopulationConfig(
        n=n,
        seed=seed,
        deep=deep,
        alpha_log_mean=alpha_mean + math.log(scale) / (1.0 - eta),
        alpha_log_sd=math.log(TARGET_TFP_RATIO) / (2.0 * Z90),
        g_scale=g_scale,
        g_log_sd=1.0,
    )
    logger.info(
        f"✓ Calibración: log α medio {cfg.alpha_log_mean:.4f}, escala G {g_scale:,.0f}, ψ = {deep.psi:.4g}"
    )
    return cfg
