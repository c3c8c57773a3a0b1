"""Planificador por campo: reasignación de fondos garantizados y deberes"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleError, ValidacionError
from .model import (
    Attributes,
    Calibration,
    ContractState,
    PreferenceParams,
    effort_cost,
    output_utility,
)
from .policy import PolicySolution, solve_policy

logger = logging.getLogger(__name__)

OBJECTIVES = ("output", "utility")
LEVERS = ("G", "D")
DUTY_MARGIN = 1.0
H_DUTIES = 1e-4


@dataclass(frozen=True)
class PlannerResearcher:
    id: str
    field_label: str
    contract: ContractState
    attributes: Attributes
    prefs: PreferenceParams
    expected_extra_funding: float


@dataclass
class PlannerProblem:
    """Población de un campo, objetivo, palancas activas y κ"""

    researchers: List[PlannerResearcher]
    objective: str = "output"
    levers: Tuple[str, ...] = ("G", "D")
    kappa: float = 1.0
    unconstrained_budget: bool = False
    cal: Calibration = field(default_factory=Calibration)
    field_label: str = ""
    tol: float = 1e-6
    max_outer: int = 30

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValidacionError(f"Objetivo desconocido: {self.objective}")
        self.levers = tuple(lv for lv in LEVERS if lv in self.levers)
        if not self.levers:
            raise ValidacionError("Se requiere al menos una palanca (G o D)")
        if self.unconstrained_budget and self.levers != ("D",):
            raise ValidacionError("El presupuesto no restringido solo admite la palanca D")
        if not self.kappa >= 1:
            raise ValidacionError(f"κ debe ser ≥ 1: {self.kappa}")

    @property
    def g_total(self) -> float:
        return math.fsum(r.contract.guaranteed_funding for r in self.researchers)

    @property
    def d_total(self) -> float:
        return math.fsum(r.contract.duties for r in self.researchers)


@dataclass
class MarginalValues:
    dV_dG: float
    dV_dD: float
    dY_dG: float
    dY_dD: float
    one_sided_G: bool = False
    one_sided_D: bool = False


@dataclass
class FeasibilityResult:
    pi: float
    iterations: int
    converged: bool
    method: str


@dataclass
class CounterfactualAllocation:
    ids: List[str]
    G_tilde: np.ndarray
    D_tilde: np.ndarray
    pi: float
    solutions: List[PolicySolution]
    multipliers: Dict[str, float]
    kkt_residuals: Dict[str, float]
    multiplier_dispersion: Dict[str, float]
    objective_value: float
    actual_objective: float
    actual_pi: float
    converged: bool
    improved: bool = True
    iterations: int = 0


# ---------------------------------------------------------------------------
# Evaluación por investigador
# ---------------------------------------------------------------------------

def _solve(r: PlannerResearcher, G: float, D: float, pi: float, cal: Calibration) -> PolicySolution:
    return solve_policy(r.contract.with_levers(G=G, D=D), r.attributes, r.prefs, cal, pi)


def researcher_objective(
    sol: PolicySolution, D: float, p: PreferenceParams, objective: str, kappa: float
) -> float:
    """Y para max-output; κ·u2 − u3 para max-utility (el salario es fijo)"""
    if objective == "output":
        return sol.Y
    return kappa * output_utility(sol.Y, p) - effort_cost(sol.R, sol.F, D, p)


def _step(lever: str, G: float, cal: Calibration) -> float:
    if lever == "G":
        return max(1.0, 1e-4 * (cal.min_funding + G))
    return H_DUTIES


def _derivative(
    r: PlannerResearcher,
    lever: str,
    G: float,
    D: float,
    pi: float,
    cal: Calibration,
    values: Callable[[PolicySolution, float], Tuple[float, ...]],
) -> Tuple[Tuple[float, ...], bool]:
    """Diferencias centrales del vector `values`; unilaterales ante cota o quiebre"""
    h = _step(lever, G, cal)
    v = G if lever == "G" else D

    def at(x: float) -> Tuple[PolicySolution, float]:
        g, d = (x, D) if lever == "G" else (G, x)
        return _solve(r, g, d, pi, cal), d

    center, dc = at(v)
    upper, du = at(v + h)
    f_c = values(center, dc)
    f_u = values(upper, du)

    if v - h < 0:
        return tuple((b - a) / h for a, b in zip(f_c, f_u)), True

    lower, dl = at(v - h)
    f_l = values(lower, dl)
    corners = (lower.fundraising_corner, center.fundraising_corner, upper.fundraising_corner)
    if len(set(corners)) > 1:
        if lower.fundraising_corner == center.fundraising_corner:
            return tuple((b - a) / h for a, b in zip(f_l, f_c)), True
        return tuple((b - a) / h for a, b in zip(f_c, f_u)), True
    return tuple((b - a) / (2.0 * h) for a, b in zip(f_l, f_u)), False


def marginal_values(
    r: PlannerResearcher,
    G: float,
    D: float,
    pi: float,
    kappa: float,
    cal: Calibration,
) -> MarginalValues:
    """Derivadas totales (con respuesta conductual) del valor y del producto"""

    def values(sol: PolicySolution, d: float) -> Tuple[float, float]:
        return researcher_objective(sol, d, r.prefs, "utility", kappa), sol.Y

    (dV_dG, dY_dG), one_G = _derivative(r, "G", G, D, pi, cal, values)
    (dV_dD, dY_dD), one_D = _derivative(r, "D", G, D, pi, cal, values)
    return MarginalValues(dV_dG, dV_dD, dY_dG, dY_dD, one_G, one_D)


def _lever_marginal(
    problem: PlannerProblem, r: PlannerResearcher, lever: str, G: float, D: float, pi: float
) -> float:
    def values(sol: PolicySolution, d: float) -> Tuple[float]:
        return (researcher_objective(sol, d, r.prefs, problem.objective, problem.kappa),)

    (value,), _ = _derivative(r, lever, G, D, pi, problem.cal, values)
    return value


def aggregate_objective(
    problem: PlannerProblem, G: np.ndarray, D: np.ndarray, pi: float
) -> Tuple[float, List[PolicySolution]]:
    sols = [_solve(r, g, d, pi, problem.cal) for r, g, d in zip(problem.researchers, G, D)]
    total = math.fsum(
        researcher_objective(s, d, r.prefs, problem.objective, problem.kappa)
        for s, d, r in zip(sols, D, problem.researchers)
    )
    return total, sols


# ---------------------------------------------------------------------------
# Factor de factibilidad
# ---------------------------------------------------------------------------

def feasibility_fixed_point(
    researchers: Sequence[PlannerResearcher],
    G: Sequence[float],
    D: Sequence[float],
    cal: Calibration,
    pi0: float = 1.0,
    damping: float = 0.5,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> FeasibilityResult:
    """
    π tal que Σ EG = π·Σ φ̂·F(π), con los investigadores re-optimizando.

    Iteración amortiguada π ← π + a·(π·ratio − π); si no converge se resuelve
    la misma ecuación por búsqueda acotada.
    """
    target = math.fsum(r.expected_extra_funding for r in researchers)
    if target < 0:
        raise ValidacionError(f"Σ EG debe ser ≥ 0: {target}")

    def raised(pi: float) -> float:
        return math.fsum(
            r.attributes.fundraising_ability * _solve(r, g, d, pi, cal).F
            for r, g, d in zip(researchers, G, D)
        )

    if target == 0:
        if raised(1.0) == 0:
            return FeasibilityResult(1.0, 0, True, "vacuous")
        # mayor π con fundraising nulo
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if raised(mid) == 0:
                lo = mid
            else:
                hi = mid
        return FeasibilityResult(max(lo, 1e-300), 200, True, "boundary")

    pi = pi0
    for k in range(1, max_iter + 1):
        s = raised(pi)
        if s == 0:
            pi *= 2.0
            if pi > 1e12:
                raise InfeasibleError(
                    "Σ φ̂F(π) = 0 con Σ EG > 0: restricción de fondos infactible",
                    {"target": target},
                )
            continue
        ratio = target / (pi * s)
        if abs(ratio - 1.0) <= tol:
            return FeasibilityResult(pi, k, True, "damped")
        pi = pi + damping * (pi * ratio - pi)

    logger.warning("⚠ Iteración amortiguada de π sin converger: búsqueda acotada")

    def gap(log_pi: float) -> float:
        p = math.exp(log_pi)
        return p * raised(p) - target

    lo, hi = math.log(pi), math.log(pi)
    for _ in range(80):
        if gap(lo) < 0:
            break
        lo -= 1.0
    for _ in range(80):
        if gap(hi) > 0:
            break
        hi += 1.0
    if not (gap(lo) < 0 < gap(hi)):
        raise InfeasibleError("No se encontró un intervalo para π", {"target": target})
    log_pi = brentq(gap, lo, hi, xtol=1e-12, rtol=1e-12, maxiter=500)
    return FeasibilityResult(math.exp(log_pi), max_iter, True, "bracketed")


# ---------------------------------------------------------------------------
# Igualación de valores marginales
# ---------------------------------------------------------------------------

def _equalize(
    problem: PlannerProblem, lever: str, G: np.ndarray, D: np.ndarray, pi: float
) -> Tuple[np.ndarray, float]:
    """Respuesta por investigador a un multiplicador λ y búsqueda de λ que conserva el total"""
    researchers = problem.researchers
    cal = problem.cal
    total = problem.g_total if lever == "G" else problem.d_total
    upper = total if lever == "G" else cal.max_hours - DUTY_MARGIN
    n = len(researchers)
    if total == 0:
        return np.zeros(n), float("nan")

    def mv(i: int, v: float) -> float:
        g, d = (v, D[i]) if lever == "G" else (G[i], v)
        return _lever_marginal(problem, researchers[i], lever, g, d, pi)

    at_zero = [mv(i, 0.0) for i in range(n)]
    at_upper = [mv(i, upper) for i in range(n)]
    xtol = 1e-11 * max(1.0, upper)

    def response(i: int, lam: float) -> float:
        if at_zero[i] <= lam:
            return 0.0
        if at_upper[i] >= lam:
            return upper
        return brentq(lambda v: mv(i, v) - lam, 0.0, upper, xtol=xtol, maxiter=200)

    def excess(lam: float) -> float:
        return math.fsum(response(i, lam) for i in range(n)) - total

    lam_hi = max(at_zero)
    lam_lo = min(at_upper)
    if lam_lo >= lam_hi:
        # sin cruce de valores marginales: se mantiene la asignación vigente dentro de las cotas
        logger.warning(
            f"⚠ [{problem.field_label}] valores marginales de {lever} sin cruce "
            f"(λ en 0: {lam_hi:.6g}, λ en la cota: {lam_lo:.6g}); se conserva la asignación vigente"
        )
        current = np.asarray(G if lever == "G" else D, dtype=float)
        return _conserve(current, total, upper), lam_hi
    lam = brentq(excess, lam_lo, lam_hi, xtol=max(1e-14 * max(abs(lam_lo), abs(lam_hi)), 1e-300), rtol=1e-13, maxiter=300)
    values = np.array([response(i, lam) for i in range(n)])
    return _conserve(values, total, upper), lam


def _conserve(values, total: float, upper) -> np.ndarray:
    """
    Corrección final para que Σ v = total dentro de [0, upper].

    La brecha se reparte en proporción a los valores entre quienes no están
    en la cota; quien la alcanza queda fijo y se repite hasta cerrarla.
    """
    values = np.asarray(values, dtype=float)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), values.shape)
    capacity = float(upper.sum())
    if total < 0 or total > capacity * (1.0 + 1e-12):
        raise InfeasibleError(
            f"Total {total:.6g} fuera de [0, {capacity:.6g}]",
            {"total": total, "capacity": capacity},
        )
    out = np.clip(values, 0.0, upper)
    tol = 1e-13 * max(1.0, abs(total))
    for _ in range(2 * values.size + 2):
        gap = total - math.fsum(out)
        if abs(gap) <= tol:
            break
        free = out < upper if gap > 0 else out > 0
        weights = np.where(free, out, 0.0)
        if weights.sum() == 0:
            weights = free.astype(float)
        out = np.clip(out + gap * weights / weights.sum(), 0.0, upper)
    return out


def _kkt(
    problem: PlannerProblem, lever: str, G: np.ndarray, D: np.ndarray, pi: float, lam: float
) -> Tuple[float, float]:
    """(residuo KKT máximo relativo a |λ|, dispersión relativa entre interiores)"""
    if math.isnan(lam):
        return 0.0, 0.0
    upper = problem.g_total if lever == "G" else problem.cal.max_hours - DUTY_MARGIN
    values = G if lever == "G" else D
    worst = 0.0
    interior = []
    for r, g, d, v in zip(problem.researchers, G, D, values):
        m = _lever_marginal(problem, r, lever, g, d, pi)
        if 0 < v < upper:
            interior.append(m)
            worst = max(worst, abs(m - lam))
        elif v <= 0:
            worst = max(worst, max(0.0, m - lam))
        else:
            worst = max(worst, max(0.0, lam - m))
    scale = abs(lam) if lam != 0 else 1.0
    dispersion = float(np.std(interior) / abs(np.mean(interior))) if len(interior) > 1 else 0.0
    return worst / scale, dispersion


def optimize_allocation(problem: PlannerProblem) -> CounterfactualAllocation:
    """
    Resuelve el sistema KKT del planificador alternando palancas y factor π.

    Si el resultado no mejora el objetivo en la asignación actual se retorna
    la asignación actual marcada como no mejorada.
    """
    researchers = problem.researchers
    cal = problem.cal
    ids = [r.id for r in researchers]
    G0 = np.array([r.contract.guaranteed_funding for r in researchers], dtype=float)
    D0 = np.array([r.contract.duties for r in researchers], dtype=float)

    def fixed_point(G, D, pi0):
        if problem.unconstrained_budget:
            return 1.0
        return feasibility_fixed_point(researchers, G, D, cal, pi0=pi0).pi

    actual_pi = fixed_point(G0, D0, 1.0)
    actual_obj, actual_sols = aggregate_objective(problem, G0, D0, actual_pi)

    G, D, pi = G0.copy(), D0.copy(), actual_pi
    multipliers = {lv: float("nan") for lv in problem.levers}
    converged = len(researchers) <= 1
    iterations = 0

    if len(researchers) > 1:
        for iterations in range(1, problem.max_outer + 1):
            G_prev, D_prev, pi_prev = G.copy(), D.copy(), pi
            if "G" in problem.levers:
                G, multipliers["G"] = _equalize(problem, "G", G, D, pi)
            if "D" in problem.levers:
                D, multipliers["D"] = _equalize(problem, "D", G, D, pi)
            pi = fixed_point(G, D, pi)

            g_scale = max(1.0, problem.g_total / len(researchers))
            d_scale = max(1.0, problem.d_total / len(researchers))
            change = max(
                float(np.max(np.abs(G - G_prev))) / g_scale,
                float(np.max(np.abs(D - D_prev))) / d_scale,
                abs(pi - pi_prev) / pi_prev,
            )
            logger.debug(f"ℹ [{problem.field_label}] iteración {iterations}: cambio {change:.3e}, π={pi:.6g}")
            if change < problem.tol:
                converged = True
                break
        if not converged:
            logger.warning(f"⚠ [{problem.field_label}] planificador sin converger tras {iterations} iteraciones")

    objective_value, sols = aggregate_objective(problem, G, D, pi)
    improved = objective_value >= actual_obj - 1e-12 * abs(actual_obj)
    if not improved:
        logger.warning(
            f"⚠ [{problem.field_label}] el óptimo numérico no mejora la asignación actual; se conserva la actual"
        )
        G, D, pi, sols, objective_value = G0.copy(), D0.copy(), actual_pi, actual_sols, actual_obj

    kkt, dispersion = {}, {}
    for lv in problem.levers:
        kkt[lv], dispersion[lv] = _kkt(problem, lv, G, D, pi, multipliers[lv])

    logger.info(
        f"✓ [{problem.field_label}] {len(researchers)} investigadores, objetivo {problem.objective}: "
        f"{actual_obj:.6g} → {objective_value:.6g} (π={pi:.6g})"
    )
    return CounterfactualAllocation(
        ids=ids,
        G_tilde=G,
        D_tilde=D,
        pi=pi,
        solutions=sols,
        multipliers=multipliers,
        kkt_residuals=kkt,
        multiplier_dispersion=dispersion,
        objective_value=objective_value,
        actual_objective=actual_obj,
        actual_pi=actual_pi,
        converged=converged,
        improved=improved,
        iterations=iterations,
    )


def frozen_allocation(problem: PlannerProblem) -> CounterfactualAllocation:
    """Copia la asignación actual sin optimizar (verificación de identidad)"""
    researchers = problem.researchers
    G0 = np.array([r.contract.guaranteed_funding for r in researchers], dtype=float)
    D0 = np.array([r.contract.duties for r in researchers], dtype=float)
    pi = 1.0 if problem.unconstrained_budget else feasibility_fixed_point(researchers, G0, D0, problem.cal).pi
    obj, sols = aggregate_objective(problem, G0, D0, pi)
    return CounterfactualAllocation(
        ids=[r.id for r in researchers],
        G_tilde=G0,
        D_tilde=D0,
        pi=pi,
        solutions=sols,
        multipliers={lv: float("nan") for lv in problem.levers},
        kkt_residuals={lv: 0.0 for lv in problem.levers},
        multiplier_dispersion={lv: 0.0 for lv in problem.levers},
        objective_value=obj,
        actual_objective=obj,
        actual_pi=pi,
        converged=True,
    )


def reallocation_magnitude(actual: Sequence[float], counterfactual: Sequence[float]) -> Optional[float]:
    """Σ max(0, x_opt − x_act) / Σ x_act; None si el total es cero"""
    a = np.asarray(actual, dtype=float)
    b = np.asarray(counterfactual, dtype=float)
    if a.shape != b.shape:
        raise ValidacionError("Las poblaciones no coinciden")
    total = a.sum()
    if total == 0:
        return None
    return float(np.maximum(0.0, b - a).sum() / total)


def build_field_problems(
    researchers: Sequence[PlannerResearcher],
    across_fields: bool = False,
    **kwargs,
) -> List[PlannerProblem]:
    """Un problema por campo, o uno solo con todos los campos agrupados"""
    if across_fields:
        return [PlannerProblem(researchers=list(researchers), field_label="all", **kwargs)]
    by_field: Dict[str, List[PlannerResearcher]] = {}
    for r in researchers:
        by_field.setdefault(r.field_label, []).append(r)
    return [
        PlannerProblem(researchers=members, field_label=label, **kwargs)
        for label, members in sorted(by_field.items())
    ]
