"""Solución del problema de asignación de tiempo de cada investigador"""

import logging
import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .errors import NumericalError, ValidacionError
from .model import (
    Attributes,
    Calibration,
    ContractState,
    PreferenceParams,
    cobb_douglas,
    income_utility,
    output_utility,
    effort_cost,
)

logger = logging.getLogger(__name__)

LEFT = "left"
RIGHT = "right"

HOURS_EPSILON = 1e-6
XTOL_HOURS = 1e-12
MAX_ITER = 200


@dataclass(frozen=True)
class PolicySolution:
    """Asignación óptima (H*, F*, R*, B*, Y*, V*) con esquinas y multiplicadores"""

    H: float
    F: float
    R: float
    B: float
    Y: float
    V: float
    fundraising_corner: bool
    hours_corner: bool
    lambda_F: float
    lambda_H: float
    residual: float
    # u2 − u3 en el óptimo (parte de V que no depende del salario)
    non_salary_value: float


def fundraising_threshold(
    c: ContractState, a: Attributes, cal: Calibration, pi: float = 1.0
) -> float:
    """H_{F>0} = D + (1−γ)(B_min+G)/(γ·π·φ)"""
    g = a.funding_intensity
    phi = pi * a.fundraising_ability
    return c.duties + (1.0 - g) * (cal.min_funding + c.guaranteed_funding) / (g * phi)


def interior_fundraising(
    H: float, c: ContractState, a: Attributes, cal: Calibration, pi: float = 1.0
) -> float:
    """F = γ(H−D) − (1−γ)(B_min+G)/φ, válido solo por encima del umbral"""
    threshold = fundraising_threshold(c, a, cal, pi)
    if not H > threshold:
        raise ValidacionError(
            f"H={H} no supera el umbral de fundraising {threshold}: usar la rama F=0"
        )
    g = a.funding_intensity
    phi = pi * a.fundraising_ability
    return g * (H - c.duties) - (1.0 - g) * (cal.min_funding + c.guaranteed_funding) / phi


def output_marginal_benefit(
    H: float,
    branch: str,
    c: ContractState,
    gamma: float,
    phi: float,
    eta: float,
    cal: Calibration,
) -> float:
    """Beneficio marginal de una hora dividido por α^(1−η), según la rama activa"""
    x = H - c.duties
    base_funds = cal.min_funding + c.guaranteed_funding
    if branch == LEFT:
        return (
            (1.0 - gamma)
            * base_funds ** (gamma * (1.0 - eta))
            * x ** ((1.0 - gamma) * (1.0 - eta) - 1.0)
        )
    if branch == RIGHT:
        k = (gamma * phi) ** gamma * (1.0 - gamma) ** (1.0 - gamma)
        return k ** (1.0 - eta) * (x + base_funds / phi) ** (-eta)
    raise ValidacionError(f"Rama desconocida: {branch}")


def effort_marginal_cost(H: float, c: ContractState, p: PreferenceParams) -> float:
    """ψ·(H−D+D^ξ)^ζ"""
    D = c.duties
    load = H - D + (D ** p.xi if D > 0 else 0.0)
    return p.psi * load ** p.zeta


def tfp_factor(alpha: float, eta: float) -> float:
    return alpha ** (1.0 - eta)


def _residual(
    H: float,
    branch: str,
    c: ContractState,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    pi: float,
) -> float:
    benefit = output_marginal_benefit(
        H, branch, c, a.funding_intensity, pi * a.fundraising_ability, p.eta, cal
    )
    return tfp_factor(a.tfp, p.eta) * benefit - effort_marginal_cost(H, c, p)


def hours_residual(
    H: float,
    branch: str,
    c: ContractState,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    pi: float = 1.0,
) -> float:
    """
    Residuo de la condición de primer orden para las horas totales.

    La rama izquierda (F=0) es válida para H ≤ H_{F>0} y la derecha (F>0)
    para H ≥ H_{F>0}; ambas coinciden en el umbral.
    """
    if not c.duties < H <= cal.max_hours:
        raise ValidacionError(f"H={H} fuera de (D={c.duties}, H_max={cal.max_hours}]")
    threshold = fundraising_threshold(c, a, cal, pi)
    tol = 1e-12 * max(1.0, threshold)
    if branch == LEFT and H > threshold + tol:
        raise ValidacionError(f"Rama izquierda con H={H} > umbral {threshold}")
    if branch == RIGHT and H < threshold - tol:
        raise ValidacionError(f"Rama derecha con H={H} < umbral {threshold}")
    return _residual(H, branch, c, a, p, cal, pi)


def _find_root(f, lo: float, hi: float, context: dict) -> float:
    try:
        root, info = brentq(
            f, lo, hi, xtol=XTOL_HOURS, rtol=4 * 2.220446049250313e-16,
            maxiter=MAX_ITER, full_output=True, disp=False,
        )
    except (ValueError, RuntimeError) as e:
        raise NumericalError(f"Falla en la búsqueda de H*: {e}", dict(context, lo=lo, hi=hi)) from e
    if not info.converged:
        raise NumericalError(
            f"H* no convergió en {info.iterations} iteraciones",
            dict(context, lo=lo, hi=hi, flag=info.flag),
        )
    return root


def solve_policy(
    c: ContractState,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    pi: float = 1.0,
) -> PolicySolution:
    """
    Resuelve (H*, F*, R*) para un investigador.

    Parameters:
    -----------
    c : estados del contrato (M, G, D)
    a : atributos (α, γ, φ)
    p : parámetros de preferencia
    cal : calibración (B_min, H_max)
    pi : factor de factibilidad que escala φ (1 fuera del planificador)
    """
    c.validate(cal)
    if not pi > 0:
        raise ValidacionError(f"π debe ser > 0: {pi}")

    D = c.duties
    H_max = cal.max_hours
    threshold = fundraising_threshold(c, a, cal, pi)

    def branch_of(H: float) -> str:
        return LEFT if H <= threshold else RIGHT

    def residual(H: float) -> float:
        return _residual(H, branch_of(H), c, a, p, cal, pi)

    context = {"M": c.salary, "G": c.guaranteed_funding, "D": D, **a.to_dict(), **p.to_dict()}

    r_max = residual(H_max)
    if r_max >= 0:
        H = H_max
        lambda_H = r_max
    else:
        lambda_H = 0.0
        eps = HOURS_EPSILON
        lo = D + eps
        while residual(lo) <= 0:
            eps *= 1e-3
            lo = D + eps
            if lo <= D:
                raise NumericalError("El residuo no es positivo cerca de H = D", context)
        if threshold < H_max and residual(threshold) < 0 and lo < threshold:
            H = _find_root(residual, lo, threshold, context)
        elif threshold < H_max:
            H = _find_root(residual, max(lo, threshold), H_max, context)
        else:
            H = _find_root(residual, lo, H_max, context)

    return _assemble(H, threshold, lambda_H, c, a, p, cal, pi)


def _assemble(
    H: float,
    threshold: float,
    lambda_H: float,
    c: ContractState,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    pi: float,
) -> PolicySolution:
    g = a.funding_intensity
    phi = pi * a.fundraising_ability
    D = c.duties
    base_funds = cal.min_funding + c.guaranteed_funding

    F = 0.0
    if H > threshold:
        F = g * (H - D) - (1.0 - g) * base_funds / phi
        if F <= 0:
            F = 0.0
    R = H - D - F
    if not R > 0:
        raise NumericalError(f"R* no positivo: {R}", {"H": H, "D": D, "F": F})
    B = base_funds + phi * F
    Y = cobb_douglas(a.tfp, g, B, R)

    u2 = output_utility(Y, p)
    u3 = effort_cost(R, F, D, p)
    V = income_utility(c.salary, p) + u2 - u3

    if F == 0.0:
        # ∂u2/∂F en F=0; el multiplicador cierra la condición de primer orden
        lambda_F = max(0.0, -(Y ** (1.0 - p.eta)) * (g * phi / B - (1.0 - g) / R))
    else:
        lambda_F = 0.0

    branch = LEFT if H <= threshold else RIGHT
    res = _residual(H, branch, c, a, p, cal, pi)

    return PolicySolution(
        H=H,
        F=F,
        R=R,
        B=B,
        Y=Y,
        V=V,
        fundraising_corner=F == 0.0,
        hours_corner=H == cal.max_hours,
        lambda_F=lambda_F,
        lambda_H=lambda_H,
        residual=res,
        non_salary_value=u2 - u3,
    )


def non_salary_value(
    c: ContractState,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    pi: float = 1.0,
) -> float:
    """Ψ = max(u2 − u3): valor indirecto sin el término salarial"""
    return solve_policy(c, a, p, cal, pi).non_salary_value


def objective_at(
    H: float,
    F: float,
    c: ContractState,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    pi: float = 1.0,
) -> float:
    """Utilidad en una asignación factible arbitraria (H, F); -inf si R ≤ 0"""
    R = H - c.duties - F
    if not (R > 0 and F >= 0 and c.duties < H <= cal.max_hours):
        return -math.inf
    B = cal.min_funding + c.guaranteed_funding + pi * a.fundraising_ability * F
    Y = cobb_douglas(a.tfp, a.funding_intensity, B, R)
    return income_utility(c.salary, p) + output_utility(Y, p) - effort_cost(R, F, c.duties, p)
