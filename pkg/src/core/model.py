"""Tipos del dominio y evaluación pura de presupuesto, producción y utilidad"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .errors import ValidacionError

FIELDS = (
    "Engineering & Math",
    "Humanities",
    "Medicine",
    "Natural Sciences",
    "Social Sciences",
)

# Semanas por año para convertir horas/mes a horas/semana
MONTHS_PER_YEAR = 12.0
WEEKS_PER_YEAR = 52.0


@dataclass(frozen=True)
class Calibration:
    """Constantes de calibración: fondos mínimos, horas máximas y externalidad"""

    min_funding: float = 5000.0
    max_hours: float = 62.0
    kappa: float = 10.0

    def __post_init__(self):
        if not self.min_funding > 0:
            raise ValidacionError(f"B_min debe ser > 0: {self.min_funding}")
        if not self.max_hours > 0:
            raise ValidacionError(f"H_max debe ser > 0: {self.max_hours}")
        if not self.kappa >= 1:
            raise ValidacionError(f"κ debe ser ≥ 1: {self.kappa}")


@dataclass(frozen=True)
class ContractState:
    """Contrato del investigador: salario M, fondos garantizados G y deberes D"""

    salary: float
    guaranteed_funding: float
    duties: float

    def __post_init__(self):
        if not self.salary > 0:
            raise ValidacionError(f"M debe ser > 0: {self.salary}")
        if not self.guaranteed_funding >= 0:
            raise ValidacionError(f"G debe ser ≥ 0: {self.guaranteed_funding}")
        if not self.duties >= 0:
            raise ValidacionError(f"D debe ser ≥ 0: {self.duties}")

    def validate(self, cal: Calibration) -> None:
        if not self.duties < cal.max_hours:
            raise ValidacionError(f"D debe ser < H_max ({cal.max_hours}): {self.duties}")

    def with_levers(self, G: Optional[float] = None, D: Optional[float] = None) -> "ContractState":
        return ContractState(
            salary=self.salary,
            guaranteed_funding=self.guaranteed_funding if G is None else G,
            duties=self.duties if D is None else D,
        )


@dataclass(frozen=True)
class Attributes:
    """Atributos productivos θ = (α, γ, φ)"""

    tfp: float
    funding_intensity: float
    fundraising_ability: float

    def __post_init__(self):
        if not self.tfp > 0:
            raise ValidacionError(f"α debe ser > 0: {self.tfp}")
        if not 0 < self.funding_intensity < 1:
            raise ValidacionError(f"γ debe estar en (0,1): {self.funding_intensity}")
        if not self.fundraising_ability >= 1:
            raise ValidacionError(f"φ debe ser ≥ 1: {self.fundraising_ability}")

    def to_dict(self) -> Dict[str, float]:
        return {
            "alpha": self.tfp,
            "gamma": self.funding_intensity,
            "phi": self.fundraising_ability,
        }


@dataclass(frozen=True)
class PreferenceParams:
    """
    Parámetros individuales de utilidad μ_i = (ω, σ, η, ψ, ξ, ζ).

    σ = 1 se permite al construir (lo puede generar el índice de tipo) pero
    la evaluación de utilidad lo rechaza.
    """

    income_weight: float
    income_curvature: float
    output_curvature: float
    effort_weight: float
    duty_exponent: float
    effort_curvature: float

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidacionError("Parámetros de preferencia inválidos: " + "; ".join(problems))

    def problems(self) -> List[str]:
        out = []
        if not self.income_weight > 0:
            out.append(f"ω={self.income_weight}")
        if not self.income_curvature > 0:
            out.append(f"σ={self.income_curvature}")
        if not 0 < self.output_curvature < 1:
            out.append(f"η={self.output_curvature}")
        if not self.effort_weight > 0:
            out.append(f"ψ={self.effort_weight}")
        if not self.duty_exponent > 0:
            out.append(f"ξ={self.duty_exponent}")
        if not self.effort_curvature > 0:
            out.append(f"ζ={self.effort_curvature}")
        return out

    @property
    def omega(self) -> float:
        return self.income_weight

    @property
    def sigma(self) -> float:
        return self.income_curvature

    @property
    def eta(self) -> float:
        return self.output_curvature

    @property
    def psi(self) -> float:
        return self.effort_weight

    @property
    def xi(self) -> float:
        return self.duty_exponent

    @property
    def zeta(self) -> float:
        return self.effort_curvature

    def to_dict(self) -> Dict[str, float]:
        return {
            "omega": self.omega,
            "sigma": self.sigma,
            "eta": self.eta,
            "psi": self.psi,
            "xi": self.xi,
            "zeta": self.zeta,
        }


@dataclass(frozen=True)
class TimeAllocation:
    """Asignación semanal: investigación R, fundraising F y horas totales H"""

    research: float
    fundraising: float
    total_hours: float

    def validate(self, duties: float, cal: Calibration, atol: float = 1e-8) -> None:
        if not self.research > 0:
            raise ValidacionError(f"R debe ser > 0: {self.research}")
        if not self.fundraising >= 0:
            raise ValidacionError(f"F debe ser ≥ 0: {self.fundraising}")
        if not duties < self.total_hours <= cal.max_hours + atol:
            raise ValidacionError(
                f"H fuera de (D, H_max]: H={self.total_hours}, D={duties}, H_max={cal.max_hours}"
            )
        gap = self.research + self.fundraising + duties - self.total_hours
        if abs(gap) > atol * max(1.0, self.total_hours):
            raise ValidacionError(f"R + F + D ≠ H (diferencia {gap:.3e})")


@dataclass
class ResearcherRecord:
    """Una fila del dataset: estados, asignación observada, respuestas WTP y features"""

    id: str
    field_label: str
    contract: ContractState
    allocation: TimeAllocation
    expected_extra_funding: float
    wtp_answers: Tuple[Optional[float], ...]
    features: Tuple[float, ...] = ()
    type_index: Optional[float] = None

    def validate(self, cal: Calibration) -> None:
        self.contract.validate(cal)
        self.allocation.validate(self.contract.duties, cal)
        if self.expected_extra_funding < 0:
            raise ValidacionError(f"[{self.id}] EG debe ser ≥ 0: {self.expected_extra_funding}")
        if self.expected_extra_funding > 0 and self.allocation.fundraising <= 0:
            raise ValidacionError(f"[{self.id}] EG > 0 requiere F > 0")
        if len(self.wtp_answers) != 4:
            raise ValidacionError(f"[{self.id}] se esperan 4 respuestas WTP")
        for j, ans in enumerate(self.wtp_answers, start=1):
            if ans is not None and not ans > 0:
                raise ValidacionError(f"[{self.id}] M̃_{j} debe ser > 0: {ans}")


def total_budget(c: ContractState, F: float, phi: float, cal: Calibration) -> float:
    """B = B_min + G + φ·F"""
    return cal.min_funding + c.guaranteed_funding + phi * F


def cobb_douglas(alpha: float, gamma: float, B: float, R: float) -> float:
    """α·B^γ·R^(1−γ) sin validar γ (admite γ=0 en pruebas)"""
    if not (B > 0 and R > 0):
        raise ValidacionError(f"Asignación infactible: B={B}, R={R}")
    return alpha * B ** gamma * R ** (1.0 - gamma)


def production_output(a: Attributes, B: float, R: float) -> float:
    return cobb_douglas(a.tfp, a.funding_intensity, B, R)


def income_utility(M: float, p: PreferenceParams) -> float:
    """u1 = ω·M^(1−σ)/(1−σ)"""
    if p.sigma == 1.0:
        raise ValidacionError("σ = 1 no está soportado (caso logarítmico)")
    return p.omega * M ** (1.0 - p.sigma) / (1.0 - p.sigma)


def inverse_income_utility(u: float, p: PreferenceParams) -> Optional[float]:
    """Inversa de u1; None si ningún M > 0 alcanza el nivel u"""
    if p.sigma == 1.0:
        raise ValidacionError("σ = 1 no está soportado (caso logarítmico)")
    base = (1.0 - p.sigma) * u / p.omega
    if not base > 0 or math.isinf(base):
        return None
    M = base ** (1.0 / (1.0 - p.sigma))
    if not (M > 0 and math.isfinite(M)):
        return None
    return M


def output_utility(Y: float, p: PreferenceParams) -> float:
    """u2 = Y^(1−η)/(1−η)"""
    return Y ** (1.0 - p.eta) / (1.0 - p.eta)


def effort_cost(R: float, F: float, D: float, p: PreferenceParams) -> float:
    """u3 = ψ·(R+F+D^ξ)^(1+ζ)/(1+ζ)"""
    load = R + F + (D ** p.xi if D > 0 else 0.0)
    return p.psi * load ** (1.0 + p.zeta) / (1.0 + p.zeta)


def utility_terms(
    M: float, Y: float, R: float, F: float, D: float, p: PreferenceParams
) -> Tuple[float, float, float]:
    """Retorna (u1, u2, u3) por separado"""
    if not (M > 0 and Y > 0 and R >= 0 and F >= 0 and D >= 0):
        raise ValidacionError(f"Dominio inválido: M={M}, Y={Y}, R={R}, F={F}, D={D}")
    return income_utility(M, p), output_utility(Y, p), effort_cost(R, F, D, p)


def utility(M: float, Y: float, R: float, F: float, D: float, p: PreferenceParams) -> float:
    u1, u2, u3 = utility_terms(M, Y, R, F, D, p)
    return u1 + u2 - u3


def social_value(
    M: float, Y: float, R: float, F: float, D: float, p: PreferenceParams, kappa: float
) -> float:
    """u1 + κ·u2 − u3; coincide con la utilidad privada cuando κ = 1"""
    if not kappa >= 1:
        raise ValidacionError(f"κ debe ser ≥ 1: {kappa}")
    u1, u2, u3 = utility_terms(M, Y, R, F, D, p)
    if kappa == 1.0:
        return u1 + u2 - u3
    return u1 + kappa * u2 - u3
