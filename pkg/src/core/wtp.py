"""Salarios de indiferencia y disposición a pagar por ofertas contrafactuales"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional

from scipy.optimize import brentq

from .errors import UnboundedCompensationError, ValidacionError
from .model import (
    MONTHS_PER_YEAR,
    WEEKS_PER_YEAR,
    Attributes,
    Calibration,
    ContractState,
    PreferenceParams,
    ResearcherRecord,
    income_utility,
    inverse_income_utility,
)
from .policy import solve_policy

logger = logging.getLogger(__name__)

FUNDING_STEP_1 = 250_000.0
FUNDING_STEP_2 = 1_000_000.0
DUTY_STEP_MONTHLY = 20.0
DUTY_STEP_WEEKLY = DUTY_STEP_MONTHLY * MONTHS_PER_YEAR / WEEKS_PER_YEAR

SALARY_FLOOR = 1.0
SALARY_TOL = 0.01


@dataclass(frozen=True)
class Offer:
    """Oferta contrafactual (G̃, D̃)"""

    G_tilde: float
    D_tilde: float
    label: str

    def validate(self, cal: Calibration) -> None:
        if not self.G_tilde >= 0:
            raise ValidacionError(f"G̃ debe ser ≥ 0: {self.G_tilde}")
        if not 0 <= self.D_tilde < cal.max_hours:
            raise ValidacionError(f"D̃ fuera de [0, H_max): {self.D_tilde}")


@dataclass(frozen=True)
class WtpReport:
    label: str
    offer: Offer
    indifference_salary: float
    wtp: float
    per_dollar: Optional[float] = None
    per_hour: Optional[float] = None


def standard_offers(c: ContractState) -> List[Offer]:
    """Los cuatro experimentos mentales; el 3 se omite cuando D = 0"""
    offers = [
        Offer(c.guaranteed_funding + FUNDING_STEP_1, c.duties, "1"),
        Offer(c.guaranteed_funding + FUNDING_STEP_2, c.duties, "2"),
    ]
    if c.duties > 0:
        offers.append(Offer(c.guaranteed_funding, 0.0, "3"))
    offers.append(Offer(c.guaranteed_funding, c.duties + DUTY_STEP_WEEKLY, "4"))
    return offers


def indifference_salary(
    record: ResearcherRecord,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
    offer: Offer,
    baseline_value: Optional[float] = None,
    method: str = "closed_form",
) -> float:
    """
    M̃ tal que V(M̃, G̃, D̃) = V(M, G, D), con el tiempo re-optimizado bajo la oferta.

    El salario no entra en la asignación de tiempo, así que V = u1(M) + Ψ(G, D)
    y M̃ = u1⁻¹(u1(M) + Ψ(base) − Ψ(oferta)). `method="bisection"` resuelve la
    misma igualdad con búsqueda acotada sobre M̃.
    """
    offer.validate(cal)
    c = record.contract
    if baseline_value is None:
        baseline_value = solve_policy(c, a, p, cal).non_salary_value
    offered = c.with_levers(G=offer.G_tilde, D=offer.D_tilde)
    offer_value = solve_policy(offered, a, p, cal).non_salary_value

    gap = baseline_value - offer_value
    if gap == 0.0:
        return c.salary

    if method == "bisection":
        return _bisect_salary(c.salary, gap, p, record.id)
    if method != "closed_form":
        raise ValidacionError(f"Método desconocido: {method}")

    target = income_utility(c.salary, p) + gap
    M_tilde = inverse_income_utility(target, p)
    if M_tilde is None:
        raise UnboundedCompensationError(
            f"[{record.id}] ningún M̃ > 0 iguala la utilidad de la oferta {offer.label}",
            {"id": record.id, "offer": offer.label, "gap": gap, "sigma": p.sigma},
        )
    return M_tilde


def _bisect_salary(M: float, gap: float, p: PreferenceParams, rid: str) -> float:
    target = income_utility(M, p) + gap

    def excess(m: float) -> float:
        return income_utility(m, p) - target

    lo = SALARY_FLOOR
    if excess(lo) > 0:
        raise UnboundedCompensationError(
            f"[{rid}] la oferta vale más que todo el salario", {"id": rid, "gap": gap}
        )
    hi = 10.0 * M
    doublings = 0
    while excess(hi) < 0:
        hi *= 2.0
        doublings += 1
        if doublings > 200 or math.isinf(hi):
            raise UnboundedCompensationError(
                f"[{rid}] compensación no acotada", {"id": rid, "gap": gap}
            )
    return brentq(excess, lo, hi, xtol=SALARY_TOL, maxiter=500)


def run_thought_experiments(
    record: ResearcherRecord,
    a: Attributes,
    p: PreferenceParams,
    cal: Calibration,
) -> List[WtpReport]:
    c = record.contract
    baseline = solve_policy(c, a, p, cal).non_salary_value
    reports = []
    for offer in standard_offers(c):
        M_tilde = indifference_salary(record, a, p, cal, offer, baseline_value=baseline)
        reports.append(wtp_report(c, offer, M_tilde))
    return reports


def wtp_report(c: ContractState, offer: Offer, M_tilde: float) -> WtpReport:
    """Convierte un salario de indiferencia en WTP por dólar o por hora"""
    wtp = c.salary - M_tilde
    per_dollar = None
    per_hour = None
    dG = offer.G_tilde - c.guaranteed_funding
    dD = c.duties - offer.D_tilde
    if dG != 0 and offer.D_tilde == c.duties:
        per_dollar = wtp / dG
    elif dD != 0 and dG == 0:
        per_hour = wtp / dD
    return WtpReport(
        label=offer.label,
        offer=offer,
        indifference_salary=M_tilde,
        wtp=wtp,
        per_dollar=per_dollar,
        per_hour=per_hour,
    )
