"""Contabilidad contrafactual: composición, equivalencia de fondos, cuñas y resúmenes"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import brentq

from .errors import InfeasibleError, ValidacionError
from .model import Calibration, cobb_douglas, social_value
from .planner import CounterfactualAllocation, PlannerProblem, PlannerResearcher, reallocation_magnitude
from .policy import PolicySolution, solve_policy

logger = logging.getLogger(__name__)

MECHANICAL = "mechanical"
BEHAVIORAL = "behavioral"
SCENARIOS = ("actual", "equalized_inputs", "equalized_tfp", "optimized")


# ---------------------------------------------------------------------------
# Efecto composición
# ---------------------------------------------------------------------------

@dataclass
class CompositionReport:
    s: np.ndarray
    t: np.ndarray
    z: np.ndarray
    d: float
    approx_dlnB: float
    approx_dlnY: float
    exact_dlnB: float
    exact_dlnY: float


def composition_effect(G, B, R, alpha, gamma, d: float) -> CompositionReport:
    """
    Crecimiento uniforme d de G con R fijo.

    Aproximaciones de primer orden con pesos iniciales s = G/B, t = B/ΣB,
    z = Y/ΣY; valores exactos por re-evaluación mecánica en G(1+d).
    """
    G = np.asarray(G, dtype=float)
    B = np.asarray(B, dtype=float)
    R = np.asarray(R, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(B <= 0):
        raise ValidacionError("B_i debe ser > 0")
    s = G / B
    if np.any(s < 0) or np.any(s > 1 + 1e-12):
        raise ValidacionError("Se requiere 0 ≤ G_i ≤ B_i")

    Y = alpha * B ** gamma * R ** (1.0 - gamma)
    t = B / B.sum()
    z = Y / Y.sum()

    B_new = B + d * G
    Y_new = alpha * B_new ** gamma * R ** (1.0 - gamma)
    return CompositionReport(
        s=s,
        t=t,
        z=z,
        d=d,
        approx_dlnB=float(np.sum(t * s) * d),
        approx_dlnY=float(np.sum(z * gamma * s) * d),
        exact_dlnB=float(math.log(B_new.sum() / B.sum())),
        exact_dlnY=float(math.log(Y_new.sum() / Y.sum())),
    )


# ---------------------------------------------------------------------------
# Equivalencia en crecimiento de fondos
# ---------------------------------------------------------------------------

@dataclass
class FundingEquivalence:
    mode: str
    x: float
    budget_growth: float
    target_output: float
    achieved_output: float
    actual_output: float


def _mechanical_output(researchers, solutions, x: float) -> List[float]:
    out = []
    for r, sol in zip(researchers, solutions):
        B = sol.B + x * r.contract.guaranteed_funding
        out.append(cobb_douglas(r.attributes.tfp, r.attributes.funding_intensity, B, sol.R))
    return out


def _behavioral_solutions(researchers, x: float, cal: Calibration) -> List[PolicySolution]:
    return [
        solve_policy(
            r.contract.with_levers(G=r.contract.guaranteed_funding * (1.0 + x)),
            r.attributes,
            r.prefs,
            cal,
        )
        for r in researchers
    ]


def funding_growth_equivalence(
    researchers: Sequence[PlannerResearcher],
    target_output: float,
    mode: str = MECHANICAL,
    cal: Optional[Calibration] = None,
    rtol: float = 1e-8,
) -> FundingEquivalence:
    """
    Crecimiento porcentual x de G que lleva el producto agregado a Y*.

    mechanical mantiene (R, F, H) en sus valores actuales; behavioral
    re-optimiza cada investigador con π = 1 (fondos inyectados exógenamente).
    """
    cal = cal or Calibration()
    if mode not in (MECHANICAL, BEHAVIORAL):
        raise ValidacionError(f"Modo desconocido: {mode}")
    if not researchers:
        raise ValidacionError("Población vacía")

    base = [solve_policy(r.contract, r.attributes, r.prefs, cal) for r in researchers]
    actual = math.fsum(s.Y for s in base)
    if target_output < actual * (1.0 - 1e-12):
        raise ValidacionError(f"Y* ({target_output:.6g}) es menor que el producto actual ({actual:.6g})")

    def outputs(x: float) -> List[float]:
        if mode == MECHANICAL:
            return _mechanical_output(researchers, base, x)
        return [s.Y for s in _behavioral_solutions(researchers, x, cal)]

    def budgets(x: float) -> float:
        if mode == MECHANICAL:
            return math.fsum(s.B + x * r.contract.guaranteed_funding for r, s in zip(researchers, base))
        return math.fsum(s.B for s in _behavioral_solutions(researchers, x, cal))

    def gap(x: float) -> float:
        return math.fsum(outputs(x)) / target_output - 1.0

    B0 = math.fsum(s.B for s in base)
    if target_output <= actual:
        return FundingEquivalence(mode, 0.0, 0.0, target_output, actual, actual)

    hi = 1.0
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise InfeasibleError(
                f"Y* inalcanzable en modo {mode}",
                {"target": target_output, "actual": actual, "G_total": sum(r.contract.guaranteed_funding for r in researchers)},
            )
    x = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-12, maxiter=500)
    achieved = math.fsum(outputs(x))
    if abs(achieved / target_output - 1.0) > rtol:
        logger.warning(f"⚠ Equivalencia de fondos con error relativo {achieved / target_output - 1.0:.2e}")
    growth = budgets(x) / B0 - 1.0
    logger.info(f"✓ Equivalencia {mode}: x = {x:.4%}, crecimiento de B = {growth:.4%}")
    return FundingEquivalence(mode, x, growth, target_output, achieved, actual)


# ---------------------------------------------------------------------------
# Cuñas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WedgeRow:
    id: str
    input: str
    actual: float
    optimal: float

    @property
    def wedge(self) -> float:
        # positivo: sobre-dotado
        return self.actual - self.optimal


def build_wedge_rows(
    ids: Sequence[str], actual: Dict[str, Sequence[float]], optimal: Dict[str, Sequence[float]]
) -> List[WedgeRow]:
    rows = []
    for name in actual:
        if name not in optimal:
            raise ValidacionError(f"Falta el nivel óptimo para '{name}'")
        a, o = list(actual[name]), list(optimal[name])
        if not (len(a) == len(o) == len(ids)):
            raise ValidacionError(f"Dimensiones inconsistentes para '{name}'")
        rows.extend(WedgeRow(i, name, float(x), float(y)) for i, x, y in zip(ids, a, o))
    return rows


def wedge_frame(rows: Sequence[WedgeRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [{"id": r.id, "input": r.input, "actual": r.actual, "optimal": r.optimal, "wedge": r.wedge} for r in rows],
        columns=["id", "input", "actual", "optimal", "wedge"],
    )


def mean_absolute_wedge(rows: Sequence[WedgeRow]) -> Dict[str, float]:
    by_input: Dict[str, List[float]] = {}
    for r in rows:
        by_input.setdefault(r.input, []).append(abs(r.wedge))
    return {k: float(np.mean(v)) for k, v in by_input.items()}


# ---------------------------------------------------------------------------
# Descomposición por campo
# ---------------------------------------------------------------------------

def field_output_decomposition(frame: pd.DataFrame, fields: Optional[Sequence[str]] = None) -> pd.DataFrame:
    """
    Producto per cápita relativo por campo bajo cuatro escenarios.

    `frame` trae una fila por investigador con field, alpha, gamma, B, R, Y e
    Y_optimized. El campo de referencia (100%) es el de mayor producto per
    cápita actual, y se mantiene en todos los escenarios.
    """
    required = ["field", "alpha", "gamma", "B", "R", "Y", "Y_optimized"]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ValidacionError(f"Faltan columnas para la descomposición: {missing}")
    fields = list(fields) if fields is not None else sorted(frame["field"].unique())
    for f in fields:
        if not (frame["field"] == f).any():
            raise ValidacionError(f"Campo vacío: {f}")
    data = frame[frame["field"].isin(fields)]

    B_bar, R_bar = data["B"].mean(), data["R"].mean()
    alpha_bar = data["alpha"].mean()
    g = data["gamma"]
    scenario_output = pd.DataFrame(
        {
            "field": data["field"],
            "actual": data["Y"],
            "equalized_inputs": data["alpha"] * B_bar ** g * R_bar ** (1.0 - g),
            "equalized_tfp": alpha_bar * data["B"] ** g * data["R"] ** (1.0 - g),
            "optimized": data["Y_optimized"],
        }
    )
    per_capita = scenario_output.groupby("field")[list(SCENARIOS)].mean().reindex(fields)
    benchmark = per_capita["actual"].idxmax()
    relative = 100.0 * per_capita / per_capita.loc[benchmark]
    relative.attrs["benchmark"] = benchmark
    logger.info(f"✓ Descomposición por campo: referencia '{benchmark}'")
    return relative


# ---------------------------------------------------------------------------
# Resúmenes
# ---------------------------------------------------------------------------

def allocation_frame(problem: PlannerProblem, allocation: CounterfactualAllocation) -> pd.DataFrame:
    """Una fila por investigador con palancas, tiempos, insumos, producto y valores"""
    rows = []
    for r, g, d, sol in zip(problem.researchers, allocation.G_tilde, allocation.D_tilde, allocation.solutions):
        rows.append(
            {
                "id": r.id,
                "field": r.field_label,
                "G": float(g),
                "D": float(d),
                "H": sol.H,
                "F": sol.F,
                "R": sol.R,
                "B": sol.B,
                "Y": sol.Y,
                "V": sol.V,
                "W": social_value(r.contract.salary, sol.Y, sol.R, sol.F, float(d), r.prefs, problem.kappa),
                "alpha": r.attributes.tfp,
                "gamma": r.attributes.funding_intensity,
                "phi": r.attributes.fundraising_ability,
            }
        )
    return pd.DataFrame(rows)


def _pct(new: float, old: float, signed_base: bool = False) -> Optional[float]:
    base = abs(old) if signed_base else old
    if base == 0 or not (math.isfinite(new) and math.isfinite(old)):
        return None
    return 100.0 * (new - old) / base


def counterfactual_summary(actual: pd.DataFrame, counterfactual: pd.DataFrame) -> pd.DataFrame:
    """
    Cambios porcentuales (nuevo − viejo)/viejo entre poblaciones emparejadas.

    Los niveles de utilidad pueden ser negativos; su cambio se expresa
    relativo a |viejo|. Las celdas con base cero quedan en None.
    """
    if list(actual["id"]) != list(counterfactual["id"]):
        raise ValidacionError("Las poblaciones no están emparejadas por id")

    rows = []

    def add(metric: str, old: float, new: float, signed_base: bool = False):
        rows.append(
            {
                "metric": metric,
                "actual": float(old),
                "counterfactual": float(new),
                "pct_change": _pct(float(new), float(old), signed_base),
            }
        )

    for col in ("R", "B", "Y"):
        add(f"{col}_mean", actual[col].mean(), counterfactual[col].mean())
        add(f"{col}_sd", actual[col].std(ddof=0), counterfactual[col].std(ddof=0))
    for col in ("V", "W"):
        add(f"{col}_mean", actual[col].mean(), counterfactual[col].mean(), signed_base=True)
        add(f"{col}_sd", actual[col].std(ddof=0), counterfactual[col].std(ddof=0))
    add("Y_per_research_hour", actual["Y"].sum() / actual["R"].sum(), counterfactual["Y"].sum() / counterfactual["R"].sum())
    add("Y_per_dollar", actual["Y"].sum() / actual["B"].sum(), counterfactual["Y"].sum() / counterfactual["B"].sum())

    for lever in ("G", "D", "R", "B"):
        magnitude = reallocation_magnitude(actual[lever], counterfactual[lever])
        rows.append(
            {
                "metric": f"reallocated_{lever}",
                "actual": 0.0,
                "counterfactual": magnitude,
                "pct_change": None if magnitude is None else 100.0 * magnitude,
            }
        )
    return pd.DataFrame(rows, columns=["metric", "actual", "counterfactual", "pct_change"])
