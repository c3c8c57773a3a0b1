"""
Calculador de diagnósticos: dispersión de TFP, colas de potencia, varianza y desigualdad
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm

from .errors import ValidacionError

logger = logging.getLogger(__name__)


@dataclass
class VarianceDecomposition:
    share: Optional[float]
    raw_share: Optional[float]
    var_log_output: float
    components: dict
    residual: float


@dataclass
class PowerLawFit:
    exponent: float
    std_error: float
    n: int
    top_fraction: float


@dataclass
class WedgeRegression:
    beta: float
    intercept: float
    delta: dict
    r_squared: float
    dropped: List[str]
    n: int


class DiagnosticsCalculator:
    """Estadísticos post-estimación sobre atributos y asignaciones"""

    @staticmethod
    def _positive(values, name: str) -> np.ndarray:
        x = np.asarray(values, dtype=float)
        if np.any(~np.isfinite(x)) or np.any(x <= 0):
            raise ValidacionError(f"{name} debe ser positivo y finito")
        return x

    @staticmethod
    def residualize(y, design) -> np.ndarray:
        """Residuos de MCO de y sobre el diseño (con constante)"""
        X = sm.add_constant(np.asarray(design, dtype=float), has_constant="add")
        fit = sm.OLS(np.asarray(y, dtype=float), X).fit(method="qr")
        return np.asarray(fit.resid)

    @classmethod
    def tfp_ratio_90_10(cls, alpha, design=None) -> float:
        """Razón de percentiles 90/10 de α; con diseño, sobre residuos de log α"""
        a = cls._positive(alpha, "α")
        if a.size < 10:
            raise ValidacionError(f"Se requieren al menos 10 observaciones: {a.size}")
        if design is None:
            return float(np.quantile(a, 0.9) / np.quantile(a, 0.1))
        e = cls.residualize(np.log(a), design)
        return float(np.exp(np.quantile(e, 0.9) - np.quantile(e, 0.1)))

    @classmethod
    def variance_decomposition(cls, alpha, gamma, B, R) -> VarianceDecomposition:
        """Descomposición de Var(log Y) con log Y = log α + γ log B + (1−γ) log R"""
        a = np.log(cls._positive(alpha, "α"))
        g = np.asarray(gamma, dtype=float)
        b = g * np.log(cls._positive(B, "B"))
        r = (1.0 - g) * np.log(cls._positive(R, "R"))
        log_y = a + b + r

        def cov(x, y):
            return float(np.mean((x - x.mean()) * (y - y.mean())))

        components = {
            "var_log_alpha": cov(a, a),
            "var_funding": cov(b, b),
            "var_research": cov(r, r),
            "cov_alpha_funding": 2.0 * cov(a, b),
            "cov_alpha_research": 2.0 * cov(a, r),
            "cov_funding_research": 2.0 * cov(b, r),
        }
        var_y = cov(log_y, log_y)
        residual = var_y - sum(components.values())
        if var_y <= 0:
            logger.warning("⚠ Var(log Y) = 0: descomposición indefinida")
            return VarianceDecomposition(None, None, var_y, components, residual)
        tfp = components["var_log_alpha"] + components["cov_alpha_funding"] + components["cov_alpha_research"]
        return VarianceDecomposition(
            share=tfp / var_y,
            raw_share=components["var_log_alpha"] / var_y,
            var_log_output=var_y,
            components=components,
            residual=residual,
        )

    @classmethod
    def power_law_fit(cls, values, top_fraction: float) -> PowerLawFit:
        """Regresión log(rango − 1/2) sobre log(valor) en la cola superior"""
        x = cls._positive(values, "valores")
        if not 0 < top_fraction <= 1:
            raise ValidacionError(f"Fracción superior fuera de (0,1]: {top_fraction}")
        order = np.argsort(-x, kind="stable")
        n = int(np.floor(top_fraction * x.size))
        if n < 20:
            raise ValidacionError(f"La cola superior tiene {n} observaciones (< 20)")
        top = x[order[:n]]
        ranks = np.arange(1, n + 1, dtype=float)
        X = sm.add_constant(np.log(top))
        fit = sm.OLS(np.log(ranks - 0.5), X).fit()
        exponent = -float(fit.params[1])
        return PowerLawFit(exponent, exponent * np.sqrt(2.0 / n), n, top_fraction)

    @staticmethod
    def lorenz_gini(values) -> Tuple[pd.DataFrame, float]:
        x = np.sort(np.asarray(values, dtype=float))
        if np.any(x < 0):
            raise ValidacionError("Lorenz requiere valores ≥ 0")
        total = x.sum()
        if total == 0:
            raise ValidacionError("Lorenz indefinida: todos los valores son cero")
        n = x.size
        curve = pd.DataFrame(
            {
                "population_share": np.concatenate([[0.0], np.arange(1, n + 1) / n]),
                "input_share": np.concatenate([[0.0], np.cumsum(x) / total]),
            }
        )
        i = np.arange(1, n + 1)
        gini = float(2.0 * np.sum(i * x) / (n * total) - (n + 1.0) / n)
        return curve, gini

    @staticmethod
    def wedge_regression(actual, optimal, covariates=None, names: Optional[List[str]] = None) -> WedgeRegression:
        """MCO de nivel actual sobre nivel óptimo y covariables, resuelto por QR"""
        y = np.asarray(actual, dtype=float)
        cols = [np.ones_like(y), np.asarray(optimal, dtype=float)]
        labels = ["const", "optimal"]
        if covariates is not None:
            Z = np.asarray(covariates, dtype=float)
            if Z.ndim == 1:
                Z = Z[:, None]
            names = names or [f"z{j + 1}" for j in range(Z.shape[1])]
            for j in range(Z.shape[1]):
                cols.append(Z[:, j])
                labels.append(names[j])
        X = np.column_stack(cols)
        if y.size <= X.shape[1]:
            raise ValidacionError(f"N={y.size} no supera el número de regresores {X.shape[1]}")

        keep, dropped = [], []
        for j in range(X.shape[1]):
            trial = keep + [j]
            _, Rm = np.linalg.qr(X[:, trial])
            diag = np.abs(np.diag(Rm))
            if diag[-1] > 1e-10 * max(1.0, diag.max()):
                keep = trial
            else:
                dropped.append(labels[j])
        if dropped:
            logger.warning(f"⚠ Regresión de cuñas: columnas colineales eliminadas {dropped}")

        fit = sm.OLS(y, X[:, keep]).fit(method="qr")
        params = dict(zip([labels[j] for j in keep], np.asarray(fit.params)))
        delta = {k: float(v) for k, v in params.items() if k not in ("const", "optimal")}
        ss_res = float(np.sum(np.asarray(fit.resid) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
        return WedgeRegression(
            beta=float(params.get("optimal", np.nan)),
            intercept=float(params.get("const", np.nan)),
            delta=delta,
            r_squared=r2,
            dropped=dropped,
            n=int(y.size),
        )

    @staticmethod
    def histogram_table(values, bins: int = 20) -> pd.DataFrame:
        """Tabla de frecuencias con bordes que cubren [min, max]"""
        x = np.asarray(values, dtype=float)
        x = x[np.isfinite(x)]
        if x.size == 0:
            return pd.DataFrame(columns=["bin_left", "bin_right", "count", "share"])
        counts, edges = np.histogram(x, bins=bins, range=(x.min(), x.max()))
        return pd.DataFrame(
            {
                "bin_left": edges[:-1],
                "bin_right": edges[1:],
                "count": counts,
                "share": counts / x.size,
            }
        )
