"""Índice de tipo T por k-means (k=2) y parámetros de preferencia en función de T"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np
from sklearn.cluster import KMeans

from .errors import ValidacionError
from .model import PreferenceParams

logger = logging.getLogger(__name__)

N_RESTARTS = 50
DISTANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class DeepParams:
    """Vector profundo μ = (ω, ψ, δ_σ, δ_η, δ_ξ, δ_ζ)"""

    omega: float
    psi: float
    d_sigma0: float = 0.0
    d_sigma1: float = 0.0
    d_eta0: float = 0.0
    d_eta1: float = 0.0
    d_xi0: float = 0.0
    d_xi1: float = 0.0
    d_zeta0: float = 0.0
    d_zeta1: float = 0.0

    NAMES = (
        "omega", "psi",
        "d_sigma0", "d_sigma1",
        "d_eta0", "d_eta1",
        "d_xi0", "d_xi1",
        "d_zeta0", "d_zeta1",
    )

    @classmethod
    def homogeneous(
        cls, omega: float, psi: float, sigma: float, eta: float, xi: float, zeta: float
    ) -> "DeepParams":
        """Vector sin pendientes que reproduce (σ, η, ξ, ζ) para todo T"""
        return cls(
            omega=omega,
            psi=psi,
            d_sigma0=math.log(sigma),
            d_eta0=math.log(eta / (1.0 - eta)),
            d_xi0=math.log(xi),
            d_zeta0=math.log(zeta),
        )

    @classmethod
    def draft_homogeneous(cls) -> "DeepParams":
        return cls.homogeneous(
            omega=2.7e-4, psi=1.0e-14, sigma=1.736, eta=0.1878, xi=1.469, zeta=5.2e-12
        )

    def to_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.NAMES], dtype=float)

    @classmethod
    def from_vector(cls, values) -> "DeepParams":
        return cls(**{n: float(v) for n, v in zip(cls.NAMES, values)})

    def to_search_vector(self) -> np.ndarray:
        """Coordenadas de búsqueda: (ln ω, ln ψ, δ…)"""
        v = self.to_vector()
        v[0] = math.log(self.omega)
        v[1] = math.log(self.psi)
        return v

    @classmethod
    def from_search_vector(cls, values) -> "DeepParams":
        v = np.asarray(values, dtype=float).copy()
        v[0] = math.exp(v[0])
        v[1] = math.exp(v[1])
        return cls.from_vector(v)

    def to_dict(self) -> Dict[str, float]:
        return {n: getattr(self, n) for n in self.NAMES}


def _logistic(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def preference_params_from_type(T: float, d: DeepParams) -> PreferenceParams:
    """σ, ξ, ζ exponenciales y η logística en T; ω y ψ comunes"""
    return PreferenceParams(
        income_weight=d.omega,
        income_curvature=math.exp(d.d_sigma0 + T * d.d_sigma1),
        output_curvature=_logistic(d.d_eta0 + T * d.d_eta1),
        effort_weight=d.psi,
        duty_exponent=math.exp(d.d_xi0 + T * d.d_xi1),
        effort_curvature=math.exp(d.d_zeta0 + T * d.d_zeta1),
    )


@dataclass
class TypeModel:
    """Estandarización, centroides y normalización de la log-distancia"""

    feature_means: List[float]
    feature_sds: List[float]
    centroids: List[List[float]]
    reference_centroid: int
    log_distance_mean: float
    log_distance_sd: float
    degenerate: bool = False
    inertia: float = 0.0

    def standardize(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        means = np.asarray(self.feature_means)
        sds = np.asarray(self.feature_sds)
        Z = np.zeros_like(X)
        used = sds > 0
        Z[:, used] = (X[:, used] - means[used]) / sds[used]
        return Z

    def transform(self, features) -> np.ndarray:
        X = np.atleast_2d(np.asarray(features, dtype=float))
        if self.degenerate:
            return np.zeros(X.shape[0])
        Z = self.standardize(X)
        ref = np.asarray(self.centroids[self.reference_centroid])
        dist = np.sqrt(((Z - ref) ** 2).sum(axis=1))
        logd = np.log(np.maximum(dist, DISTANCE_FLOOR))
        if self.log_distance_sd > 0:
            return (logd - self.log_distance_mean) / self.log_distance_sd
        return np.zeros(X.shape[0])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TypeModel":
        return cls(**data)


def fit_type_index(features, seed: int = 0) -> Tuple[TypeModel, np.ndarray]:
    """
    Ajusta k-means (k=2) sobre las features estandarizadas y calcula T.

    T_i es la log-distancia euclidiana al centroide de referencia (el de menor
    primera coordenada), estandarizada en la muestra de ajuste.
    """
    X = np.asarray(features, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 1:
        raise ValidacionError(f"Se requiere una matriz N×K con N ≥ 2 y K ≥ 1: {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidacionError("Features con valores no finitos")

    means = X.mean(axis=0)
    sds = X.std(axis=0)
    sds = np.where(sds > 1e-12 * np.maximum(1.0, np.abs(means)), sds, 0.0)
    model = TypeModel(
        feature_means=means.tolist(),
        feature_sds=sds.tolist(),
        centroids=[],
        reference_centroid=0,
        log_distance_mean=0.0,
        log_distance_sd=0.0,
    )
    Z = model.standardize(X)

    if np.max(np.abs(Z)) < 1e-12 or len(np.unique(Z, axis=0)) < 2:
        logger.warning("⚠ Features degeneradas: T = 0 para todos los investigadores")
        model.degenerate = True
        model.centroids = [Z[0].tolist(), Z[0].tolist()]
        return model, np.zeros(X.shape[0])

    km = KMeans(
        n_clusters=2,
        init="k-means++",
        n_init=N_RESTARTS,
        algorithm="lloyd",
        random_state=seed,
    )
    km.fit(Z)
    centroids = km.cluster_centers_
    reference = int(np.argmin(centroids[:, 0]))

    dist = np.sqrt(((Z - centroids[reference]) ** 2).sum(axis=1))
    logd = np.log(np.maximum(dist, DISTANCE_FLOOR))
    model.centroids = centroids.tolist()
    model.reference_centroid = reference
    model.log_distance_mean = float(logd.mean())
    model.log_distance_sd = float(logd.std())
    model.inertia = float(km.inertia_)

    T = model.transform(X)
    logger.info(
        f"✓ Índice de tipo: {X.shape[0]} investigadores, {X.shape[1]} features, "
        f"inercia {model.inertia:.4g}"
    )
    return model, T


def cluster_labels(model: TypeModel, features) -> np.ndarray:
    """Cluster más cercano (0 = referencia) para cada fila"""
    Z = model.standardize(np.atleast_2d(np.asarray(features, dtype=float)))
    C = np.asarray(model.centroids)
    d = ((Z[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)
    nearest = np.argmin(d, axis=1)
    return (nearest != model.reference_centroid).astype(int)
