"""Marco genérico del productor y aplicaciones con solución cerrada"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

from scipy.optimize import brentq, minimize_scalar

from .errors import NumericalError, ValidacionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenericProducer:
    """
    Productor genérico: max_X b(M, α·f(X, Δ)) − c(X) sobre X ∈ [0, x_max].

    `production(X, Δ)` recibe el insumo elegido y la cantidad ofrecida fuera
    del mercado; el precio del producto está normalizado a 1.
    """

    benefit: Callable[[float, float], float]
    cost: Callable[[float], float]
    production: Callable[[float, float], float]
    endowment: float
    alpha: float
    x_max: float = 1e3
    max_payment: Optional[float] = None

    def payoff(self, X: float, delta: float = 0.0, payment: float = 0.0) -> float:
        return self.benefit(self.endowment - payment, self.alpha * self.production(X, delta)) - self.cost(X)


@dataclass(frozen=True)
class GenericWtpResult:
    wtp: float
    x_star: float
    x_tilde_star: float


def additive(f: Callable[[float], float]) -> Callable[[float, float], float]:
    """f(X + Δ): la oferta se suma al insumo elegido"""
    return lambda X, delta: f(X + delta)


def _best_response(prod: GenericProducer, delta: float, payment: float):
    res = minimize_scalar(
        lambda X: -prod.payoff(X, delta, payment),
        bounds=(0.0, prod.x_max),
        method="bounded",
        options={"xatol": 1e-11, "maxiter": 2000},
    )
    if not res.success:
        raise NumericalError(f"No convergió la elección del insumo: {res.message}")
    X = res.x
    value = -res.fun
    # la cota inferior es una solución de esquina posible
    corner = prod.payoff(0.0, delta, payment)
    if corner >= value:
        return 0.0, corner
    return X, value


def solve_generic_wtp(prod: GenericProducer, delta: float) -> GenericWtpResult:
    if delta < 0:
        raise ValidacionError(f"Δ debe ser ≥ 0: {delta}")
    x_star, v_star = _best_response(prod, 0.0, 0.0)
    if delta == 0:
        return GenericWtpResult(0.0, x_star, x_star)

    def gap(w: float) -> float:
        return _best_response(prod, delta, w)[1] - v_star

    hi = 1.0
    cap = None if prod.max_payment is None else prod.max_payment * (1.0 - 1e-12)
    if cap is not None:
        hi = min(hi, cap)
    doublings = 0
    while gap(hi) > 0:
        if cap is not None and hi >= cap:
            raise NumericalError("WTP supera el pago máximo admisible")
        hi = 2.0 * hi if cap is None else min(2.0 * hi, cap)
        doublings += 1
        if doublings > 200:
            raise NumericalError("No se encontró cota superior para la WTP")

    wtp, info = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-15, maxiter=500, full_output=True, disp=False)
    if not info.converged:
        raise NumericalError(f"WTP no convergió ({info.iterations} iteraciones)")
    x_tilde, _ = _best_response(prod, delta, wtp)
    return GenericWtpResult(wtp, x_star, x_tilde)


def generic_wtp(prod: GenericProducer, delta: float) -> float:
    """Pago que iguala el valor con Δ gratis al valor sin oferta"""
    return solve_generic_wtp(prod, delta).wtp


def crowd_out_derivative(prod: GenericProducer, delta: float, h: float = 1e-4) -> float:
    """∂X̃*/∂Δ por diferencias finitas hacia adelante"""
    lo = solve_generic_wtp(prod, delta).x_tilde_star
    hi = solve_generic_wtp(prod, delta + h).x_tilde_star
    return (hi - lo) / h


# ---------------------------------------------------------------------------
# Aplicación 1: producción lineal, costo convexo c·l^ψ
# ---------------------------------------------------------------------------

def identify_alpha_app1(l_hat: float, w: float, c: float, psi: float) -> float:
    """α = w + cψ·l̂^(ψ−1)"""
    if not (c > 0 and psi > 1 and l_hat > 0):
        raise ValidacionError(f"Requiere c>0, ψ>1, l̂>0: c={c}, ψ={psi}, l̂={l_hat}")
    return w + c * psi * l_hat ** (psi - 1.0)


def app1_optimal_labor(alpha: float, w: float, c: float, psi: float) -> float:
    """l* = ((α−w)/(ψc))^(1/(ψ−1))"""
    if alpha <= w:
        return 0.0
    return ((alpha - w) / (psi * c)) ** (1.0 / (psi - 1.0))


def app1_wtp_closed_form(w: float, c: float, psi: float, l_hat: float, delta: float) -> float:
    return identify_alpha_app1(l_hat, w, c, psi) * delta


def app1_producer(w: float, c: float, psi: float, l_hat: float, endowment: float = 0.0) -> GenericProducer:
    alpha = identify_alpha_app1(l_hat, w, c, psi)
    return GenericProducer(
        benefit=lambda m, q: m + q,
        cost=lambda l: w * l + c * l ** psi,
        production=additive(lambda l: l),
        endowment=endowment,
        alpha=alpha,
        x_max=max(10.0, 4.0 * l_hat),
    )


def app1_decreasing_returns_producer(
    w: float, c: float, psi: float, beta: float, alpha: float
) -> GenericProducer:
    """Extensión sin forma cerrada: f(l) = l^β con costo w·l + c·l^ψ"""
    return GenericProducer(
        benefit=lambda m, q: m + q,
        cost=lambda l: w * l + c * l ** psi,
        production=additive(lambda l: l ** beta),
        endowment=0.0,
        alpha=alpha,
        x_max=100.0,
    )


# ---------------------------------------------------------------------------
# Aplicación 2: costo lineal, no identificación
# ---------------------------------------------------------------------------

def app2_optimal_labor(w: float, beta: float, alpha: float) -> float:
    """l* = (βα/w)^(1/(1−β))"""
    return (beta * alpha / w) ** (1.0 / (1.0 - beta))


def app2_wtp(w: float, beta: float, alpha: float, delta: float) -> float:
    """WTP = w·Δ, válido mientras l* ≥ Δ"""
    l_star = app2_optimal_labor(w, beta, alpha)
    if l_star < delta:
        raise ValidacionError(
            f"Forma cerrada inválida: l*={l_star:.6g} < Δ={delta} (no hay desplazamiento completo)"
        )
    return w * delta


def app2_producer(w: float, beta: float, alpha: float) -> GenericProducer:
    l_star = app2_optimal_labor(w, beta, alpha)
    return GenericProducer(
        benefit=lambda m, q: m + q,
        cost=lambda l: w * l,
        production=additive(lambda l: l ** beta),
        endowment=0.0,
        alpha=alpha,
        x_max=max(10.0, 4.0 * l_star),
    )


# ---------------------------------------------------------------------------
# Aplicación 3: beneficio logarítmico en dinero, insumo fijo d ofrecido
# ---------------------------------------------------------------------------

def app3_optimal_labor(alpha: float, beta: float, eta: float, phi: float, psi: float, d: float) -> float:
    """l* = (η(1−β)α^η d^(ηβ)/(φψ))^(1/(ψ−η(1−β)))"""
    return (eta * (1.0 - beta) * alpha ** eta * d ** (eta * beta) / (phi * psi)) ** (
        1.0 / (psi - eta * (1.0 - beta))
    )


def app3_surplus(alpha: float, beta: float, eta: float, phi: float, psi: float, d: float) -> float:
    """(α d^β l*^(1−β))^η − φ l*^ψ"""
    l_star = app3_optimal_labor(alpha, beta, eta, phi, psi, d)
    return (alpha * d ** beta * l_star ** (1.0 - beta)) ** eta - phi * l_star ** psi


def app3_wtp_implicit(
    alpha: float, beta: float, eta: float, phi: float, psi: float, m: float, d: float, delta: float
) -> float:
    """Raíz de ln(m−WTP) + S(d+Δ) = ln m + S(d)"""
    gain = app3_surplus(alpha, beta, eta, phi, psi, d + delta) - app3_surplus(alpha, beta, eta, phi, psi, d)
    if delta == 0:
        return 0.0

    def equation(wtp: float) -> float:
        return math.log(m - wtp) + gain - math.log(m)

    return brentq(equation, 0.0, m * (1.0 - 1e-15), xtol=1e-15, rtol=1e-15, maxiter=500)


def app3_producer(
    alpha: float, beta: float, eta: float, phi: float, psi: float, m: float, d: float
) -> GenericProducer:
    return GenericProducer(
        benefit=lambda money, q: math.log(money) + q ** eta if money > 0 else -math.inf,
        cost=lambda l: phi * l ** psi,
        production=lambda l, delta: (d + delta) ** beta * l ** (1.0 - beta),
        endowment=m,
        alpha=alpha,
        x_max=10.0,
        max_payment=m,
    )
