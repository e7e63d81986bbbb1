"""Closed-form results: AIR product form and AMF means, DOCS mean via
singular quadrature, thermodynamic-limit thresholds and fixed points, SIS
threshold bounds, branching quantities, and the unconditional p* bound."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ModelParams, NumericalError, ValidationError


@dataclass(frozen=True)
class DocsIntegralSpec:
    """Reduced integral for the DOCS reactor mean:
    E[X] = prefactor * int_0^1 exp(-decay*(1-t)) * t^(exponent-1) dt."""
    prefactor: float
    decay: float
    exponent: float

    def __post_init__(self):
        if self.exponent <= 0 or self.decay < 0 or self.prefactor < 0:
            raise ValidationError(f"invalid integral spec: {self}")


@dataclass(frozen=True)
class ThresholdResult:
    eta_c: float
    kind: str  # air | docs | sis_lower_bound | sis_upper_bound
    inputs: ModelParams | None = None


@lru_cache(maxsize=8)
def _gl_nodes(order: int):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    return nodes, weights


def adaptive_gauss_legendre(f, a: float, b: float, tol: float = 1e-10,
                            order: int = 16, max_intervals: int = 100_000):
    """Adaptive-bisection Gauss-Legendre quadrature to absolute tolerance.

    Compares the fixed-order rule on an interval against the two-half
    refinement; accepts when the difference is within the interval's share of
    the tolerance. Raises NumericalError (carrying the achieved bound) if the
    subdivision budget is exhausted.
    """
    nodes, weights = _gl_nodes(order)

    def gl(lo, hi):
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        return half * float(np.dot(weights, f(mid + half * nodes)))

    total = 0.0
    err_bound = 0.0
    stack = [(a, b, gl(a, b), tol)]
    used = 1
    while stack:
        lo, hi, coarse, budget = stack.pop()
        mid = 0.5 * (lo + hi)
        left, right = gl(lo, mid), gl(mid, hi)
        fine = left + right
        err = abs(fine - coarse)
        if err <= budget or (hi - lo) < 1e-15:
            total += fine
            err_bound += err
            continue
        used += 2
        if used > max_intervals:
            raise NumericalError(
                f"quadrature budget exhausted; achieved bound {err_bound + err:.3e}")
        stack.append((lo, mid, left, budget / 2))
        stack.append((mid, hi, right, budget / 2))
    return total, err_bound


def docs_integral_spec(params: ModelParams) -> DocsIntegralSpec:
    lam, p, q, mu, alpha, nu = (params.lam, params.p, params.q, params.mu,
                                params.alpha, params.nu)
    na = nu + alpha
    return DocsIntegralSpec(
        prefactor=lam * q / na,
        decay=lam * p * alpha**2 / (nu * na**2),
        exponent=mu / na + lam * p * alpha / na**2,
    )


def _singular_integral(decay: float, c: float, tol: float = 1e-10) -> float:
    """int_0^1 exp(-decay*(1-t)) t^(c-1) dt for c > 0, decay >= 0.

    The substitution t = s^(1/c) removes the endpoint singularity: the
    integral becomes (1/c) int_0^1 exp(-decay*(1 - s^(1/c))) ds with a
    bounded integrand, then fixed-order Gauss-Legendre with adaptive
    bisection finishes the job.
    """
    inv_c = 1.0 / c

    def integrand(s):
        s = np.asarray(s)
        return np.exp(-decay * (1.0 - np.power(s, inv_c)))

    value, _ = adaptive_gauss_legendre(integrand, 0.0, 1.0, tol=tol * c)
    return value * inv_c


def docs_mean_x(params: ModelParams, tol: float = 1e-10) -> float:
    """Stationary mean susceptible count of the (general-nu) DOCS reactor."""
    spec = docs_integral_spec(params)
    if spec.prefactor == 0.0:
        return 0.0
    return spec.prefactor * _singular_integral(
        spec.decay, spec.exponent, tol=tol / max(spec.prefactor, 1.0))


def air_threshold(alpha: float, beta: float) -> float:
    """Critical density of the AIR thermodynamic limit: beta/alpha."""
    if alpha <= 0 or beta <= 0:
        raise ValidationError("alpha and beta must be > 0")
    return beta / alpha


@dataclass(frozen=True)
class AirTlStationary:
    mean_x: float
    mean_y: float
    p_star: float
    survival: bool


def air_tl_stationary(params: ModelParams) -> AirTlStationary:
    """Stationary means of the AIR thermodynamic limit.

    Supercritical (eta > beta/alpha): E[X] = beta/alpha, E[Y] = eta -
    beta/alpha, q* = beta/(eta*alpha). At or below the threshold the infected
    population is extinct (boundary inclusive)."""
    eta, alpha, beta = params.eta, params.alpha, params.beta
    crit = beta / alpha
    if eta > crit:
        q_star = crit / eta
        return AirTlStationary(mean_x=crit, mean_y=eta - crit,
                               p_star=1.0 - q_star, survival=True)
    return AirTlStationary(mean_x=min(eta, crit), mean_y=0.0, p_star=0.0,
                           survival=False)


@dataclass(frozen=True)
class AirTraffic:
    lambda1: float
    lambda2: float
    mean_station1: float
    mean_station2: float


def air_traffic(params: ModelParams, y: float) -> AirTraffic:
    """Traffic equations of the two-station AIR network with fixed rate
    parameter y; station means are arrival rate over per-customer total rate."""
    if y < 0:
        raise ValidationError(f"y must be >= 0, got {y}")
    lam, mu, alpha, beta, q, p = (params.lam, params.mu, params.alpha,
                                  params.beta, params.q, params.p)
    ay = alpha * y
    denom = (mu + beta) * (mu + ay) - beta * ay  # == mu*(mu + beta + ay) > 0
    lambda1 = (mu + ay) * (beta + mu * q) * lam / denom
    lambda2 = lam * p + lambda1 * ay / (mu + ay)
    return AirTraffic(lambda1=lambda1, lambda2=lambda2,
                      mean_station1=lambda1 / (mu + ay),
                      mean_station2=lambda2 / (mu + beta))


def air_amf_means(params: ModelParams) -> tuple[float, float]:
    """Stationary means (E[X], E[Y]) of the averaging mean-field reactor.

    The self-consistent y solves a quadratic; the smaller root is the
    physical one and the two means sum to lam/mu by construction."""
    lam, mu, alpha, beta, q = (params.lam, params.mu, params.alpha,
                               params.beta, params.q)
    eta = lam / mu
    s = mu + beta + alpha * eta
    disc = s * s - 4.0 * alpha * lam * (q + beta / mu)
    assert disc >= 0.0, "discriminant must be non-negative for valid params"
    mean_x = (s - math.sqrt(disc)) / (2.0 * alpha)
    return mean_x, eta - mean_x


def docs_tl_threshold(mu: float, alpha: float, beta: float) -> float:
    """Critical density of the DOCS thermodynamic limit:
    (beta/alpha) * (1 + alpha/(2*mu + beta))."""
    for name, v in (("mu", mu), ("alpha", alpha), ("beta", beta)):
        if v <= 0:
            raise ValidationError(f"{name} must be > 0")
    return (beta / alpha) * (1.0 + alpha / (2.0 * mu + beta))


def docs_tl_rhs(p: float, params: ModelParams, tol: float = 1e-10) -> float:
    """RHS of the DOCS thermodynamic-limit fixed-point relation q = RHS(p)."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p out of range [0, 1]: {p}")
    mu, alpha, beta, eta = params.mu, params.alpha, params.beta, params.eta
    s = mu + beta + alpha
    prefactor = ((1.0 - p) * mu + p * beta) / s
    decay = eta * p * alpha**2 / s**2
    c = mu / s + eta * p * (mu + beta) * alpha / s**2
    return prefactor * _singular_integral(decay, c, tol=tol / max(prefactor, 1.0))


def docs_tl_rhs_slope0(params: ModelParams) -> float:
    """Closed-form derivative of the fixed-point RHS at p = 0."""
    mu, alpha, beta, eta = params.mu, params.alpha, params.beta, params.eta
    return (beta / mu - 1.0
            - eta * (alpha / mu) / (1.0 + alpha / (2.0 * mu + beta)))


def docs_tl_fixed_point(params: ModelParams, tol: float = 1e-9,
                        quad_tol: float = 1e-10) -> float:
    """Nonzero root p* of the DOCS TL fixed point, or 0 when subcritical.

    Bisection on f(p) = p - (1 - RHS(p)); uniqueness of the positive root is
    only guaranteed for beta <= mu, otherwise all sign-change intervals are
    scanned and the largest root returned with a warning."""
    eta_c = docs_tl_threshold(params.mu, params.alpha, params.beta)
    if params.eta <= eta_c:
        return 0.0

    def f(p):
        return p - (1.0 - docs_tl_rhs(p, params, tol=quad_tol))

    eps = 1e-8
    lo, hi = eps, 1.0 - eps
    if params.beta <= params.mu:
        if not (f(lo) < 0.0 < f(hi)):
            raise NumericalError(
                "no sign change in supercritical regime: quadrature or bracket bug")
        brackets = [(lo, hi)]
    else:
        grid = np.linspace(lo, hi, 65)
        vals = [f(g) for g in grid]
        brackets = [(grid[i], grid[i + 1]) for i in range(len(grid) - 1)
                    if vals[i] < 0.0 <= vals[i + 1]]
        if not brackets:
            raise NumericalError(
                "no sign change in supercritical regime: quadrature or bracket bug")
        if len(brackets) > 1:
            warnings.warn("multiple sign changes for beta > mu; returning the "
                          "largest root (uniqueness unproved in this regime)")
        brackets = [brackets[-1]]

    lo, hi = brackets[0]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(f(root)) >= 1e-6:
        raise NumericalError(f"fixed-point residual {f(root):.3e} too large")
    return root


def sis_threshold_bounds(mu: float, alpha: float, beta: float) -> tuple[float, float]:
    """Rigorous lower and upper bounds on the SIS TL critical density.

    lower = beta/(2*mu + 5*beta); upper = (1/kappa) * beta/(mu+beta) with
    kappa = 2*alpha*mu / (2*(mu+beta)*(alpha+2*mu+beta) - alpha*beta)."""
    for name, v in (("mu", mu), ("alpha", alpha), ("beta", beta)):
        if v <= 0:
            raise ValidationError(f"{name} must be > 0")
    lower = beta / (2.0 * mu + 5.0 * beta)
    kappa = 2.0 * alpha * mu / (2.0 * (mu + beta) * (alpha + 2.0 * mu + beta)
                                - alpha * beta)
    upper = (1.0 / kappa) * beta / (mu + beta)
    return lower, upper


@dataclass(frozen=True)
class BranchingQuantities:
    n_fast_motion: float    # eta*alpha/beta, branching number in the fast-motion limit
    m_fast_epidemic: float  # eta*alpha/(alpha+beta), fast-epidemic limit
    n_supercritical: bool
    m_supercritical: bool


def branching_quantities(params: ModelParams) -> BranchingQuantities:
    eta, alpha, beta = params.eta, params.alpha, params.beta
    n = eta * alpha / beta
    m = eta * alpha / (alpha + beta)
    return BranchingQuantities(n_fast_motion=n, m_fast_epidemic=m,
                               n_supercritical=n > 1.0, m_supercritical=m > 1.0)


def p_star_upper_bound(params: ModelParams) -> float:
    """Unconditional upper bound on the SIS TL fixed point p*."""
    eta, alpha, beta = params.eta, params.alpha, params.beta
    d = eta - beta / alpha
    bound = (d + math.sqrt(d * d + 2.0 * eta)) / (2.0 * eta)
    return min(max(bound, 0.0), 1.0)
