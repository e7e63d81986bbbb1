"""Audit suite: rate-conservation identities, Poisson-marginal facts, and
negative-correlation probes, evaluated against simulation with CI pass/fail.

Each identity is the stationary expectation of the generator applied to a
polynomial of the state, so it holds exactly in stationarity; on a finite run
it is checked as |residual| < sigma * SE with batch-means standard errors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .analytic import docs_mean_x
from .core import Estimate, ModelParams, RngSeed
from .reactor import (MomentAverages, PalmEstimates, ReactorKind, Variant,
                      palm_estimates, simulate_reactor)

MIN_EVENTS = 100_000


@dataclass
class IdentityCheck:
    name: str
    lhs: Estimate
    rhs: Estimate
    residual: Estimate
    sigma: float = 3.0
    low_confidence: bool = False

    @property
    def passed(self) -> bool:
        if self.residual.std_error == 0.0:
            return abs(self.residual.value) < 1e-12
        return abs(self.residual.value) < self.sigma * self.residual.std_error

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs.value,
                "rhs": self.rhs.value, "residual": self.residual.value,
                "se": self.residual.std_error, "pass": self.passed}


def _check_from_batches(name: str, moments: MomentAverages, lhs_fn, rhs_fn,
                        sigma: float = 3.0,
                        ci_level: float = 0.95) -> IdentityCheck:
    """Per-batch lhs/rhs/difference so the residual SE respects correlation."""
    lhs = moments.combined(lhs_fn, ci_level)
    rhs = moments.combined(rhs_fn, ci_level)
    res = moments.combined(lambda m: lhs_fn(m) - rhs_fn(m), ci_level)
    return IdentityCheck(name, lhs, rhs, res, sigma)


def _check_from_estimates(name: str, lhs: Estimate, rhs: Estimate,
                          sigma: float = 3.0) -> IdentityCheck:
    res = Estimate(lhs.value - rhs.value,
                   math.hypot(lhs.std_error, rhs.std_error),
                   min(lhs.n, rhs.n), lhs.ci_level,
                   defined=lhs.defined and rhs.defined)
    return IdentityCheck(name, lhs, rhs, res, sigma)


def sis_generator_apply(params: ModelParams, f) -> callable:
    """Pointwise generator of the open SIS reactor applied to f(x, y)."""
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    p, q = params.p, params.q

    def af(x: int, y: int) -> float:
        v = f(x, y)
        return (lam * p * (f(x, y + 1) - v)
                + lam * q * (f(x + 1, y) - v)
                + mu * x * (f(x - 1, y) - v)
                + mu * y * (f(x, y - 1) - v)
                + beta * y * (f(x + 1, y - 1) - v)
                + alpha * x * y * (f(x - 1, y + 1) - v))
    return af


def sis_identities(params: ModelParams):
    """The SIS audit list as (name, lhs_fn, rhs_fn) over moment dicts.

    Keys of the moment dict are the time-average names from MOMENT_POWERS
    plus rcp_m_n entries added by audit_sis.
    """
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    p, q = params.p, params.q
    eta = params.eta
    checks = [
        ("first_order_y",
         lambda m: lam * p + alpha * m["xy"],
         lambda m: (mu + beta) * m["y"]),
        ("second_order_y",
         lambda m: (lam * p + mu + beta) * m["y"] + alpha * m["xy2"],
         lambda m: (mu + beta) * m["y2"]),
        ("second_order_x",
         lambda m: (lam * q + mu) * m["x"] + (alpha + beta) * m["xy"],
         lambda m: alpha * m["x2y"] + mu * m["x2"]),
        ("total_mean",
         lambda m: m["x"] + m["y"],
         lambda m: eta),
        ("cross_moment_x",
         lambda m: lam * (q + beta / mu) * (1 + beta / alpha)
                   + (lam * q - (beta / alpha) * (mu + alpha + beta)) * m["x"]
                   - mu * m["x2"],
         lambda m: alpha * m["x2y"]),
        ("cross_moment_y",
         lambda m: (lam / mu) * (lam * p + ((mu + beta) / (mu * alpha))
                                 * (2 * mu * (mu * q + beta) - lam * alpha))
                   - (lam * p + mu + beta + (2 / alpha) * (mu + beta) ** 2) * m["x"]
                   + (mu + beta) * m["x2"],
         lambda m: -alpha * m["xy2"]),
    ]
    return checks


RCP_ORDERS = ((1, 1), (2, 1), (1, 2))


def audit_sis(params: ModelParams, horizon: float, seed: RngSeed,
              sigma: float = 3.0, ci_level: float = 0.95,
              n_batches: int = 32) -> list[IdentityCheck]:
    """Stationary SIS audit: first- and second-order conservation, the
    higher-order relations for x^m y^n, total-population Poisson facts, and
    the two derived cross-moment identities."""
    extra = {}
    for m_pow, n_pow in RCP_ORDERS:
        f = lambda x, y, i=m_pow, j=n_pow: (x ** i) * (y ** j)
        extra[f"rcp_{m_pow}_{n_pow}"] = sis_generator_apply(params, f)
    run = simulate_reactor(ReactorKind(Variant.SIS), params, horizon, seed,
                           n_batches=n_batches, extra_moments=extra)
    low = run.events < MIN_EVENTS
    moments = run.moments
    checks = []
    for name, lhs_fn, rhs_fn in sis_identities(params):
        checks.append(_check_from_batches(name, moments, lhs_fn, rhs_fn,
                                          sigma, ci_level))
    for m_pow, n_pow in RCP_ORDERS:
        key = f"rcp_{m_pow}_{n_pow}"
        checks.append(_check_from_batches(
            f"conservation_x{m_pow}y{n_pow}", moments,
            lambda m, k=key: m[k], lambda m: 0.0, sigma, ci_level))
    # Total population is Poisson(eta): variance equals the mean. Center on
    # the run-level mean so per-batch values estimate the same quantity.
    mean_tot = moments.mean("x") + moments.mean("y")
    checks.append(_check_from_batches(
        "total_variance", moments,
        lambda m: (m["x2"] + 2 * m["xy"] + m["y2"]
                   - 2 * mean_tot * (m["x"] + m["y"]) + mean_tot ** 2),
        lambda m: params.eta, sigma, ci_level))
    for c in checks:
        c.low_confidence = low
    return checks


def audit_docs(params: ModelParams, horizon: float, seed: RngSeed,
               sigma: float = 3.0, ci_level: float = 0.95,
               n_batches: int = 32) -> list[IdentityCheck]:
    """DOCS audit: both conservation equations, the Poisson law of Y, and the
    quadrature value of E[X]."""
    run = simulate_reactor(ReactorKind(Variant.DOCS), params, horizon, seed,
                           n_batches=n_batches)
    low = run.events < MIN_EVENTS
    moments = run.moments
    lam, mu, alpha, nu = params.lam, params.mu, params.alpha, params.nu
    p, q = params.p, params.q
    checks = [
        _check_from_batches("infected_flow", moments,
                            lambda m: lam * p,
                            lambda m: nu * m["y"], sigma, ci_level),
        _check_from_batches("susceptible_flow", moments,
                            lambda m: lam * q,
                            lambda m: mu * m["x"] + alpha * m["xy"],
                            sigma, ci_level),
    ]
    mean_y = moments.mean("y")
    checks.append(_check_from_batches(
        "y_poisson_variance", moments,
        lambda m: m["y2"] - 2 * mean_y * m["y"] + mean_y ** 2,
        lambda m: m["y"], sigma, ci_level))
    checks.append(_check_from_estimates(
        "mean_x_quadrature", moments.estimate("x", ci_level),
        Estimate(docs_mean_x(params), 0.0, 1, ci_level), sigma))
    for c in checks:
        c.low_confidence = low
    return checks


def audit_routing_docs(moments: MomentAverages, params: ModelParams,
                       sigma: float = 3.0,
                       ci_level: float = 0.95) -> list[IdentityCheck]:
    """Routing mean-field audit on ensemble moments: the two first-order
    balance equations, total-mean conservation, and the three second-order
    relations (products of means appear because the mean-field arrival
    intensities are deterministic functionals of the ensemble law)."""
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    p, q = params.p, params.q
    specs = [
        ("balance_x",
         lambda m: lam * q + beta * m["y"],
         lambda m: mu * m["x"] + alpha * m["xy"]),
        ("balance_y",
         lambda m: lam * p + alpha * m["xy"],
         lambda m: (beta + mu) * m["y"]),
        ("total_mean",
         lambda m: m["x"] + m["y"],
         lambda m: lam / mu),
        ("second_order_y",
         lambda m: (lam * p + mu + beta) * m["y"] + alpha * m["xy"] * m["y"],
         lambda m: (beta + mu) * m["y2"]),
        ("second_order_x",
         lambda m: (lam * q + mu) * m["x"] + beta * m["y"] * m["x"]
                   + alpha * m["xy"],
         lambda m: alpha * m["x2y"] + mu * m["x2"]),
        ("second_order_xy",
         lambda m: (lam * q + beta * m["y"]) * m["y"]
                   + (lam * p + alpha * m["xy"]) * m["x"],
         lambda m: (beta + 2 * mu) * m["xy"] + alpha * m["xy2"]),
    ]
    return [_check_from_batches(name, moments, lhs, rhs, sigma, ci_level)
            for name, lhs, rhs in specs]


def audit_tl(moments: MomentAverages, params: ModelParams, p_star: float,
             palm: PalmEstimates | None = None, sigma: float = 3.0,
             ci_level: float = 0.95) -> list[IdentityCheck]:
    """Thermodynamic-limit audit on a stationary SIS run at the fixed point.

    `moments` must come from the open SIS reactor with infected input
    fraction p_star (the mean-field consistent object). Palm-form balance
    identities are included when event averages are supplied."""
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    eta = params.eta
    checks = [
        _check_from_batches("infection_recovery_balance", moments,
                            lambda m: alpha * m["xy"],
                            lambda m: beta * m["y"], sigma, ci_level),
        _check_from_batches("fixed_point_flow", moments,
                            lambda m: lam * p_star,
                            lambda m: mu * m["y"], sigma, ci_level),
        _check_from_batches("second_order_y", moments,
                            lambda m: (lam * p_star + mu + beta) * m["y"]
                                      + alpha * m["xy2"],
                            lambda m: (mu + beta) * m["y2"], sigma, ci_level),
    ]
    if palm is not None:
        q_star = 1.0 - p_star
        lhs_y = Estimate(
            beta * (palm.e_I_Y_minus.value - palm.e_R_Y_plus.value),
            beta * math.hypot(palm.e_I_Y_minus.std_error,
                              palm.e_R_Y_plus.std_error),
            palm.n_infections, ci_level,
            defined=palm.e_I_Y_minus.defined and palm.e_R_Y_plus.defined)
        rhs_y = Estimate(mu * palm.e_D_I_Y_plus.value - eta * mu * p_star,
                         mu * palm.e_D_I_Y_plus.std_error,
                         palm.e_D_I_Y_plus.n, ci_level,
                         defined=palm.e_D_I_Y_plus.defined)
        checks.append(_check_from_estimates("palm_balance_y", lhs_y, rhs_y,
                                            sigma))
        if p_star > 0:
            ratio = q_star / p_star
            lhs_x = Estimate(
                beta * (palm.e_R_X_minus.value - palm.e_I_X_plus.value),
                beta * math.hypot(palm.e_R_X_minus.std_error,
                                  palm.e_I_X_plus.std_error),
                palm.n_recoveries, ci_level,
                defined=palm.e_R_X_minus.defined and palm.e_I_X_plus.defined)
            rhs_x = Estimate(
                mu * ratio * palm.e_D_S_X_plus.value
                - eta * mu * q_star * ratio,
                mu * ratio * palm.e_D_S_X_plus.std_error,
                palm.e_D_S_X_plus.n, ci_level,
                defined=palm.e_D_S_X_plus.defined)
            checks.append(_check_from_estimates("palm_balance_x", lhs_x,
                                                rhs_x, sigma))
    return checks


@dataclass
class CorrelationProbe:
    cov_xy: Estimate
    x_overdispersion: Estimate  # E[X^2] - E[X]^2 - E[X]
    y_overdispersion: Estimate
    palm: PalmEstimates
    x_more_variant: str  # yes / no / indeterminate, from the Palm form
    y_more_variant: str
    negatively_correlated: str
    mean_x_bracket: tuple[float, float] | None  # conjecture bracket on E[X]
    bracket_satisfied: bool | None
    survival_contradiction: bool  # survival observed with beta/alpha >= eta
    notes: list[str]


def _verdict(estimate: Estimate, threshold: float, sigma: float) -> str:
    if not estimate.defined:
        return "indeterminate"
    gap = estimate.value - threshold
    if abs(gap) <= sigma * estimate.std_error:
        return "indeterminate"
    return "yes" if gap > 0 else "no"


def correlation_probe(params: ModelParams, horizon: float, seed: RngSeed,
                      sigma: float = 3.0, ci_level: float = 0.95,
                      tl_mode: bool = False,
                      survival: bool | None = None) -> CorrelationProbe:
    """Measure (never assert) the negative-correlation picture.

    Reports Cov(X, Y), both overdispersions, the Palm-form equivalences for
    the more-variant-than-Poisson conditions, and, when the covariance CI
    excludes 0 from below, the conjectural bracket on E[X]. In TL mode with a
    survival verdict, checks the necessary condition beta/alpha < eta."""
    run = simulate_reactor(ReactorKind(Variant.SIS), params, horizon, seed)
    moments = run.moments
    palm = palm_estimates(params, horizon, seed.child(1))
    mean_x = moments.mean("x")
    mean_y = moments.mean("y")
    cov = moments.combined(
        lambda m: m["xy"] - mean_x * m["y"] - mean_y * m["x"]
                  + mean_x * mean_y, ci_level)
    over_x = moments.combined(
        lambda m: m["x2"] - 2 * mean_x * m["x"] + mean_x ** 2 - m["x"],
        ci_level)
    over_y = moments.combined(
        lambda m: m["y2"] - 2 * mean_y * m["y"] + mean_y ** 2 - m["y"],
        ci_level)

    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    p, q = params.p, params.q
    notes = []
    # Palm forms of the overdispersion conditions: a_r E_R[X-] - a_i E_I[X+]
    # >= E[X](mu E[X] - lam q) iff X is more variant than Poisson, and the
    # y / joint analogues.
    def palm_gap(parts) -> Estimate:
        value = 0.0
        var = 0.0
        defined = True
        for coeff, est in parts:
            value += coeff * est.value if est.defined else 0.0
            var += (coeff * est.std_error) ** 2 if est.defined else math.inf
            defined = defined and est.defined
        return Estimate(value, math.sqrt(var), palm.n_infections, ci_level,
                        defined=defined)

    a_r, a_i = palm.a_r, palm.a_i
    gap_x = palm_gap([(a_r.value, palm.e_R_X_minus),
                      (-a_i.value, palm.e_I_X_plus)])
    thr_x = mean_x * (mu * mean_x - lam * q)
    gap_y = palm_gap([(a_i.value, palm.e_I_Y_minus),
                      (-a_r.value, palm.e_R_Y_plus)])
    thr_y = mean_y * (mu * mean_y - lam * p)
    gap_joint = palm_gap([(a_r.value, palm.e_R_X_minus),
                          (a_i.value, palm.e_I_Y_minus),
                          (-a_r.value, palm.e_R_Y_plus),
                          (-a_i.value, palm.e_I_X_plus)])
    x_verdict = _verdict(gap_x, thr_x, sigma)
    y_verdict = _verdict(gap_y, thr_y, sigma)
    neg_verdict = _verdict(gap_joint, thr_x + thr_y, sigma)
    # Direct covariance verdict cross-checks the Palm one.
    direct = _verdict(Estimate(-cov.value, cov.std_error, cov.n, ci_level),
                      0.0, sigma)
    if direct != "indeterminate" and neg_verdict != "indeterminate" \
            and direct != neg_verdict:
        notes.append("Palm-form and direct covariance verdicts disagree; "
                     "treat as indeterminate")
        neg_verdict = "indeterminate"

    bracket = None
    bracket_ok = None
    if neg_verdict == "yes":
        s = mu + beta + alpha * lam / mu
        disc = s * s - 4 * alpha * lam * (q + beta / mu)
        if disc >= 0:
            low = (s - math.sqrt(disc)) / (2 * alpha)
            bracket = (low, lam / mu)
            slack = sigma * moments.estimate("x", ci_level).std_error
            bracket_ok = (low - slack <= mean_x <= lam / mu + slack)
    contradiction = False
    if tl_mode and survival is not None:
        if survival and beta / alpha >= params.eta and neg_verdict == "yes":
            contradiction = True
            notes.append("survival observed with beta/alpha >= eta while the "
                         "covariance reads negative; contradicts the "
                         "conditional extinction statement")
    return CorrelationProbe(cov_xy=cov, x_overdispersion=over_x,
                            y_overdispersion=over_y, palm=palm,
                            x_more_variant=x_verdict,
                            y_more_variant=y_verdict,
                            negatively_correlated=neg_verdict,
                            mean_x_bracket=bracket,
                            bracket_satisfied=bracket_ok,
                            survival_contradiction=contradiction,
                            notes=notes)


def report_json(checks: list[IdentityCheck]) -> str:
    """Audit report as a JSON array of {name, lhs, rhs, residual, se, pass}."""
    return json.dumps([c.to_dict() for c in checks], indent=2)
