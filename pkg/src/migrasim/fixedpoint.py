"""Monte-Carlo machinery for the SIS thermodynamic limit: the output-fraction
map g(p, eta), its derivative at 0, the fixed point p*, and the survival
threshold by stochastic bisection."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .analytic import sis_threshold_bounds
from .core import (Estimate, ModelParams, NumericalError, RngSeed,
                   UniformBuffer, ValidationError, ratio_estimate, z_quantile)
from .reactor import ReactorKind, Variant, run_busy_cycles


@dataclass(frozen=True)
class GEstimate:
    p_in: float
    p_out: Estimate
    time_average: Estimate  # independent estimator mu*E[Y]/lam
    n_cycles: int
    params: ModelParams


def _g_kind(variant: Variant, params: ModelParams, p: float) -> ReactorKind:
    if variant is Variant.SIS:
        return ReactorKind(Variant.SIS)
    if variant is Variant.AIR:
        # Environment infected mean proportional to the infected input
        # fraction under the mean-field consistency y = eta * p.
        return ReactorKind(Variant.AIR, y_param=params.eta * p)
    raise ValidationError(f"g-map is defined for SIS and AIR, not {variant}")


def estimate_g(p: float, params: ModelParams, n_cycles: int, seed: RngSeed,
               ci_level: float = 0.95,
               variant: Variant = Variant.SIS) -> GEstimate:
    """Regenerative estimate of the infected output fraction g(p, eta).

    The cycle-ratio estimator E[D_I]/E[D] is returned together with the
    independent time-average estimator mu*E[Y]/lam for cross-validation."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p out of range [0, 1]: {p}")
    if n_cycles < 100:
        raise ValidationError(f"n_cycles must be >= 100, got {n_cycles}")
    run_params = params.replace(p=p)
    if p == 0.0 and variant is Variant.SIS:
        # No infection source: g(0) = 0 exactly, no simulation needed.
        return GEstimate(p_in=0.0,
                         p_out=Estimate(0.0, 0.0, n_cycles, ci_level),
                         time_average=Estimate(0.0, 0.0, n_cycles, ci_level),
                         n_cycles=n_cycles, params=run_params)
    cycles, y_bar = run_busy_cycles(_g_kind(variant, params, p), run_params,
                                    n_cycles, seed, track_time_average=True)
    nums = [c.infected_departures for c in cycles]
    dens = [c.departures for c in cycles]
    ratio = ratio_estimate(nums, dens, ci_level)
    # mu*E[Y]/lam holds for both variants (infected depart at rate mu each);
    # estimated from the same run so the SE is borrowed from the ratio.
    ta = Estimate(params.mu * y_bar / params.lam,
                  ratio.std_error, n_cycles, ci_level)
    return GEstimate(p_in=p, p_out=ratio, time_average=ta,
                     n_cycles=n_cycles, params=run_params)


def _excursion(params: ModelParams, u: UniformBuffer,
               max_events: int = 10_000_000) -> int:
    """One excursion: inject a single infected customer into the stationary
    p=0 reactor and count infected departures until no infected remain."""
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    # PASTA: the state seen by the injected (Poisson) arrival is the
    # stationary law of the p=0 reactor, i.e. Poisson(eta) susceptible.
    # Inverse-CDF Poisson draw from the shared uniform stream.
    x = _poisson_draw(params.eta, u)
    y = 1
    infected_departures = 0
    events = 0
    while y > 0:
        r_arr = lam  # susceptible arrivals only (p = 0 input)
        r_dep_s = mu * x
        r_dep_i = mu * y
        r_rec = beta * y
        r_inf = alpha * x * y
        total = r_arr + r_dep_s + r_dep_i + r_rec + r_inf
        pick = u.next() * total
        if pick < r_arr:
            x += 1
        elif pick < r_arr + r_dep_s:
            x -= 1
        elif pick < r_arr + r_dep_s + r_dep_i:
            y -= 1
            infected_departures += 1
        elif pick < r_arr + r_dep_s + r_dep_i + r_rec:
            y -= 1
            x += 1
        else:
            x -= 1
            y += 1
        events += 1
        if events > max_events:
            raise NumericalError("excursion did not terminate within budget")
    return infected_departures


def _poisson_draw(mean: float, u: UniformBuffer) -> int:
    """Inverse-CDF Poisson sample from a shared uniform stream."""
    target = u.next()
    k = 0
    term = math.exp(-mean)
    cdf = term
    while cdf < target:
        k += 1
        term *= mean / k
        cdf += term
        if k > 10_000:
            break
    return k


def estimate_g_prime0(params: ModelParams, method: str = "excursion",
                      budget: int = 10_000, seed: RngSeed | None = None,
                      ci_level: float = 0.95,
                      check_consistency: bool = False) -> Estimate:
    """Estimate the right derivative of g at p = 0.

    excursion: average infected-departure count over single-infected
    excursions started at stationary epochs of the p=0 reactor.
    finite_difference: Richardson-extrapolated (g(eps) - 0)/eps at eps and
    eps/2 with common random numbers.
    """
    if budget < 10_000:
        raise ValidationError(f"budget must be >= 10^4, got {budget}")
    if seed is None:
        seed = RngSeed(0)
    if method == "excursion":
        est = _g_prime0_excursion(params, budget, seed, ci_level)
    elif method == "finite_difference":
        est = _g_prime0_fd(params, budget, seed, ci_level)
    else:
        raise ValidationError(f"unknown method: {method}")
    if check_consistency:
        other = (_g_prime0_fd if method == "excursion" else _g_prime0_excursion)(
            params, budget, seed.child(1_000_003), ci_level)
        gap = abs(est.value - other.value)
        joint = 3.0 * math.hypot(est.std_error, other.std_error)
        if gap > joint:
            raise NumericalError(
                f"g'(0) estimators disagree: {est.value:.4f} vs "
                f"{other.value:.4f} (> 3 SE = {joint:.4f})")
    return est


def _g_prime0_excursion(params: ModelParams, budget: int, seed: RngSeed,
                        ci_level: float) -> Estimate:
    u = UniformBuffer(seed.generator())
    total = 0.0
    total_sq = 0.0
    for _ in range(budget):
        d = _excursion(params, u)
        total += d
        total_sq += d * d
    mean = total / budget
    var = max(total_sq / budget - mean * mean, 0.0) * budget / (budget - 1)
    return Estimate(mean, math.sqrt(var / budget), budget, ci_level)


def _g_prime0_fd(params: ModelParams, budget: int, seed: RngSeed,
                 ci_level: float) -> Estimate:
    # eps small enough that the O(eps) concavity bias is mild; Richardson
    # with eps/2 removes the first-order term.
    eps = min(0.05, 1.0 / (10.0 * params.eta))
    n_blocks = 20
    per_block = max(budget // n_blocks, 100)
    slopes = []
    for b in range(n_blocks):
        block_seed = seed.child(2 * b)
        g1 = estimate_g(eps, params, per_block, block_seed, ci_level)
        g2 = estimate_g(eps / 2, params, per_block, block_seed, ci_level)
        s1 = g1.p_out.value / eps
        s2 = g2.p_out.value / (eps / 2)
        slopes.append(2.0 * s2 - s1)
    return Estimate.from_samples(slopes, ci_level)


@dataclass
class PStarResult:
    estimate: Estimate
    iterations: int
    trajectory: list[tuple[float, float, float]]  # (p, g_hat, se)
    converged: bool
    message: str = ""


def _refine_fixed_point(p: float, g_hat: float, se: float,
                        params: ModelParams, n_cycles: int, seed: RngSeed,
                        ci_level: float, variant: Variant,
                        trajectory: list, iterations: int) -> "PStarResult":
    """Secant-Newton polish of an approximate fixed point of g.

    The slope is measured over a spread of at least 0.08 in p so its noise
    stays well below the contraction margin 1 - g'(p*)."""
    slope = 0.5
    for round_idx in range(3):
        delta = max(0.08, 2.0 * abs(p - g_hat))
        p_a = p - delta if p - delta >= 0.0 else min(p + delta, 1.0)
        g_a = estimate_g(p_a, params, n_cycles,
                         seed.child(7_000 + 2 * round_idx), ci_level,
                         variant=variant)
        slope = (g_hat - g_a.p_out.value) / (p - p_a)
        slope = min(max(slope, 0.0), 0.98)
        p_new = min(max(p + (g_hat - p) / (1.0 - slope), 0.0), 1.0)
        g_new = estimate_g(p_new, params, n_cycles,
                           seed.child(7_001 + 2 * round_idx), ci_level,
                           variant=variant)
        p, g_hat, se = p_new, g_new.p_out.value, g_new.p_out.std_error
        trajectory.append((p, g_hat, se))
        iterations += 1
        if abs(p - g_hat) <= 2.0 * se:
            break
    p_star = min(max(p + (g_hat - p) / (1.0 - slope), 0.0), 1.0)
    err = (math.hypot(se, abs(p - g_hat) * 0.25)) / (1.0 - slope)
    return PStarResult(Estimate(p_star, err, n_cycles, ci_level),
                       iterations, trajectory, True)


def find_p_star(params: ModelParams, tol: float = 0.01,
                seed: RngSeed | None = None, n_cycles: int = 20_000,
                max_iter: int = 60, ci_level: float = 0.95,
                variant: Variant = Variant.SIS,
                verdict_budget: int = 100_000) -> PStarResult:
    """Damped fixed-point iteration p <- g(p) from p = 1.

    By concavity and g(1) < 1 the noiseless sequence decreases to the largest
    fixed point; a damping factor 0.5 is applied when Monte-Carlo noise causes
    an overshoot. Returns 0 when the sequence enters [0, tol] (subcritical)."""
    if seed is None:
        seed = RngSeed(0)
    if variant is Variant.SIS:
        lower, _ = sis_threshold_bounds(params.mu, params.alpha, params.beta)
        if params.eta <= lower:
            return PStarResult(Estimate(0.0, 0.0, 0, ci_level), 0, [], True,
                               "below the rigorous lower threshold bound")
        verdict, _ = _gprime_verdict(params, params.eta, seed.child(999_331),
                                     verdict_budget, ci_level)
        if verdict == "below":
            return PStarResult(Estimate(0.0, 0.0, verdict_budget, ci_level),
                               0, [], True,
                               "slope at 0 below 1, only the 0 fixed point")
    p = 1.0
    trajectory = []
    descending = True
    for it in range(max_iter):
        g = estimate_g(p, params, n_cycles, seed.child(it), ci_level,
                       variant=variant)
        g_hat, se = g.p_out.value, g.p_out.std_error
        trajectory.append((p, g_hat, se))
        gap = p - g_hat
        if abs(gap) < max(tol, 3.0 * se):
            # A residual |p - g(p)| = tol maps to a fixed-point error of
            # tol / (1 - g'(p*)); finish with secant-Newton steps whose slope
            # comes from well-separated evaluation points, because the slope
            # between consecutive iterates drowns in Monte-Carlo noise.
            return _refine_fixed_point(p, g_hat, se, params, n_cycles,
                                       seed, ci_level, variant, trajectory,
                                       it + 1)
        if g_hat <= tol:
            return PStarResult(Estimate(0.0, 0.0, g.n_cycles, ci_level),
                               it + 1, trajectory, True, "subcritical")
        if gap < 0 and descending:
            # Noise-induced overshoot while descending: damp the step.
            p = min(p + 0.5 * (g_hat - p), 1.0)
            descending = False
        else:
            p = g_hat
            descending = gap > 0
    # Oscillation without contraction: indeterminate.
    last_p, last_g, last_se = trajectory[-1]
    return PStarResult(Estimate(0.5 * (last_p + last_g),
                                abs(last_p - last_g) / 2 + last_se,
                                n_cycles, ci_level),
                       max_iter, trajectory, False,
                       "iteration cap reached without contraction")


@dataclass
class ThresholdSearchResult:
    eta_c: Estimate
    bracket: tuple[float, float]
    iterations: int
    verdicts: list[tuple[float, str]]  # (eta, above|below|indeterminate)


def _gprime_verdict(params_no_eta: ModelParams, eta: float, seed: RngSeed,
                    budget: int, ci_level: float) -> tuple[str, Estimate]:
    """Sample g'(0, eta) in growing batches until the CI excludes 1."""
    params = params_no_eta.replace(lam=eta * params_no_eta.mu)
    batch = max(budget // 8, 10_000)
    spent = 0
    values: list[float] = []
    u = UniformBuffer(seed.generator())
    total = 0.0
    total_sq = 0.0
    n = 0
    while spent < budget:
        take = min(batch, budget - spent)
        for _ in range(take):
            d = _excursion(params, u)
            total += d
            total_sq += d * d
        n += take
        spent += take
        mean = total / n
        var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
        se = math.sqrt(var / n)
        est = Estimate(mean, se, n, ci_level)
        z = z_quantile(ci_level)
        if mean - z * se > 1.0:
            return "above", est
        if mean + z * se < 1.0:
            return "below", est
    return "indeterminate", est


def find_eta_c(params_no_eta: ModelParams, ci_level: float = 0.95,
               budget: int = 200_000, seed: RngSeed | None = None,
               precision: float | None = None,
               max_iter: int = 30) -> ThresholdSearchResult:
    """Stochastic bisection for the SIS TL critical density.

    The initial bracket comes from the rigorous bounds; at each eta the
    excursion estimator samples g'(0, eta) until its CI excludes 1 or the
    per-point budget is exhausted (indeterminate verdicts never narrow the
    bracket)."""
    if seed is None:
        seed = RngSeed(0)
    lo, hi = sis_threshold_bounds(params_no_eta.mu, params_no_eta.alpha,
                                  params_no_eta.beta)
    if precision is None:
        precision = 0.02 * (hi - lo)
    verdicts: list[tuple[float, str]] = []
    v_lo, _ = _gprime_verdict(params_no_eta, lo, seed.child(0), budget, ci_level)
    v_hi, _ = _gprime_verdict(params_no_eta, hi, seed.child(1), budget, ci_level)
    verdicts += [(lo, v_lo), (hi, v_hi)]
    if v_lo == "above" or v_hi == "below":
        raise NumericalError(
            f"bracket endpoints contradict the rigorous bounds: "
            f"g'(0) verdict at {lo:.4g} is {v_lo}, at {hi:.4g} is {v_hi}")
    iterations = 0
    while hi - lo > precision and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        verdict, _ = _gprime_verdict(params_no_eta, mid,
                                     seed.child(2 + iterations), budget,
                                     ci_level)
        verdicts.append((mid, verdict))
        iterations += 1
        if verdict == "above":
            hi = mid
        elif verdict == "below":
            lo = mid
        else:
            break  # cannot narrow past an indeterminate point
    half = (hi - lo) / 2.0
    est = Estimate(value=(lo + hi) / 2.0,
                   std_error=half / z_quantile(ci_level),
                   n=iterations + 2, ci_level=ci_level)
    return ThresholdSearchResult(eta_c=est, bracket=(lo, hi),
                                 iterations=iterations, verdicts=verdicts)
