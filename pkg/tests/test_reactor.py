import math

import pytest

from migrasim import analytic
from migrasim.core import RngSeed, ValidationError, derive_params
from migrasim.reactor import (ARRIVAL_I, ARRIVAL_S, DEPARTURE_I, DEPARTURE_S,
                              INFECTION, RECOVERY, ReactorKind, Variant,
                              palm_estimates, run_busy_cycles,
                              simulate_reactor)

SIGMA = 3.0


def params(lam=1.0, mu=1.0, alpha=1.0, beta=1.0, p=0.5):
    return derive_params(lam=lam, mu=mu, alpha=alpha, beta=beta, p=p)


def within(est, target, sigma=SIGMA):
    return abs(est.value - target) <= sigma * max(est.std_error, 1e-12)


def test_determinism_same_seed_same_path():
    pr = params(lam=2.0)
    kind = ReactorKind(Variant.SIS)
    a, loga = simulate_reactor(kind, pr, 500.0, RngSeed(3), record=True)
    b, logb = simulate_reactor(kind, pr, 500.0, RngSeed(3), record=True)
    assert loga == logb
    assert a.moments.batches == b.moments.batches
    c = simulate_reactor(kind, pr, 500.0, RngSeed(4))
    assert c.moments.batches != a.moments.batches


def test_event_log_transitions_are_consistent():
    pr = params(lam=2.0)
    _, log = simulate_reactor(ReactorKind(Variant.SIS), pr, 200.0, RngSeed(1),
                              record=True)
    assert len(log) > 100
    deltas = {
        ARRIVAL_S: (1, 0), ARRIVAL_I: (0, 1),
        DEPARTURE_S: (-1, 0), DEPARTURE_I: (0, -1),
        INFECTION: (-1, 1), RECOVERY: (1, -1),
    }
    last_t = 0.0
    prev = (0, 0)
    for t, kind, xb, yb, xa, ya in log:
        assert t >= last_t
        assert (xb, yb) == prev
        dx, dy = deltas[kind]
        assert (xa, ya) == (xb + dx, yb + dy)
        assert xa >= 0 and ya >= 0
        last_t, prev = t, (xa, ya)


def test_uninfected_reactor_is_poisson():
    # p = 0 and no infected input: the susceptible count is M/M/inf, so the
    # stationary law is Poisson(eta) and y stays at 0.
    pr = params(lam=3.0, p=0.0)
    run = simulate_reactor(ReactorKind(Variant.SIS), pr, 20_000.0, RngSeed(8))
    eta = pr.eta
    assert within(run.moments.estimate("x"), eta)
    assert within(run.moments.estimate("x2"), eta + eta * eta)
    assert run.moments.estimate("y").value == 0.0


def test_docs_infected_marginal_is_poisson():
    # DOCS infected count is M/M/inf with arrival lam*p and rate nu = mu+beta.
    pr = params(lam=2.0, p=0.6)
    run = simulate_reactor(ReactorKind(Variant.DOCS), pr, 20_000.0, RngSeed(9))
    rho = pr.lam * pr.p / pr.nu
    assert within(run.moments.estimate("y"), rho)
    assert within(run.moments.estimate("y2"), rho + rho * rho)
    assert within(run.moments.estimate("x"), analytic.docs_mean_x(pr))


def test_air_fixed_environment_is_product_form():
    # With a frozen environment the AIR reactor is a two-station Jackson
    # network of infinite-server queues: independent Poisson marginals.
    pr = params(lam=2.0, p=0.5)
    y0 = 1.0
    run = simulate_reactor(ReactorKind(Variant.AIR, y_param=y0), pr,
                           20_000.0, RngSeed(10))
    tr = analytic.air_traffic(pr, y0)
    assert within(run.moments.estimate("x"), tr.mean_station1)
    assert within(run.moments.estimate("y"), tr.mean_station2)
    prod = run.moments.combined(lambda m: m["xy"] - m["x"] * m["y"])
    assert within(prod, 0.0)


def test_busy_cycle_departure_count_matches_mminf_oracle():
    # p = 0 again: customers served per busy cycle of M/M/inf has mean
    # exp(eta), a classical identity, and every departure is susceptible.
    pr = params(lam=1.5, p=0.0)
    cycles = run_busy_cycles(ReactorKind(Variant.SIS), pr, 20_000, RngSeed(2))
    mean_dep = sum(c.departures for c in cycles) / len(cycles)
    se = (sum((c.departures - mean_dep) ** 2 for c in cycles)
          / (len(cycles) - 1) / len(cycles)) ** 0.5
    assert abs(mean_dep - math.exp(pr.eta)) <= SIGMA * se
    assert all(c.infected_departures == 0 for c in cycles)
    assert all(c.duration > 0 and c.departures >= 1 for c in cycles)


def test_busy_cycle_time_average_matches_long_run():
    pr = params(lam=2.0)
    cycles, y_bar = run_busy_cycles(ReactorKind(Variant.SIS), pr, 30_000,
                                    RngSeed(5), track_time_average=True)
    run = simulate_reactor(ReactorKind(Variant.SIS), pr, 30_000.0, RngSeed(6))
    est = run.moments.estimate("y")
    assert abs(y_bar - est.value) <= 4.0 * est.std_error
    # Renewal-reward: infected departures per unit time equal mu * E[Y].
    total_t = sum(c.duration for c in cycles) + len(cycles) / pr.lam
    rate = sum(c.infected_departures for c in cycles) / total_t
    assert abs(rate - pr.mu * est.value) <= 5.0 * pr.mu * est.std_error


def test_extra_moments_are_time_averaged():
    pr = params(lam=2.0)
    run = simulate_reactor(ReactorKind(Variant.SIS), pr, 2_000.0, RngSeed(7),
                           extra_moments={"total": lambda x, y: x + y})
    tot = run.moments.estimate("total")
    split = run.moments.combined(lambda m: m["x"] + m["y"])
    assert tot.value == pytest.approx(split.value, rel=1e-12)


def test_palm_estimates_supercritical():
    pr = params(lam=2.0)
    palm = palm_estimates(pr, 20_000.0, RngSeed(12))
    assert palm.n_infections > 1000 and palm.n_recoveries > 1000
    assert palm.a_i.value > 0 and palm.a_r.value > 0
    # Infections need an infected neighbour present beforehand.
    assert palm.e_I_Y_minus.value >= 1.0
    # Post-jump infected count is pre-jump plus exactly one.
    gap = palm.e_I_Y_plus.value - palm.e_I_Y_minus.value
    assert gap == pytest.approx(1.0, abs=1e-9)


def test_validation_errors():
    pr = params()
    with pytest.raises(ValidationError):
        simulate_reactor(ReactorKind(Variant.SIS), pr, 0.0, RngSeed(0))
    with pytest.raises(ValidationError):
        run_busy_cycles(ReactorKind(Variant.SIS), pr, 0, RngSeed(0))
    with pytest.raises(ValidationError):
        ReactorKind(Variant.AIR, y_param=-1.0)
