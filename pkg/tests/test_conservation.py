import json

import numpy as np
import pytest

from migrasim import analytic
from migrasim.conservation import (IdentityCheck, audit_docs,
                                   audit_routing_docs, audit_sis, audit_tl,
                                   correlation_probe, report_json,
                                   sis_generator_apply, sis_identities)
from migrasim.core import Estimate, RngSeed, derive_params
from migrasim.network import simulate_routing_docs_meanfield
from migrasim.reactor import ReactorKind, Variant, simulate_reactor

from _oracles import (moment_dict, total_count_marginal, truncated_poisson_pmf,
                      truncated_sis_generator, truncated_sis_stationary,
                      expectation)


def params(lam=1.0, mu=1.0, alpha=1.0, beta=1.0, p=0.5):
    return derive_params(lam=lam, mu=mu, alpha=alpha, beta=beta, p=p)


def test_truncated_chain_total_count_is_truncated_poisson():
    # Infections, recoveries, and type-blind services preserve the total
    # count, so the total marginal of the blocked chain is exactly the
    # truncated Poisson law whatever (alpha, beta, p) are.
    for cap, pr in ((6, params(lam=2.0, alpha=3.0, beta=0.7, p=0.3)),
                    (10, params(lam=0.8))):
        pi, states = truncated_sis_stationary(pr, cap)
        marginal = total_count_marginal(pi, states, cap)
        want = truncated_poisson_pmf(pr.eta, cap)
        assert np.max(np.abs(marginal - want)) < 1e-12


def test_truncated_generator_rows_sum_to_zero():
    pr = params(lam=1.0)
    Q, _ = truncated_sis_generator(pr, 8)
    assert np.max(np.abs(Q.sum(axis=1))) < 1e-12
    assert all(Q[i, i] <= 0 for i in range(Q.shape[0]))


def test_sis_identities_against_truncated_oracle():
    # Low density keeps the blocking mass (the only model mismatch at the
    # cap) negligible, so the stationary identities hold to solver precision.
    pr = params(lam=0.2)
    pi, states = truncated_sis_stationary(pr, 8)
    m = moment_dict(pi, states)
    for name, lhs_fn, rhs_fn in sis_identities(pr):
        assert abs(lhs_fn(m) - rhs_fn(m)) < 1e-9, name
    # A taller cap buys the same headroom at unit density.
    pr = params(lam=1.0)
    pi, states = truncated_sis_stationary(pr, 16)
    m = moment_dict(pi, states)
    for name, lhs_fn, rhs_fn in sis_identities(pr):
        assert abs(lhs_fn(m) - rhs_fn(m)) < 1e-9, name


def test_generator_apply_has_zero_stationary_mean():
    pr = params(lam=0.2)
    pi, states = truncated_sis_stationary(pr, 8)
    for mth, nth in ((1, 1), (2, 1), (1, 2)):
        gen = sis_generator_apply(pr, lambda x, y, m=mth, n=nth:
                                  float(x ** m * y ** n))
        assert abs(expectation(pi, states, gen)) < 1e-9


def test_identity_check_pass_logic():
    def check(name, lhs, rhs, se):
        return IdentityCheck(name, Estimate(lhs, se, 10),
                             Estimate(rhs, se, 10),
                             Estimate(lhs - rhs, se, 10))

    ok = check("a", 1.0, 1.001, 0.001)
    assert ok.passed
    bad = check("b", 1.0, 2.0, 0.001)
    assert not bad.passed
    exact = check("c", 1.0, 1.0, 0.0)
    assert exact.passed
    parsed = json.loads(report_json([ok, bad]))
    assert [c["pass"] for c in parsed] == [True, False]


def test_audit_sis_simulation_passes():
    checks = audit_sis(params(lam=1.0), 30_000.0, RngSeed(42))
    names = {c.name for c in checks}
    assert {"first_order_y", "total_mean", "total_variance",
            "conservation_x1y1"} <= names
    failures = [c.name for c in checks if not c.passed]
    assert failures == []


def test_audit_docs_simulation_passes():
    checks = audit_docs(params(lam=2.0, p=0.4), 30_000.0, RngSeed(17))
    failures = [c.name for c in checks if not c.passed]
    assert failures == []
    byname = {c.name: c for c in checks}
    assert byname["mean_x_quadrature"].rhs.value == pytest.approx(
        analytic.docs_mean_x(params(lam=2.0, p=0.4)), abs=1e-9)


def test_audit_routing_docs_open_mode_passes():
    pr = params(lam=2.0)
    res = simulate_routing_docs_meanfield(800, pr, 120.0, RngSeed(3))
    checks = audit_routing_docs(res.moments, pr)
    failures = [(c.name, c.residual) for c in checks if not c.passed]
    assert failures == []


def test_audit_tl_fixed_point_flow():
    pr = params(lam=2.0)
    p_star = 0.316  # measured SIS TL fixed point at this density
    run = simulate_reactor(ReactorKind(Variant.SIS), pr.replace(p=p_star),
                           20_000.0, RngSeed(21))
    checks = audit_tl(run.moments, pr, p_star)
    failures = [c.name for c in checks if not c.passed]
    assert failures == []


def test_correlation_probe_supercritical():
    pr = params(lam=2.0)
    probe = correlation_probe(pr, 40_000.0, RngSeed(33))
    # Susceptible and infected counts are negatively correlated and each
    # marginal is over-dispersed relative to Poisson.
    assert probe.cov_xy.value < 0
    assert probe.negatively_correlated in ("yes", "indeterminate")
    if probe.negatively_correlated == "yes":
        assert probe.bracket_satisfied
        lo, hi = probe.mean_x_bracket
        assert lo <= hi


def test_sis_generator_apply_pointwise():
    pr = params(lam=2.0, alpha=3.0, beta=0.5, p=0.25)
    gen = sis_generator_apply(pr, lambda x, y: float(x))
    # Drift of x: arrivals add q, services remove x, infections remove xy,
    # recoveries add y.
    x, y = 3, 2
    want = (pr.lam * pr.q - pr.mu * x - pr.alpha * x * y + pr.beta * y)
    assert gen(x, y) == pytest.approx(want, rel=1e-12)
