import csv

import pytest

from migrasim import analytic
from migrasim.core import RngSeed, ValidationError, derive_params
from migrasim.network import (EXTINCTION_HEADER, TRAJECTORY_HEADER,
                              extinction_time, simulate_closed,
                              simulate_meanfield,
                              simulate_routing_docs_meanfield,
                              write_extinction_csv, write_trajectory_csv)
from migrasim.reactor import Variant


def params(lam=2.0, mu=1.0, alpha=1.0, beta=1.0, p=0.5):
    return derive_params(lam=lam, mu=mu, alpha=alpha, beta=beta, p=p)


def test_closed_run_is_deterministic_and_conserving():
    a = simulate_closed(Variant.SIS, 10, 20, params(), 200.0, RngSeed(2))
    b = simulate_closed(Variant.SIS, 10, 20, params(), 200.0, RngSeed(2))
    assert a.trajectory == b.trajectory
    assert a.events == b.events
    # K customers forever: the sampled infected count never exceeds K.
    assert all(0 <= row[1] <= 20 for row in a.trajectory)
    assert 0.0 <= a.infected_fraction.value <= 1.0


def test_closed_validation():
    with pytest.raises(ValidationError):
        simulate_closed(Variant.SIS, 1, 5, params(), 10.0, RngSeed(0))
    with pytest.raises(ValidationError):
        simulate_closed(Variant.SIS, 4, 0, params(), 10.0, RngSeed(0))


def test_closed_air_tracks_thermodynamic_limit():
    pr = params(lam=2.0)
    run = simulate_closed(Variant.AIR, 40, 80, pr, 1500.0, RngSeed(11))
    p_star = analytic.air_tl_stationary(pr).p_star
    tol = max(4.0 * run.infected_fraction.std_error, 0.05)
    assert abs(run.infected_fraction.value - p_star) <= tol


def test_extinction_zero_customers():
    res = extinction_time(Variant.SIS, 5, 0, params(), 4, 100.0, RngSeed(0))
    assert res.times == [0.0] * 4 and res.censored == [False] * 4


def test_extinction_times_respect_cap():
    res = extinction_time(Variant.SIS, 5, 5, params(lam=0.2), 6, 50.0,
                          RngSeed(3))
    assert len(res.times) == 6
    for t, c in zip(res.times, res.censored):
        assert 0.0 <= t <= 50.0
        assert c == (t >= 50.0)
    assert res.median() >= 0.0


def test_csv_writers_schema(tmp_path):
    run = simulate_closed(Variant.SIS, 5, 10, params(), 50.0, RngSeed(4))
    traj = tmp_path / "traj.csv"
    write_trajectory_csv(str(traj), run.trajectory)
    with open(traj, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == TRAJECTORY_HEADER
    assert len(rows) == len(run.trajectory) + 1

    res = extinction_time(Variant.SIS, 5, 5, params(lam=0.2), 3, 20.0,
                          RngSeed(5))
    ext = tmp_path / "ext.csv"
    write_extinction_csv(str(ext), res)
    with open(ext, newline="") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == EXTINCTION_HEADER
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]


def test_meanfield_scheme_shapes_and_sanity():
    pr = params(lam=2.0)
    tr = simulate_meanfield(Variant.SIS, 400, None, pr, 0.5, 30.0, RngSeed(6))
    assert len(tr.times) == len(tr.mean_x) == len(tr.mean_y)
    assert tr.h > 0 and tr.replicas == 400
    assert all(x >= 0 for x in tr.mean_x) and all(y >= 0 for y in tr.mean_y)
    # Total density hovers near eta once the arrival flow balances.
    tail = [x + y for x, y in zip(tr.mean_x[-50:], tr.mean_y[-50:])]
    assert sum(tail) / len(tail) == pytest.approx(pr.eta, rel=0.4)


def test_meanfield_requires_enough_replicas():
    with pytest.raises(ValidationError):
        simulate_meanfield(Variant.SIS, 10, None, params(), 0.5, 5.0,
                           RngSeed(0))
    with pytest.raises(ValidationError):
        simulate_routing_docs_meanfield(10, params(), 5.0, RngSeed(0))


def test_routing_meanfield_open_total_density():
    pr = params(lam=2.0)
    res = simulate_routing_docs_meanfield(600, pr, 100.0, RngSeed(7))
    total = res.moments.combined(lambda m: m["x"] + m["y"])
    assert abs(total.value - pr.eta) <= 4.0 * max(total.std_error, 0.01)


def test_routing_meanfield_closed_tl_fixed_point():
    pr = params(lam=2.0)
    res = simulate_routing_docs_meanfield(800, pr, 120.0, RngSeed(8),
                                          closed_tl=True)
    want = analytic.docs_tl_fixed_point(pr)
    ps = res.p_star
    assert abs(ps.value - want) <= max(4.0 * ps.std_error, 0.06)
