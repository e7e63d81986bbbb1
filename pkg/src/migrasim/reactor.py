"""Exact CTMC simulation of the three open reactors (SIS, DOCS, AIR).

Event selection uses a single total-rate exponential clock plus a categorical
draw proportional to component rates (Gillespie direct method). Per-customer
clock identity is only materialized in the couplings module, where the
pathwise proofs require it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable

from .core import (COUNT_CAP, CycleStats, Estimate, ModelParams, NumericalError,
                   RngSeed, UniformBuffer, ValidationError, batch_means)


class Variant(str, Enum):
    SIS = "sis"
    DOCS = "docs"
    AIR = "air"


@dataclass(frozen=True)
class ReactorKind:
    variant: Variant
    y_param: float = 0.0  # fixed infection-rate parameter of the AIR reactor

    def __post_init__(self):
        if self.variant is Variant.AIR and self.y_param < 0:
            raise ValidationError(f"y_param must be >= 0, got {self.y_param}")


# Event kinds in the log output.
ARRIVAL_S = "arrival_S"
ARRIVAL_I = "arrival_I"
DEPARTURE_S = "departure_S"
DEPARTURE_I = "departure_I"
INFECTION = "infection"
RECOVERY = "recovery"

EVENT_LOG_HEADER = ("time", "kind", "x_before", "y_before", "x_after", "y_after")

# Time-averaged moments reported by simulate_reactor, as (i, j) powers of (x, y).
MOMENT_POWERS = {
    "x": (1, 0), "y": (0, 1), "x2": (2, 0), "y2": (0, 2),
    "xy": (1, 1), "x2y": (2, 1), "xy2": (1, 2),
}


@dataclass
class MomentAverages:
    """Time-weighted moment averages with per-batch values for SE estimation.

    batches maps moment name -> list of per-batch time averages; the overall
    value is the duration-weighted mean of the batches.
    """
    batches: dict[str, list[float]]
    batch_durations: list[float]
    total_time: float
    events: int

    def mean(self, name: str) -> float:
        w = self.batch_durations
        vals = self.batches[name]
        return sum(v * d for v, d in zip(vals, w)) / sum(w)

    def estimate(self, name: str, ci_level: float = 0.95) -> Estimate:
        return batch_means(self.batches[name], self.batch_durations, ci_level)

    def combined(self, fn: Callable[[dict[str, float]], float],
                 ci_level: float = 0.95) -> Estimate:
        """Apply fn to the per-batch moment dicts and aggregate (batch means)."""
        per_batch = []
        for k in range(len(self.batch_durations)):
            moments = {name: vals[k] for name, vals in self.batches.items()}
            per_batch.append(fn(moments))
        return batch_means(per_batch, self.batch_durations, ci_level)


@dataclass
class ReactorRun:
    moments: MomentAverages
    final_state: tuple[int, int]
    events: int
    horizon: float


def _check_cap(x: int, y: int) -> None:
    if x > COUNT_CAP or y > COUNT_CAP:
        raise NumericalError(f"state count exceeded cap {COUNT_CAP}")


class _Accumulator:
    """Accumulates time-weighted moments over fixed-width time batches."""

    def __init__(self, t_start: float, t_end: float, n_batches: int,
                 extra: dict[str, Callable[[int, int], float]] | None = None):
        self.t_start = t_start
        self.t_end = t_end
        self.n_batches = n_batches
        self.width = (t_end - t_start) / n_batches
        self.extra = extra or {}
        names = list(MOMENT_POWERS) + list(self.extra)
        self.names = names
        self.sums = {name: [0.0] * n_batches for name in names}
        self.time_in_batch = [0.0] * n_batches
        self._state_cache: dict[tuple[int, int], list[tuple[str, float]]] = {}

    def _state_values(self, x: int, y: int) -> list[tuple[str, float]]:
        vals = self._state_cache.get((x, y))
        if vals is None:
            vals = [(name, float(x ** i * y ** j))
                    for name, (i, j) in MOMENT_POWERS.items()]
            vals += [(name, fn(x, y)) for name, fn in self.extra.items()]
            self._state_cache[(x, y)] = vals
        return vals

    def add(self, t0: float, t1: float, x: int, y: int) -> None:
        """Attribute the sojourn [t0, t1) in state (x, y) to its batches."""
        lo = max(t0, self.t_start)
        hi = min(t1, self.t_end)
        if hi <= lo:
            return
        vals = self._state_values(x, y)
        k0 = min(int((lo - self.t_start) / self.width), self.n_batches - 1)
        k1 = min(int((hi - self.t_start) / self.width - 1e-12), self.n_batches - 1)
        for k in range(k0, k1 + 1):
            blo = self.t_start + k * self.width
            bhi = blo + self.width
            dt = min(hi, bhi) - max(lo, blo)
            if dt <= 0:
                continue
            self.time_in_batch[k] += dt
            for name, v in vals:
                self.sums[name][k] += v * dt

    def finish(self, events: int) -> MomentAverages:
        durations, batches = [], {name: [] for name in self.names}
        for k in range(self.n_batches):
            d = self.time_in_batch[k]
            if d <= 0:
                continue
            durations.append(d)
            for name in self.names:
                batches[name].append(self.sums[name][k] / d)
        if len(durations) < 2:
            raise NumericalError("too few non-empty batches; extend the horizon")
        return MomentAverages(batches=batches, batch_durations=durations,
                              total_time=sum(durations), events=events)


def simulate_reactor(kind: ReactorKind, params: ModelParams, horizon: float,
                     seed: RngSeed, record: bool = False,
                     burn_in: float | None = None, n_batches: int = 32,
                     initial: tuple[int, int] = (0, 0),
                     docs_recovery_split: bool = True,
                     event_sink: Callable[[tuple], None] | None = None,
                     extra_moments: dict[str, Callable[[int, int], float]] | None = None) -> ReactorRun | tuple[ReactorRun, list]:
    """Run one reactor for `horizon` time units; return time-average moments.

    With record=True also returns the event log as tuples matching
    EVENT_LOG_HEADER. Burn-in defaults to 10% of the horizon.
    """
    if horizon <= 0:
        raise ValidationError(f"horizon must be > 0, got {horizon}")
    if burn_in is None:
        burn_in = 0.1 * horizon
    if not 0 <= burn_in < horizon:
        raise ValidationError("burn_in must lie in [0, horizon)")

    u = UniformBuffer(seed.generator())
    acc = _Accumulator(burn_in, horizon, n_batches, extra=extra_moments)
    log: list[tuple] = []
    sink = log.append if record else event_sink

    if kind.variant is Variant.AIR:
        stepper = _air_step(params, kind.y_param)
    elif kind.variant is Variant.DOCS:
        stepper = _docs_step(params, docs_recovery_split)
    else:
        stepper = _sis_step(params)

    x, y = initial
    t = 0.0
    events = 0
    while True:
        rate, advance = stepper(x, y)
        if rate <= 0.0:
            # Absorbing only if nothing can ever happen; lam > 0 so never here.
            raise NumericalError("total rate vanished")
        dt = u.exponential(rate)
        t_next = t + dt
        if t_next >= horizon:
            acc.add(t, horizon, x, y)
            break
        acc.add(t, t_next, x, y)
        kind_name, nx, ny = advance(u.next() * rate, u)
        _check_cap(nx, ny)
        if sink is not None:
            sink((t_next, kind_name, x, y, nx, ny))
        x, y = nx, ny
        t = t_next
        events += 1

    run = ReactorRun(moments=acc.finish(events), final_state=(x, y),
                     events=events, horizon=horizon)
    if record:
        return run, log
    return run


def _sis_step(p: ModelParams):
    lam, mu, alpha, beta, pi = p.lam, p.mu, p.alpha, p.beta, p.p

    def step(x: int, y: int):
        r_arr = lam
        r_dep_s = mu * x
        r_dep_i = mu * y
        r_rec = beta * y
        r_inf = alpha * x * y
        total = r_arr + r_dep_s + r_dep_i + r_rec + r_inf

        def advance(pick: float, u: UniformBuffer):
            if pick < r_arr:
                if u.next() < pi:
                    return ARRIVAL_I, x, y + 1
                return ARRIVAL_S, x + 1, y
            pick -= r_arr
            if pick < r_dep_s:
                return DEPARTURE_S, x - 1, y
            pick -= r_dep_s
            if pick < r_dep_i:
                return DEPARTURE_I, x, y - 1
            pick -= r_dep_i
            if pick < r_rec:
                return RECOVERY, x + 1, y - 1
            return INFECTION, x - 1, y + 1

        return total, advance

    return step


def _docs_step(p: ModelParams, recovery_split: bool):
    lam, mu, alpha, nu, pi = p.lam, p.mu, p.alpha, p.nu, p.p
    # With nu = mu + beta, a nu-departure keeps its infected state with
    # probability mu/(mu+beta) and swaps to susceptible otherwise.
    split = mu / (mu + p.beta) if recovery_split else 1.0

    def step(x: int, y: int):
        r_arr = lam
        r_dep_s = mu * x
        r_dep_i = nu * y
        r_inf = alpha * x * y
        total = r_arr + r_dep_s + r_dep_i + r_inf

        def advance(pick: float, u: UniformBuffer):
            if pick < r_arr:
                if u.next() < pi:
                    return ARRIVAL_I, x, y + 1
                return ARRIVAL_S, x + 1, y
            pick -= r_arr
            if pick < r_dep_s:
                return DEPARTURE_S, x - 1, y
            pick -= r_dep_s
            if pick < r_dep_i:
                if u.next() < split:
                    return DEPARTURE_I, x, y - 1
                return DEPARTURE_S, x, y - 1
            # Simultaneous infection and departure: the susceptible leaves
            # the system for good, counted as an infected departure.
            return INFECTION, x - 1, y

        return total, advance

    return step


def _air_step(p: ModelParams, y_param: float):
    # Two-station tandem: station 1 holds susceptible (count x), station 2
    # infected (count y). Station-1 per-customer rate mu + alpha*y_param with
    # exit probability mu/(mu+alpha*y_param); station 2 rate mu + beta with
    # exit probability mu/(mu+beta).
    lam, mu, alpha, beta, pi = p.lam, p.mu, p.alpha, p.beta, p.p
    rate1 = mu + alpha * y_param
    rate2 = mu + beta
    exit1 = mu / rate1
    exit2 = mu / rate2

    def step(x: int, y: int):
        r_arr = lam
        r_s1 = rate1 * x
        r_s2 = rate2 * y
        total = r_arr + r_s1 + r_s2

        def advance(pick: float, u: UniformBuffer):
            if pick < r_arr:
                if u.next() < pi:
                    return ARRIVAL_I, x, y + 1
                return ARRIVAL_S, x + 1, y
            pick -= r_arr
            if pick < r_s1:
                if u.next() < exit1:
                    return DEPARTURE_S, x - 1, y
                return INFECTION, x - 1, y + 1  # routed to the infected station
            if u.next() < exit2:
                return DEPARTURE_I, x, y - 1
            return RECOVERY, x + 1, y - 1  # routed back to station 1

        return total, advance

    return step


_DEPARTURES = (DEPARTURE_S, DEPARTURE_I)


def run_busy_cycles(kind: ReactorKind, params: ModelParams, n_cycles: int,
                    seed: RngSeed, docs_recovery_split: bool = True,
                    track_time_average: bool = False):
    """Simulate n_cycles busy cycles; each starts at an arrival to an empty
    system and ends when the system next empties.

    With track_time_average=True additionally returns the time-average of Y
    over the whole run (idle periods included), which is the independent
    stationary estimator of E[Y].
    """
    if n_cycles < 1:
        raise ValidationError(f"n_cycles must be >= 1, got {n_cycles}")
    u = UniformBuffer(seed.generator())
    if kind.variant is Variant.AIR:
        stepper = _air_step(params, kind.y_param)
    elif kind.variant is Variant.DOCS:
        stepper = _docs_step(params, docs_recovery_split)
    else:
        stepper = _sis_step(params)

    lam, pi = params.lam, params.p
    cycles: list[CycleStats] = []
    y_time = 0.0
    total_time = 0.0
    for _ in range(n_cycles):
        # Idle period: the only possible event is an arrival.
        idle = u.exponential(lam)
        total_time += idle
        t0 = 0.0
        if u.next() < pi:
            x, y = 0, 1
        else:
            x, y = 1, 0
        t = 0.0
        departures = 0
        infected_departures = 0
        while x + y > 0:
            rate, advance = stepper(x, y)
            dt = u.exponential(rate)
            y_time += y * dt
            t += dt
            # The arrival branch of the stepper handles p internally; other
            # branches consume at most one extra uniform.
            kind_name, nx, ny = advance(u.next() * rate, u)
            _check_cap(nx, ny)
            if kind_name in _DEPARTURES:
                departures += 1
                if kind_name == DEPARTURE_I:
                    infected_departures += 1
            elif kind_name == INFECTION and kind.variant is Variant.DOCS:
                # DOCS infection is a simultaneous infected departure.
                departures += 1
                infected_departures += 1
            x, y = nx, ny
        total_time += t
        cycles.append(CycleStats(duration=t, departures=departures,
                                 infected_departures=infected_departures))
    if track_time_average:
        return cycles, y_time / total_time
    return cycles


def write_event_log(path: str, events: Iterable[tuple]) -> None:
    """CSV event log with columns (time, kind, x_before, y_before, x_after, y_after)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EVENT_LOG_HEADER)
        w.writerows(events)


@dataclass
class PalmEstimates:
    """Event averages at infection (I) / recovery (R) epochs, plus arrival and
    departure Palm averages needed by the balance identities."""
    e_I_Y_minus: Estimate
    e_I_Y_plus: Estimate
    e_I_X_minus: Estimate
    e_I_X_plus: Estimate
    e_R_Y_plus: Estimate
    e_R_X_minus: Estimate
    e_R_X_plus: Estimate
    e_A_I_Y_minus: Estimate  # Y seen just before infected arrivals
    e_D_I_Y_plus: Estimate   # Y just after departures of infected
    e_D_S_X_plus: Estimate   # X just after departures of susceptible
    e_A_S_X_minus: Estimate  # X seen just before susceptible arrivals
    a_i: Estimate  # infection epoch intensity (alpha E[XY])
    a_r: Estimate  # recovery epoch intensity (beta E[Y])
    n_infections: int
    n_recoveries: int
    low_confidence: bool


def palm_estimates(params: ModelParams, horizon: float, seed: RngSeed,
                   burn_in: float | None = None, n_batches: int = 32,
                   min_events: int = 100) -> PalmEstimates:
    """Event-average (Palm) estimates over an SIS reactor run.

    Rates a_i, a_r are event counts divided by elapsed time. Estimates with
    zero qualifying events are marked undefined, never zero.
    """
    if burn_in is None:
        burn_in = 0.1 * horizon
    span = horizon - burn_in
    width = span / n_batches

    # Per-batch event sums; index by batch.
    tallies = {name: [[0.0] * n_batches, [0] * n_batches] for name in
               ("iy-", "iy+", "ix-", "ix+", "ry+", "rx-", "rx+",
                "aiy-", "diy+", "dsx+", "asx-")}
    counts = {"inf": [0] * n_batches, "rec": [0] * n_batches}

    def sink(ev):
        t, kind_name, xb, yb, xa, ya = ev
        if t < burn_in or t >= horizon:
            return
        k = min(int((t - burn_in) / width), n_batches - 1)

        def tally(name, value):
            tallies[name][0][k] += value
            tallies[name][1][k] += 1

        if kind_name == INFECTION:
            counts["inf"][k] += 1
            tally("iy-", yb)
            tally("iy+", ya)
            tally("ix-", xb)
            tally("ix+", xa)
        elif kind_name == RECOVERY:
            counts["rec"][k] += 1
            tally("ry+", ya)
            tally("rx-", xb)
            tally("rx+", xa)
        elif kind_name == ARRIVAL_I:
            tally("aiy-", yb)
        elif kind_name == ARRIVAL_S:
            tally("asx-", xb)
        elif kind_name == DEPARTURE_I:
            tally("diy+", ya)
        elif kind_name == DEPARTURE_S:
            tally("dsx+", xa)

    simulate_reactor(ReactorKind(Variant.SIS), params, horizon, seed,
                     burn_in=burn_in, n_batches=n_batches, event_sink=sink)

    def event_avg(name: str) -> Estimate:
        sums, ns = tallies[name]
        means = [s / n for s, n in zip(sums, ns) if n > 0]
        if not means:
            return Estimate.undefined()
        if len(means) < 2:
            return Estimate(means[0], math.inf, 1)
        return batch_means(means)

    def rate_est(key: str) -> Estimate:
        per_batch = [c / width for c in counts[key]]
        return batch_means(per_batch)

    n_inf = sum(counts["inf"])
    n_rec = sum(counts["rec"])
    return PalmEstimates(
        e_I_Y_minus=event_avg("iy-"), e_I_Y_plus=event_avg("iy+"),
        e_I_X_minus=event_avg("ix-"), e_I_X_plus=event_avg("ix+"),
        e_R_Y_plus=event_avg("ry+"), e_R_X_minus=event_avg("rx-"),
        e_R_X_plus=event_avg("rx+"),
        e_A_I_Y_minus=event_avg("aiy-"), e_D_I_Y_plus=event_avg("diy+"),
        e_D_S_X_plus=event_avg("dsx+"), e_A_S_X_minus=event_avg("asx-"),
        a_i=rate_est("inf"), a_r=rate_est("rec"),
        n_infections=n_inf, n_recoveries=n_rec,
        low_confidence=(n_inf < 100 or n_rec < 100),
    )
