"""Finite-N closed-network simulation (SIS, DOCS, AIR variants), slotted
mean-field particle schemes, and extinction-time measurement."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import (Estimate, ModelParams, NumericalError, RngSeed,
                   UniformBuffer, ValidationError, batch_means)
from .reactor import MOMENT_POWERS, MomentAverages, Variant

TRAJECTORY_HEADER = ("t", "total_infected", "mean_x", "mean_y")
EXTINCTION_HEADER = ("rep", "absorption_time", "censored")


class _RateTree:
    """Fenwick tree over per-station rates: O(log N) update and sampling."""

    def __init__(self, n: int):
        self.n = n
        self.tree = [0.0] * (n + 1)
        self.rates = [0.0] * n

    def set(self, i: int, rate: float) -> None:
        delta = rate - self.rates[i]
        self.rates[i] = rate
        j = i + 1
        while j <= self.n:
            self.tree[j] += delta
            j += j & (-j)

    @property
    def total(self) -> float:
        return sum(self.rates) if self.n < 8 else self._prefix(self.n)

    def _prefix(self, j: int) -> float:
        s = 0.0
        while j > 0:
            s += self.tree[j]
            j -= j & (-j)
        return s

    def sample(self, target: float) -> int:
        """Largest-prefix search: first index with cumulative rate > target."""
        idx = 0
        bit = 1 << (self.n.bit_length())
        while bit > 0:
            nxt = idx + bit
            if nxt <= self.n and self.tree[nxt] <= target:
                target -= self.tree[nxt]
                idx = nxt
            bit >>= 1
        return min(idx, self.n - 1)


@dataclass
class NetworkState:
    x: list[int]
    y: list[int]

    @property
    def total(self) -> int:
        return sum(self.x) + sum(self.y)

    @property
    def total_infected(self) -> int:
        return sum(self.y)


@dataclass
class ClosedRunResult:
    trajectory: list[tuple[float, int, float, float]]
    infected_fraction: Estimate  # time-averaged Y_total / K
    final_state: NetworkState
    events: int
    extinct: bool
    extinction_time: float | None


def _initial_state(N: int, K: int, initial_infected: int,
                   u: UniformBuffer) -> NetworkState:
    x = [0] * N
    y = [0] * N
    for c in range(K):
        station = int(u.next() * N)
        if c < initial_infected:
            y[station] += 1
        else:
            x[station] += 1
    return NetworkState(x, y)


def simulate_closed(variant: Variant, N: int, K: int, params: ModelParams,
                    horizon: float, seed: RngSeed,
                    initial_infected: int | None = None,
                    self_routing: bool | None = None,
                    sample_dt: float | None = None,
                    n_batches: int = 32,
                    stop_on_extinction: bool = False) -> ClosedRunResult:
    """Exact CTMC on the product state of N stations with K customers.

    Migration routes uniformly over the other N-1 stations for SIS and over
    all N stations for DOCS/AIR re-routing (self_routing overrides). The AIR
    infection rate per susceptible is alpha times the instantaneous empirical
    mean of infected per station."""
    if N < 2:
        raise ValidationError(f"N must be >= 2, got {N}")
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    if initial_infected is None:
        initial_infected = K
    if not 0 <= initial_infected <= K:
        raise ValidationError("initial_infected must lie in [0, K]")
    if self_routing is None:
        self_routing = variant is not Variant.SIS
    if sample_dt is None:
        sample_dt = max(horizon / 1000.0, 1e-9)
    mu, alpha, beta = params.mu, params.alpha, params.beta

    u = UniformBuffer(seed.generator())
    state = _initial_state(N, K, initial_infected, u)
    x, y = state.x, state.y
    y_tot = sum(y)

    # Station rate split: base = mu*(x+y) + beta*y + (pairwise infection for
    # SIS/DOCS); for AIR the infection part alpha*(Y_tot/N)*x is kept in a
    # second tree over x so that Y_tot changes stay O(log N).
    base = _RateTree(N)
    x_tree = _RateTree(N) if variant is Variant.AIR else None

    def base_rate(i: int) -> float:
        r = mu * (x[i] + y[i]) + beta * y[i]
        if variant is not Variant.AIR:
            r += alpha * x[i] * y[i]
        return r

    for i in range(N):
        base.set(i, base_rate(i))
        if x_tree is not None:
            x_tree.set(i, float(x[i]))

    def route(origin: int) -> int:
        if self_routing:
            return int(u.next() * N)
        dest = int(u.next() * (N - 1))
        return dest + 1 if dest >= origin else dest

    t = 0.0
    events = 0
    next_sample = 0.0
    trajectory: list[tuple[float, int, float, float]] = []
    frac_acc = [0.0] * n_batches
    time_acc = [0.0] * n_batches
    width = horizon / n_batches
    extinct = y_tot == 0 and initial_infected == 0
    extinction_time = 0.0 if extinct else None

    def accumulate(t0: float, t1: float, frac: float) -> None:
        k0 = min(int(t0 / width), n_batches - 1)
        k1 = min(int(t1 / width - 1e-12), n_batches - 1)
        for k in range(k0, k1 + 1):
            lo, hi = k * width, (k + 1) * width
            dt = min(t1, hi) - max(t0, lo)
            if dt > 0:
                frac_acc[k] += frac * dt
                time_acc[k] += dt

    while t < horizon:
        base_total = base._prefix(N)
        air_total = (alpha * y_tot / N) * x_tree._prefix(N) if x_tree else 0.0
        total = base_total + air_total
        if total <= 0.0:
            # Frozen configuration (possible only if all rates vanish).
            accumulate(t, horizon, y_tot / K)
            t = horizon
            break
        dt = u.exponential(total)
        t_next = min(t + dt, horizon)
        accumulate(t, t_next, y_tot / K)
        while t_next >= next_sample and next_sample <= horizon:
            trajectory.append((next_sample, y_tot,
                               sum(x) / N, sum(y) / N))
            next_sample += sample_dt
        if t + dt >= horizon:
            t = horizon
            break
        t = t_next
        events += 1

        pick = u.next() * total
        if x_tree is not None and pick >= base_total:
            # AIR infection at the station drawn proportionally to x.
            i = x_tree.sample(pick - base_total)
            x[i] -= 1
            y[i] += 1
            y_tot += 1
            x_tree.set(i, float(x[i]))
            base.set(i, base_rate(i))
        else:
            i = base.sample(pick)
            r = pick - base._prefix(i)  # residual within station i
            r_mig_s = mu * x[i]
            r_mig_i = mu * y[i]
            r_rec = beta * y[i]
            if r < r_mig_s:
                j = route(i)
                x[i] -= 1
                x[j] += 1
                _update(base, x_tree, base_rate, x, i, j)
            elif r < r_mig_s + r_mig_i:
                j = route(i)
                y[i] -= 1
                y[j] += 1
                _update(base, x_tree, base_rate, x, i, j)
            elif r < r_mig_s + r_mig_i + r_rec:
                y[i] -= 1
                y_tot -= 1
                if variant is Variant.SIS or variant is Variant.AIR:
                    x[i] += 1
                    _update(base, x_tree, base_rate, x, i, i)
                else:
                    # DOCS: the recovered customer departs to a random station.
                    j = route(i)
                    x[j] += 1
                    _update(base, x_tree, base_rate, x, i, j)
            else:
                # Pairwise infection inside station i (SIS/DOCS only here).
                x[i] -= 1
                y_tot += 1
                if variant is Variant.SIS:
                    y[i] += 1
                    _update(base, x_tree, base_rate, x, i, i)
                else:
                    # DOCS: the newly infected departs immediately.
                    j = route(i)
                    y[j] += 1
                    _update(base, x_tree, base_rate, x, i, j)
        if y_tot == 0 and extinction_time is None:
            extinct = True
            extinction_time = t
            if stop_on_extinction:
                accumulate(t, horizon, 0.0)
                break

    if sum(x) + sum(y) != K:
        raise NumericalError("customer count not conserved")
    per_batch = [f / d for f, d in zip(frac_acc, time_acc) if d > 0]
    durations = [d for d in time_acc if d > 0]
    frac = batch_means(per_batch, durations) if len(per_batch) >= 2 \
        else Estimate(per_batch[0] if per_batch else 0.0, math.inf, 1)
    return ClosedRunResult(trajectory=trajectory, infected_fraction=frac,
                           final_state=NetworkState(x, y), events=events,
                           extinct=extinct, extinction_time=extinction_time)


def _update(base: _RateTree, x_tree: _RateTree | None, base_rate, x,
            i: int, j: int) -> None:
    base.set(i, base_rate(i))
    if j != i:
        base.set(j, base_rate(j))
    if x_tree is not None:
        x_tree.set(i, float(x[i]))
        if j != i:
            x_tree.set(j, float(x[j]))


@dataclass
class ExtinctionResult:
    times: list[float]
    censored: list[bool]
    cap: float

    @property
    def survival_at_cap(self) -> int:
        return sum(self.censored)

    def median(self) -> float:
        return float(np.median(self.times))


def extinction_time(variant: Variant, N: int, K: int, params: ModelParams,
                    reps: int, cap: float, seed: RngSeed,
                    initial_infected: int | None = None) -> ExtinctionResult:
    """First hitting time of Y_total = 0, censored at cap, all-infected start
    by default."""
    if K == 0:
        return ExtinctionResult([0.0] * reps, [False] * reps, cap)
    times, censored = [], []
    for rep in range(reps):
        run = simulate_closed(variant, N, K, params, cap, seed.child(rep),
                              initial_infected=initial_infected,
                              stop_on_extinction=True)
        if run.extinction_time is not None:
            times.append(run.extinction_time)
            censored.append(False)
        else:
            times.append(cap)
            censored.append(True)
    return ExtinctionResult(times, censored, cap)


def write_trajectory_csv(path: str, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        w.writerows(rows)


def write_extinction_csv(path: str, result: ExtinctionResult) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(EXTINCTION_HEADER)
        for rep, (t, c) in enumerate(zip(result.times, result.censored)):
            w.writerow((rep, t, int(c)))


@dataclass
class MeanFieldTrajectory:
    times: np.ndarray
    mean_x: np.ndarray
    mean_y: np.ndarray
    h: float
    replicas: int


def _default_h(params: ModelParams) -> float:
    max_rate = params.mu + params.beta + params.alpha * max(params.eta, 1.0)
    return 0.01 / max_rate


def simulate_meanfield(variant: Variant, M: int, h: float | None,
                       params: ModelParams, p0: float, horizon: float,
                       seed: RngSeed,
                       initial: tuple[np.ndarray, np.ndarray] | None = None) -> MeanFieldTrajectory:
    """Slotted mean-field particle scheme for the SIS thermodynamic limit.

    Each of M replicas is one station; per slot of length h every replica
    receives Poisson(h*mu*mean_x) susceptible and Poisson(h*mu*mean_y)
    infected arrivals, and each present customer resolves stay / transition
    with competing-exponential probabilities over the slot."""
    if variant is not Variant.SIS:
        raise ValidationError("mean-field particle scheme is SIS-only")
    if M < 100:
        raise ValidationError(f"M must be >= 100, got {M}")
    if h is None:
        h = _default_h(params)
    if h <= 0:
        raise ValidationError(f"h must be > 0, got {h}")
    mu, alpha, beta, eta = params.mu, params.alpha, params.beta, params.eta

    rng = seed.generator()
    if initial is not None:
        x = np.array(initial[0], dtype=np.int64).copy()
        y = np.array(initial[1], dtype=np.int64).copy()
        if x.shape != (M,) or y.shape != (M,):
            raise ValidationError("initial arrays must have shape (M,)")
    else:
        x = rng.poisson(eta * (1.0 - p0), M)
        y = rng.poisson(eta * p0, M)

    n_slots = int(math.ceil(horizon / h))
    times = np.arange(n_slots + 1) * h
    mean_x = np.empty(n_slots + 1)
    mean_y = np.empty(n_slots + 1)
    mean_x[0] = x.mean()
    mean_y[0] = y.mean()
    warned = False
    for k in range(n_slots):
        mx, my = x.mean(), y.mean()
        rate_s = mu + alpha * y  # per susceptible, per replica
        rate_i = mu + beta
        top = max(rate_s.max(initial=0.0), rate_i)
        if not warned and h * top > 0.5:
            warnings.warn(f"slot width h={h:g} times peak rate {top:g} "
                          "exceeds 0.5; discretization bias likely")
            warned = True
        arr_s = rng.poisson(h * mu * mx, M)
        arr_i = rng.poisson(h * mu * my, M)
        # Susceptible transitions: leave slot-state w.p. 1-exp(-h*rate); the
        # cause splits proportionally (migration mu vs in-station infection).
        trans_s = rng.binomial(x, 1.0 - np.exp(-h * rate_s))
        with np.errstate(divide="ignore", invalid="ignore"):
            inf_share = np.where(rate_s > 0, alpha * y / rate_s, 0.0)
        new_inf = rng.binomial(trans_s, inf_share)
        trans_i = rng.binomial(y, 1.0 - math.exp(-h * rate_i))
        rec = rng.binomial(trans_i, beta / rate_i)
        x = x - trans_s + arr_s + rec
        y = y - trans_i + arr_i + new_inf
        mean_x[k + 1] = x.mean()
        mean_y[k + 1] = y.mean()
    return MeanFieldTrajectory(times=times, mean_x=mean_x, mean_y=mean_y,
                               h=h, replicas=M)


@dataclass
class RoutingMeanFieldResult:
    moments: MomentAverages
    h: float
    replicas: int
    params: ModelParams

    @property
    def p_star(self) -> Estimate:
        """mu * E[Y] / lam, the implied stationary infected input fraction."""
        e = self.moments.estimate("y")
        scale = self.params.mu / self.params.lam
        return Estimate(scale * e.value, scale * e.std_error, e.n, e.ci_level)


def simulate_routing_docs_meanfield(M: int, params: ModelParams,
                                    horizon: float, seed: RngSeed,
                                    h: float | None = None,
                                    burn_in: float | None = None,
                                    n_batches: int = 32,
                                    closed_tl: bool = False,
                                    p0: float = 0.5) -> RoutingMeanFieldResult:
    """Ensemble of DOCS-routing reactors with mean-field arrival intensities.

    Open mode: infected arrive Poisson(lam*p + alpha*E[XY]), susceptible
    Poisson(lam*q + beta*E[Y]); each customer departs on any transition
    (migration, infection, or recovery). Closed-TL mode replaces the external
    terms with the migration feedbacks mu*E[Y] and mu*E[X]."""
    if M < 100:
        raise ValidationError(f"M must be >= 100, got {M}")
    if h is None:
        h = _default_h(params)
    if burn_in is None:
        burn_in = 0.25 * horizon
    if not 0 <= burn_in < horizon:
        raise ValidationError("burn_in must lie in [0, horizon)")
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    p, q = params.p, params.q
    eta = params.eta

    rng = seed.generator()
    if closed_tl:
        # The total count is conserved, so seed exactly round(M*eta)
        # customers; a Poisson draw would freeze an O(1/sqrt(M)) density
        # error into the whole run.
        counts = rng.multinomial(round(M * eta), np.full(M, 1.0 / M))
        y = rng.binomial(counts, p0)
        x = counts - y
    else:
        x = rng.poisson(eta * (1.0 - p0), M)
        y = rng.poisson(eta * p0, M)
    n_slots = int(math.ceil(horizon / h))
    width = (horizon - burn_in) / n_batches
    names = list(MOMENT_POWERS)
    sums = {name: [0.0] * n_batches for name in names}
    time_in = [0.0] * n_batches

    rate_i = mu + beta
    p_leave_i = 1.0 - math.exp(-h * rate_i)
    uniform_station = np.full(M, 1.0 / M)
    for k in range(n_slots):
        t = k * h
        mx, my = x.mean(), y.mean()
        mxy = float((x * y).mean())
        if closed_tl:
            a_i = mu * my + alpha * mxy
            a_s = mu * mx + beta * my
        else:
            a_i = lam * p + alpha * mxy
            a_s = lam * q + beta * my
        if t >= burn_in:
            kb = min(int((t - burn_in) / width), n_batches - 1)
            time_in[kb] += h
            for name, (i, j) in MOMENT_POWERS.items():
                sums[name][kb] += float(((x ** i) * (y ** j)).mean()) * h
        rate_s = mu + alpha * y
        trans_s = rng.binomial(x, 1.0 - np.exp(-h * rate_s))
        trans_i = rng.binomial(y, p_leave_i)
        if closed_tl:
            # Replace departures one for one; independent Poisson arrivals
            # would leave the ensemble total to random-walk away from eta.
            d = int(trans_s.sum() + trans_i.sum())
            total_in = a_i + a_s
            share = a_i / total_in if total_in > 0 else 0.0
            d_i = rng.binomial(d, share)
            x = x - trans_s + rng.multinomial(d - d_i, uniform_station)
            y = y - trans_i + rng.multinomial(d_i, uniform_station)
        else:
            x = x - trans_s + rng.poisson(h * a_s, M)
            y = y - trans_i + rng.poisson(h * a_i, M)

    durations, batches = [], {name: [] for name in names}
    for kb in range(n_batches):
        if time_in[kb] <= 0:
            continue
        durations.append(time_in[kb])
        for name in names:
            batches[name].append(sums[name][kb] / time_in[kb])
    if len(durations) < 2:
        raise NumericalError("too few non-empty batches; extend the horizon")
    moments = MomentAverages(batches=batches, batch_durations=durations,
                             total_time=sum(durations), events=n_slots * M)
    return RoutingMeanFieldResult(moments=moments, h=h, replicas=M,
                                  params=params)
