"""Executable shared-clock couplings, used as exact pathwise property tests:
monotonicity in p, monotonicity in alpha and beta (open reactor and closed
network), and 3-color concavity with merge consistency checks.

Every dominance assertion here is pathwise: a single violating event raises
CouplingViolationError with the offending trace. Clock identities are sampled
lazily per event round, which is equivalent in law to materializing the full
per-customer clock arrays because only the minimum and its identity are
consumed per round.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .core import (ModelParams, RngSeed, UniformBuffer,
                   ValidationError)


class CouplingViolationError(Exception):
    """A pathwise dominance or merge-consistency check failed."""

    def __init__(self, message: str, trace: list[tuple] | None = None):
        super().__init__(message)
        self.trace = trace or []


def write_violation_trace(path: str, trace: list[tuple]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("step", "event", "detail"))
        w.writerows(trace)


@dataclass
class CoupledTrace:
    """Summary of a coupled run; populated trace only on violations."""
    n_cycles: int = 0
    n_events: int = 0
    violations: int = 0
    strict_events: int = 0
    strict_fraction: float = 0.0
    d_i_low: int = 0
    d_i_high: int = 0
    d_total: int = 0


def coupled_p_monotonicity(p: float, p_hat: float, params: ModelParams,
                           n_cycles: int, seed: RngSeed) -> CoupledTrace:
    """Shared-clock busy cycles of two SIS reactors with infected input
    fractions p <= p_hat.

    Customers fall in three classes: C1 infected in both systems, C2
    susceptible in the low-p system and infected in the high-p one, C3
    susceptible in both. Population paths coincide; infected departures of
    the low system never exceed the high system's within any cycle."""
    if not 0.0 <= p <= p_hat <= 1.0:
        raise ValidationError(f"need 0 <= p <= p_hat <= 1, got {p}, {p_hat}")
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    u = UniformBuffer(seed.generator())
    out = CoupledTrace(n_cycles=n_cycles)
    events = 0
    for cycle in range(n_cycles):
        # First arrival of the cycle.
        u0 = u.next()
        c1 = 1 if u0 <= p else 0
        c2 = 1 if p < u0 <= p_hat else 0
        c3 = 1 if u0 > p_hat else 0
        d_i = d_i_hat = d = 0
        while c1 + c2 + c3 > 0:
            n = c1 + c2 + c3
            r_arr = lam
            r_dep = mu * n
            r_rec = beta * (c1 + c2)
            r_a12 = alpha * c1 * c2
            r_a13 = alpha * c1 * c3
            r_a23 = alpha * c2 * c3
            total = r_arr + r_dep + r_rec + r_a12 + r_a13 + r_a23
            pick = u.next() * total
            events += 1
            if pick < r_arr:
                ua = u.next()
                if ua <= p:
                    c1 += 1
                elif ua <= p_hat:
                    c2 += 1
                else:
                    c3 += 1
            elif pick < r_arr + r_dep:
                # Uniform customer departs in both systems.
                which = (pick - r_arr) / mu
                d += 1
                if which < c1:
                    c1 -= 1
                    d_i += 1
                    d_i_hat += 1
                elif which < c1 + c2:
                    c2 -= 1
                    d_i_hat += 1
                else:
                    c3 -= 1
            elif pick < r_arr + r_dep + r_rec:
                which = (pick - r_arr - r_dep) / beta
                if which < c1:
                    c1 -= 1
                else:
                    c2 -= 1
                c3 += 1
            elif pick < r_arr + r_dep + r_rec + r_a12:
                # Infected-in-both infects a C2 customer in the low system.
                c2 -= 1
                c1 += 1
            elif pick < r_arr + r_dep + r_rec + r_a12 + r_a13:
                c3 -= 1
                c1 += 1
            else:
                c3 -= 1
                c2 += 1
            if min(c1, c2, c3) < 0 or d_i > d_i_hat:
                raise CouplingViolationError(
                    f"dominance broken in cycle {cycle}: classes "
                    f"({c1}, {c2}, {c3}), D_I={d_i}, D_I_hat={d_i_hat}",
                    [(events, "state", (c1, c2, c3, d_i, d_i_hat))])
        out.d_i_low += d_i
        out.d_i_high += d_i_hat
        out.d_total += d
        if d_i < d_i_hat:
            out.strict_events += 1
    out.n_events = events
    out.strict_fraction = out.strict_events / n_cycles if n_cycles else 0.0
    return out


def _pick3(which: float, a: int, b: int) -> int:
    """Index of the class containing `which` among sizes (a, b, rest)."""
    if which < a:
        return 0
    if which < a + b:
        return 1
    return 2


def coupled_alpha_monotonicity(alpha1: float, alpha2: float,
                               params: ModelParams, n_events: int,
                               seed: RngSeed, closed: bool = False,
                               N: int | None = None,
                               K: int | None = None) -> CoupledTrace:
    """Shared-clock run of two SIS systems with infection rates
    alpha1 <= alpha2; the alpha2-clocks are thinned by alpha1/alpha2 for the
    low-alpha system. Asserts Y1(t) <= Y2(t) and equal populations."""
    if not 0 < alpha1 <= alpha2:
        raise ValidationError(
            f"need 0 < alpha1 <= alpha2, got {alpha1}, {alpha2}")
    if closed:
        return _closed_pair_run("alpha", alpha1, alpha2, params, n_events,
                                seed, N, K)
    lam, mu, beta, p = params.lam, params.mu, params.beta, params.p
    thin = alpha1 / alpha2
    u = UniformBuffer(seed.generator())
    # Classes: ii infected in both, si susceptible in low / infected in high,
    # ss susceptible in both. Y1 = ii <= Y2 = ii + si structurally; the
    # checks below catch any implementation error.
    ii = si = ss = 0
    out = CoupledTrace()
    for step in range(n_events):
        n = ii + si + ss
        y2 = ii + si
        r_arr = lam
        r_dep = mu * n
        r_rec = beta * y2
        r_inf = alpha2 * y2 * ss + alpha2 * ii * si
        total = r_arr + r_dep + r_rec + r_inf
        pick = u.next() * total
        if pick < r_arr:
            if u.next() < p:
                ii += 1
            else:
                ss += 1
        elif pick < r_arr + r_dep:
            k = _pick3((pick - r_arr) / mu, ii, si)
            if k == 0:
                ii -= 1
            elif k == 1:
                si -= 1
            else:
                ss -= 1
        elif pick < r_arr + r_dep + r_rec:
            if (pick - r_arr - r_dep) / beta < ii:
                ii -= 1
            else:
                si -= 1
            ss += 1
        else:
            r = pick - r_arr - r_dep - r_rec
            if r < alpha2 * ii * ss:
                # Infector infected in both; target susceptible in both.
                ss -= 1
                if u.next() < thin:
                    ii += 1
                else:
                    si += 1
            elif r < alpha2 * y2 * ss:
                # Infector infected only in the high system.
                ss -= 1
                si += 1
            else:
                # Infector in both, target already infected in the high
                # system: the thinned clock may infect it in the low one.
                if u.next() < thin:
                    si -= 1
                    ii += 1
        if min(ii, si, ss) < 0:
            raise CouplingViolationError(
                f"negative class count at step {step}: ({ii}, {si}, {ss})")
        if si > 0:
            out.strict_events += 1
    out.n_events = n_events
    out.strict_fraction = out.strict_events / n_events
    return out


def coupled_beta_monotonicity(beta1: float, beta2: float, params: ModelParams,
                              n_events: int, seed: RngSeed,
                              closed: bool = False, N: int | None = None,
                              K: int | None = None) -> CoupledTrace:
    """Shared-clock run of two SIS systems with recovery rates beta1 > beta2:
    the beta1-clocks recover the high-recovery system always and the other
    one with probability beta2/beta1, so Y1(t) <= Y2(t)."""
    if not 0 < beta2 < beta1:
        raise ValidationError(f"need beta1 > beta2 > 0, got {beta1}, {beta2}")
    if closed:
        return _closed_pair_run("beta", beta1, beta2, params, n_events,
                                seed, N, K)
    lam, mu, alpha, p = params.lam, params.mu, params.alpha, params.p
    thin = beta2 / beta1
    u = UniformBuffer(seed.generator())
    ii = si = ss = 0  # si: susceptible in system 1 (high beta), infected in 2
    out = CoupledTrace()
    for step in range(n_events):
        y2 = ii + si
        n = y2 + ss
        r_arr = lam
        r_dep = mu * n
        r_rec = beta1 * y2
        r_inf = alpha * (y2 * ss + ii * si)
        total = r_arr + r_dep + r_rec + r_inf
        pick = u.next() * total
        if pick < r_arr:
            if u.next() < p:
                ii += 1
            else:
                ss += 1
        elif pick < r_arr + r_dep:
            k = _pick3((pick - r_arr) / mu, ii, si)
            if k == 0:
                ii -= 1
            elif k == 1:
                si -= 1
            else:
                ss -= 1
        elif pick < r_arr + r_dep + r_rec:
            if (pick - r_arr - r_dep) / beta1 < ii:
                # System 1 recovers for sure; system 2 only if thinned in.
                ii -= 1
                if u.next() < thin:
                    ss += 1
                else:
                    si += 1
            else:
                if u.next() < thin:
                    si -= 1
                    ss += 1
        else:
            r = pick - r_arr - r_dep - r_rec
            if r < alpha * ii * ss:
                ss -= 1
                ii += 1  # infected in both (same alpha clock, both active)
            elif r < alpha * y2 * ss:
                ss -= 1
                si += 1
            else:
                # Infector infected in both, target infected only in 2: the
                # system-1 infection turns it infected in both.
                si -= 1
                ii += 1
        if min(ii, si, ss) < 0:
            raise CouplingViolationError(
                f"negative class count at step {step}: ({ii}, {si}, {ss})")
        if si > 0:
            out.strict_events += 1
    out.n_events = n_events
    out.strict_fraction = out.strict_events / n_events
    return out


def _closed_pair_run(mode: str, v1: float, v2: float, params: ModelParams,
                     n_events: int, seed: RngSeed, N: int | None,
                     K: int | None) -> CoupledTrace:
    """Closed-network analogue: K customers on N stations with shared
    migration and routing; infection is pairwise within a station."""
    if N is None or N < 2 or K is None or K < 1:
        raise ValidationError("closed coupling needs N >= 2 and K >= 1")
    lam, mu, beta, alpha = params.lam, params.mu, params.beta, params.alpha
    if mode == "alpha":
        alpha_hi, thin = v2, v1 / v2
        beta_hi, beta_thin = beta, 1.0
    else:
        alpha_hi, thin = alpha, 1.0
        beta_hi, beta_thin = v1, v2 / v1
    u = UniformBuffer(seed.generator())
    # Per-customer shared station and class; start half infected in both.
    station = [int(u.next() * N) for _ in range(K)]
    cls = [0 if c < (K + 1) // 2 else 2 for c in range(K)]  # 0=ii 1=si 2=ss
    out = CoupledTrace()

    def station_counts():
        per = [[0, 0, 0] for _ in range(N)]
        for s, c in zip(station, cls):
            per[s][c] += 1
        return per

    for step in range(n_events):
        per = station_counts()
        y2 = sum(1 for c in cls if c != 2)
        r_mig = mu * K
        r_rec = beta_hi * y2
        r_inf = alpha_hi * sum((p_[0] + p_[1]) * p_[2] + p_[0] * p_[1]
                               for p_ in per)
        total = r_mig + r_rec + r_inf
        if total <= 0:
            break
        pick = u.next() * total
        if pick < r_mig:
            c = int((pick / mu))
            c = min(c, K - 1)
            dest = int(u.next() * (N - 1))
            station[c] = dest + 1 if dest >= station[c] else dest
        elif pick < r_mig + r_rec:
            target = (pick - r_mig) / beta_hi
            idx = _nth_with(cls, lambda v: v != 2, int(target))
            if cls[idx] == 0:
                cls[idx] = 2  # system 1 recovers for sure
                if mode == "beta" and u.next() >= beta_thin:
                    cls[idx] = 1  # system 2 keeps it infected
            else:
                if u.next() < beta_thin:
                    cls[idx] = 2
        else:
            r = pick - r_mig - r_rec
            s = 0
            while True:
                p_ = per[s]
                w = alpha_hi * ((p_[0] + p_[1]) * p_[2] + p_[0] * p_[1])
                if r < w:
                    break
                r -= w
                s += 1
            p_ = per[s]
            r /= alpha_hi
            inf2 = p_[0] + p_[1]  # infected in the dominating system
            if r < inf2 * p_[2]:
                # Target susceptible in both; infector uniform over inf2.
                target_n, r2 = divmod(r, inf2)
                infector_ii = r2 < p_[0]
                idx = _nth_at(cls, station, s, 2, int(target_n))
                if infector_ii and u.next() < thin:
                    cls[idx] = 0
                else:
                    cls[idx] = 1
            else:
                # Infector infected in both, target infected only in the
                # dominating system: thinned clock may infect it in the other.
                target_n = int((r - inf2 * p_[2]) / max(p_[0], 1))
                idx = _nth_at(cls, station, s, 1, target_n)
                if u.next() < thin:
                    cls[idx] = 0
        if len(station) != K:
            raise CouplingViolationError("population not conserved")
        if any(c not in (0, 1, 2) for c in cls):
            raise CouplingViolationError(f"bad class at step {step}")
        if any(c == 1 for c in cls):
            out.strict_events += 1
    out.n_events = n_events
    out.strict_fraction = out.strict_events / max(n_events, 1)
    return out


def _nth_with(cls: list[int], pred, n: int) -> int:
    k = 0
    for i, c in enumerate(cls):
        if pred(c):
            if k == n:
                return i
            k += 1
    raise CouplingViolationError("event targeted a missing customer")


def _nth_at(cls: list[int], station: list[int], s: int, want: int,
            n: int) -> int:
    k = 0
    for i, (c, st) in enumerate(zip(cls, station)):
        if st == s and c == want:
            if k == n:
                return i
            k += 1
    raise CouplingViolationError("event targeted a missing customer")


GREEN, MAGENTA, RED = 0, 1, 2


@dataclass
class ColorState:
    colors: list[int | None]  # per-server color, None = empty

    def counts(self) -> tuple[int, int, int]:
        g = m = r = 0
        for c in self.colors:
            if c == GREEN:
                g += 1
            elif c == MAGENTA:
                m += 1
            elif c == RED:
                r += 1
        return g, m, r


@dataclass
class ThreeColorSummary:
    n_cycles: int
    d_total: int
    d_green: int
    d_magenta: int
    d_green_hat: int
    d_magenta_hat: int
    per_cycle: list[tuple[int, int, int, int, int]]  # D, Dg, Dm, Dg^, Dm^
    strict_events: int
    merge_checks: int
    violations: int = 0

    @property
    def gap_low(self) -> float:
        """(E D_m / E D) estimate: g(p+r) - g(p) for the low-p system."""
        return self.d_magenta / self.d_total if self.d_total else 0.0

    @property
    def gap_high(self) -> float:
        return self.d_magenta_hat / self.d_total if self.d_total else 0.0


def _two_color_arrival(u0: float, red_threshold_lo: float,
                       red_threshold_hi: float) -> int:
    """Red iff u0 in (lo, hi]; used for the merged two-color models."""
    return RED if red_threshold_lo < u0 <= red_threshold_hi else GREEN


def three_color_run(p: float, r: float, params: ModelParams, n_cycles: int,
                    seed: RngSeed, p_hat: float | None = None) -> ThreeColorSummary:
    """Server-location 3-color dynamics over busy cycles, with the merged
    two-color processes checked event-for-event on the same clocks.

    Arrival colors: magenta if u <= r, red if r < u <= r+p, green otherwise.
    A red infector recolors its target red; a magenta infector recolors green
    (or magenta) targets magenta and leaves red targets red; recovery turns
    any customer green. Merging magenta into green yields the (p, r+q)
    two-color model; merging magenta into red yields the (r+p, q) model.
    When p_hat > p is supplied the hat system runs on the same clocks and
    N_m_hat(t) <= N_m(t) is asserted pathwise."""
    if p < 0 or r <= 0 or p + r > 1:
        raise ValidationError(f"need p >= 0, r > 0, p + r <= 1; got {p}, {r}")
    if p_hat is None:
        p_hat = p
    if not p <= p_hat <= 1 - r:
        raise ValidationError(f"need p <= p_hat <= 1 - r, got {p_hat}")
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    u = UniformBuffer(seed.generator())

    per_cycle = []
    d_tot = dg = dm = dg_h = dm_h = 0
    strict = 0
    merge_checks = 0

    for cycle in range(n_cycles):
        servers: list[int | None] = []       # low-p 3-color
        servers_h: list[int | None] = []     # high-p 3-color
        # Direct two-color models on the same clocks: red-arrival windows.
        m1: list[int | None] = []            # (p, r+q): red iff r < u <= r+p
        m2: list[int | None] = []            # (r+p, q): red iff u <= r+p
        m1h: list[int | None] = []
        m2h: list[int | None] = []
        all_models = (servers, servers_h, m1, m2, m1h, m2h)

        def occupy(u0: float) -> None:
            c = MAGENTA if u0 <= r else (RED if u0 <= r + p else GREEN)
            ch = MAGENTA if u0 <= r else (RED if u0 <= r + p_hat else GREEN)
            news = (c, ch,
                    _two_color_arrival(u0, r, r + p),
                    _two_color_arrival(u0, 0.0, r + p),
                    _two_color_arrival(u0, r, r + p_hat),
                    _two_color_arrival(u0, 0.0, r + p_hat))
            slot = next((i for i, v in enumerate(servers) if v is None), None)
            for model, col in zip(all_models, news):
                if slot is None:
                    model.append(col)
                else:
                    model[slot] = col
        cd = [0, 0, 0, 0, 0]  # D, Dg, Dm, Dg_hat, Dm_hat

        occupy(u.next())
        while any(v is not None for v in servers):
            occupied = [i for i, v in enumerate(servers) if v is not None]
            n = len(occupied)
            r_arr = lam
            r_dep = mu * n
            r_rec = beta * n          # recovery clocks on every occupied slot
            r_inf = alpha * n * (n - 1)
            total = r_arr + r_dep + r_rec + r_inf
            pick = u.next() * total
            if pick < r_arr:
                occupy(u.next())
            elif pick < r_arr + r_dep:
                z = occupied[int((pick - r_arr) / mu) % n]
                cd[0] += 1
                if servers[z] == GREEN:
                    cd[1] += 1
                elif servers[z] == MAGENTA:
                    cd[2] += 1
                if servers_h[z] == GREEN:
                    cd[3] += 1
                elif servers_h[z] == MAGENTA:
                    cd[4] += 1
                for model in all_models:
                    model[z] = None
            elif pick < r_arr + r_dep + r_rec:
                z = occupied[int((pick - r_arr - r_dep) / beta) % n]
                for model in all_models:
                    model[z] = GREEN
            else:
                k = int((pick - r_arr - r_dep - r_rec) / alpha) % (n * (n - 1))
                zi, vi = divmod(k, n - 1)
                z = occupied[zi]
                v = occupied[vi if vi < zi else vi + 1]
                for model in all_models:
                    src, dst = model[z], model[v]
                    if src == RED:
                        model[v] = RED
                    elif src == MAGENTA and dst != RED:
                        model[v] = MAGENTA
            # Merge consistency, event for event.
            merge_checks += 1
            for z in range(len(servers)):
                c, ch = servers[z], servers_h[z]
                if _merge(c, MAGENTA, GREEN) != m1[z] \
                        or _merge(c, MAGENTA, RED) != m2[z] \
                        or _merge(ch, MAGENTA, GREEN) != m1h[z] \
                        or _merge(ch, MAGENTA, RED) != m2h[z]:
                    raise CouplingViolationError(
                        f"merge mismatch at cycle {cycle}, server {z}")
                if ch == MAGENTA and c != MAGENTA:
                    raise CouplingViolationError(
                        f"magenta dominance broken at cycle {cycle}, "
                        f"server {z}: low {c}, high {ch}")
        d_tot += cd[0]
        dg += cd[1]
        dm += cd[2]
        dg_h += cd[3]
        dm_h += cd[4]
        per_cycle.append(tuple(cd))
        if cd[2] > cd[4]:
            strict += 1
    return ThreeColorSummary(n_cycles=n_cycles, d_total=d_tot, d_green=dg,
                             d_magenta=dm, d_green_hat=dg_h,
                             d_magenta_hat=dm_h, per_cycle=per_cycle,
                             strict_events=strict, merge_checks=merge_checks)


def _merge(color: int | None, a: int, into: int) -> int | None:
    if color is None:
        return None
    return into if color == a else color
