"""Shared domain types, deterministic RNG streams, and regenerative statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Hard-coded normal quantiles for the common confidence levels.
_Z_TABLE = {
    0.90: 1.6448536269514722,
    0.95: 1.959963984540054,
    0.99: 2.5758293035489004,
}

# State counts are hard-capped; silent wraparound would bias moments.
COUNT_CAP = 2**32 - 1


class ValidationError(ValueError):
    """A parameter failed its contract; the message names the field."""


class NumericalError(RuntimeError):
    """A tolerance or bracket could not be achieved."""


def z_quantile(ci_level: float) -> float:
    """Two-sided normal quantile z such that P(|Z| <= z) = ci_level."""
    if not 0.0 < ci_level < 1.0:
        raise ValidationError(f"ci_level out of range: {ci_level}")
    if ci_level in _Z_TABLE:
        return _Z_TABLE[ci_level]
    return _norm_ppf(0.5 + ci_level / 2.0)


def _norm_ppf(p: float) -> float:
    """Acklam's rational approximation of the standard normal quantile.

    Absolute error below 1.15e-9 over (0, 1); good enough for CI half-widths.
    """
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    if p > 1 - p_low:
        return -_norm_ppf(1 - p)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)


@dataclass(frozen=True)
class ModelParams:
    """All rate parameters for one reactor/network variant.

    lam, mu, alpha, beta, nu are rates (1/time); p is the infected input
    fraction; eta = lam/mu and q = 1 - p are derived.
    """
    lam: float
    mu: float
    alpha: float
    beta: float
    nu: float
    p: float
    eta: float
    q: float

    def replace(self, **kwargs) -> "ModelParams":
        base = dict(lam=self.lam, mu=self.mu, alpha=self.alpha, beta=self.beta,
                    p=self.p)
        nu = kwargs.pop("nu", self.nu)
        base.update(kwargs)
        return derive_params(**base, nu=nu)


def derive_params(lam: float, mu: float, alpha: float, beta: float, p: float,
                  nu: float | None = None) -> ModelParams:
    """Validate raw rates and derive eta, q; nu defaults to mu + beta."""
    for name, value in (("lam", lam), ("mu", mu), ("alpha", alpha), ("beta", beta)):
        if not value > 0:
            raise ValidationError(f"{name} must be > 0, got {value}")
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p out of range [0, 1]: {p}")
    if nu is None:
        nu = mu + beta
    if not nu > 0:
        raise ValidationError(f"nu must be > 0, got {nu}")
    return ModelParams(lam=float(lam), mu=float(mu), alpha=float(alpha),
                       beta=float(beta), nu=float(nu), p=float(p),
                       eta=float(lam) / float(mu), q=1.0 - float(p))


@dataclass(frozen=True)
class ReactorState:
    """Counts of susceptible (x) and infected (y) customers."""
    x: int
    y: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValidationError(f"negative state: ({self.x}, {self.y})")


@dataclass(frozen=True)
class CycleStats:
    """Per-busy-cycle tallies."""
    duration: float
    departures: int
    infected_departures: int

    def __post_init__(self):
        if not (0 <= self.infected_departures <= self.departures):
            raise ValidationError(
                f"infected_departures {self.infected_departures} outside "
                f"[0, {self.departures}]")
        if self.duration <= 0:
            raise ValidationError(f"duration must be > 0: {self.duration}")
        if self.departures < 1:
            raise ValidationError("a busy cycle serves at least one customer")


@dataclass(frozen=True)
class Estimate:
    """Monte-Carlo point estimate with a normal-approximation CI."""
    value: float
    std_error: float
    n: int
    ci_level: float = 0.95
    defined: bool = True

    def half_width(self) -> float:
        return z_quantile(self.ci_level) * self.std_error

    def ci(self) -> tuple[float, float]:
        h = self.half_width()
        return (self.value - h, self.value + h)

    def contains(self, target: float) -> bool:
        lo, hi = self.ci()
        return lo <= target <= hi

    @staticmethod
    def undefined(ci_level: float = 0.95) -> "Estimate":
        return Estimate(value=math.nan, std_error=math.nan, n=0,
                        ci_level=ci_level, defined=False)

    @staticmethod
    def from_samples(samples: Sequence[float], ci_level: float = 0.95) -> "Estimate":
        arr = np.asarray(samples, dtype=float)
        n = arr.size
        if n == 0:
            return Estimate.undefined(ci_level)
        if n == 1:
            return Estimate(float(arr[0]), math.inf, 1, ci_level)
        se = float(arr.std(ddof=1) / math.sqrt(n))
        return Estimate(float(arr.mean()), se, n, ci_level)


@dataclass(frozen=True)
class RngSeed:
    """Deterministic stream identifier: same (seed, stream_id) => same path."""
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        # Philox is counter-based, so streams are independent by construction
        # and results do not depend on how work is split across workers.
        ss = np.random.SeedSequence(entropy=self.seed,
                                    spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, offset: int) -> "RngSeed":
        return RngSeed(self.seed, self.stream_id + offset)


class UniformBuffer:
    """Buffered scalar uniforms on top of a numpy Generator.

    Event loops draw uniforms one at a time; blocking the draws amortizes the
    Generator call overhead without changing the stream.
    """

    __slots__ = ("_rng", "_buf", "_i", "_n")

    def __init__(self, rng: np.random.Generator, block: int = 8192):
        self._rng = rng
        self._n = block
        self._buf = rng.random(block)
        self._i = 0

    def next(self) -> float:
        i = self._i
        if i >= self._n:
            self._buf = self._rng.random(self._n)
            i = 0
        self._i = i + 1
        return self._buf[i]

    def exponential(self, rate: float) -> float:
        return -math.log1p(-self.next()) / rate


def ratio_estimate(numerators: Sequence[float], denominators: Sequence[float],
                   ci_level: float = 0.95) -> Estimate:
    """Ratio-of-means estimate with delta-method standard error.

    This is the regenerative (busy-cycle) estimator: value is
    mean(numerators)/mean(denominators) and the SE accounts for the
    correlation between the two per-cycle tallies.
    """
    num = np.asarray(numerators, dtype=float)
    den = np.asarray(denominators, dtype=float)
    if num.shape != den.shape:
        raise ValidationError(
            f"length mismatch: {num.shape} numerators vs {den.shape} denominators")
    n = num.size
    if n < 2:
        raise ValidationError("need at least 2 cycles for a ratio estimate")
    mean_den = den.mean()
    if mean_den <= 0:
        raise ValidationError("mean denominator must be > 0")
    mean_num = num.mean()
    r = mean_num / mean_den
    # Delta method on (mean_num, mean_den).
    s_nn = num.var(ddof=1)
    s_dd = den.var(ddof=1)
    s_nd = float(np.cov(num, den, ddof=1)[0, 1])
    var = (s_nn - 2.0 * r * s_nd + r * r * s_dd) / (n * mean_den * mean_den)
    se = math.sqrt(max(var, 0.0))
    return Estimate(value=float(r), std_error=se, n=n, ci_level=ci_level)


def batch_means(values: Sequence[float], weights: Sequence[float] | None = None,
                ci_level: float = 0.95) -> Estimate:
    """Estimate from per-batch means (weights = batch durations)."""
    arr = np.asarray(values, dtype=float)
    n = arr.size
    if n < 2:
        return Estimate(float(arr.mean()) if n else math.nan, math.inf,
                        max(n, 0), ci_level, defined=n > 0)
    if weights is None:
        mean = float(arr.mean())
    else:
        w = np.asarray(weights, dtype=float)
        mean = float(np.average(arr, weights=w))
    se = float(arr.std(ddof=1) / math.sqrt(n))
    return Estimate(mean, se, n, ci_level)


def difference(a: Estimate, b: Estimate, ci_level: float = 0.95) -> Estimate:
    """a - b assuming independence (joint CI via summed variances)."""
    if not (a.defined and b.defined):
        return Estimate.undefined(ci_level)
    se = math.hypot(a.std_error, b.std_error)
    return Estimate(a.value - b.value, se, min(a.n, b.n), ci_level)
