"""Brute-force oracles independent of the simulators.

The truncated SIS reactor (arrivals blocked at x + y = cap) has a small state
space whose stationary distribution is a dense linear solve. Every audit
identity holds exactly on the untruncated chain; on the truncated one the
residual is bounded by the blocking probability, so for small enough eta the
dense solve validates the identity formulas to near machine precision.
"""

from __future__ import annotations

import math

import numpy as np

from migrasim.core import ModelParams


def sis_states(cap: int) -> list[tuple[int, int]]:
    return [(x, y) for x in range(cap + 1) for y in range(cap + 1 - x)]


def truncated_sis_generator(params: ModelParams, cap: int) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Dense generator of the SIS reactor with arrivals blocked at x+y=cap."""
    states = sis_states(cap)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    Q = np.zeros((n, n))
    lam, mu, alpha, beta = params.lam, params.mu, params.alpha, params.beta
    p, q = params.p, params.q
    for (x, y), i in index.items():
        moves = []
        if x + y < cap:
            moves.append(((x, y + 1), lam * p))
            moves.append(((x + 1, y), lam * q))
        if x > 0:
            moves.append(((x - 1, y), mu * x))
        if y > 0:
            moves.append(((x, y - 1), mu * y))
            moves.append(((x + 1, y - 1), beta * y))
        if x > 0 and y > 0:
            moves.append(((x - 1, y + 1), alpha * x * y))
        for target, rate in moves:
            if rate > 0:
                Q[i, index[target]] += rate
                Q[i, i] -= rate
    return Q, states


def truncated_sis_stationary(params: ModelParams, cap: int):
    """Stationary distribution of the truncated reactor by dense solve.

    Returns (pi, states) with pi indexed like states."""
    Q, states = truncated_sis_generator(params, cap)
    n = Q.shape[0]
    # pi Q = 0 with normalization: replace the last balance column.
    A = Q.T.copy()
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    return pi, states


def expectation(pi: np.ndarray, states, f) -> float:
    return float(sum(w * f(x, y) for w, (x, y) in zip(pi, states)))


def moment_dict(pi: np.ndarray, states) -> dict[str, float]:
    """Exact moments keyed like the simulator's time-average names."""
    powers = {"x": (1, 0), "y": (0, 1), "x2": (2, 0), "y2": (0, 2),
              "xy": (1, 1), "x2y": (2, 1), "xy2": (1, 2)}
    return {name: expectation(pi, states, lambda x, y, i=i, j=j: x ** i * y ** j)
            for name, (i, j) in powers.items()}


def total_count_marginal(pi: np.ndarray, states, cap: int) -> np.ndarray:
    out = np.zeros(cap + 1)
    for w, (x, y) in zip(pi, states):
        out[x + y] += w
    return out


def truncated_poisson_pmf(mean: float, cap: int) -> np.ndarray:
    """Stationary law of the loss-system total count (independent oracle)."""
    pmf = np.array([mean ** n / math.factorial(n) for n in range(cap + 1)])
    return pmf / pmf.sum()
