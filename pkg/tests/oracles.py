"""Reference computations used only by the tests.

Each one is written from the definitions, without reusing package numerics.
"""

import math

import numpy as np


def power_iteration(P, tol=1e-14, max_iter=1_000_000):
    """Stationary vector of an aperiodic chain by repeated left multiplication.

    Uses the lazy chain (P + I)/2, which has the same stationary vector and
    converges even when P is periodic.
    """
    P = np.asarray(P, dtype=float)
    lazy = 0.5 * (P + np.eye(len(P)))
    pi = np.full(len(P), 1.0 / len(P))
    for _ in range(max_iter):
        nxt = pi @ lazy
        if np.abs(nxt - pi).max() < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise RuntimeError("power iteration did not converge")


def binomial_tail(n, s, p):
    """Pr(X >= s) for X ~ Binomial(n, p) by direct summation."""
    return math.fsum(math.comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(s, n + 1))


def simulate_battery(e_max, harvest_prob, pmf, n_steps, seed, harvest_units=1):
    """Empirical level frequencies of the harvest-then-consume battery walk."""
    rng = np.random.default_rng(seed)
    costs = np.array(sorted(pmf))
    probs = np.array([pmf[c] for c in costs])
    gains = (rng.random(n_steps) < harvest_prob).astype(np.int64) * harvest_units
    drains = costs[rng.choice(len(costs), size=n_steps, p=probs)]
    counts = np.zeros(e_max + 1)
    b = e_max
    for g, c in zip(gains.tolist(), drains.tolist()):
        b = min(max(b + g - c, 0), e_max)
        counts[b] += 1
    return counts / n_steps


def nearest_scan(point, positions):
    """Index of the closest position, lowest index on ties."""
    best, best_d = -1, math.inf
    for i, (x, y) in enumerate(positions):
        d = math.hypot(x - point[0], y - point[1])
        if d < best_d:
            best, best_d = i, d
    return best


def window_sum(on, drx, alpha, weighted):
    total = 0.0
    for i in range(1, on + 1):
        w = (1 - alpha) ** i if weighted else 1.0
        total += w * (on - i) / (drx - i)
    return total
