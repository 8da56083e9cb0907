"""Battery-level Markov chain, its stationary solution, and the coupled
state/battery fixed point.

Levels sit on a grid of ``quantum`` energy units from 0 to ``e_max``. Each
TTI the battery gains ``harvest_units`` with probability ``harvest_prob`` and,
independently, loses ``c`` units with probability ``consumption_pmf[c]``; the
net result is clamped to the grid, so no probability mass leaves it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .dynamics import HarvestModel, build_transition_matrix, mean_sensing_power, state_stationary
from .errors import ConfigError, DomainError, IterationLimitError
from .markov import stationary_distribution
from .model import DutyCycleConfig
from .special import reg_incomplete_beta


class UnreachableThresholdWarning(UserWarning):
    """Requested battery threshold is above the battery capacity."""


@dataclass(frozen=True)
class BatteryChain:
    levels: np.ndarray  # energy held at each chain state
    transition: np.ndarray
    harvest_prob: float
    consumption_pmf: Mapping[int, float]
    quantum: int = 1
    harvest_units: int = 1

    @property
    def n_states(self) -> int:
        return len(self.levels)

    @property
    def e_max(self) -> int:
        return int(self.levels[-1])


@dataclass(frozen=True)
class BatteryDistribution:
    levels: np.ndarray
    probabilities: np.ndarray

    @property
    def e_max(self) -> int:
        return int(self.levels[-1])

    def mean(self) -> float:
        return float(self.levels @ self.probabilities)


def _check_pmf(pmf: Mapping[int, float]) -> dict[int, float]:
    if not pmf:
        raise ConfigError("consumption pmf is empty")
    clean = {}
    for c, p in pmf.items():
        if int(c) != c or c < 0:
            raise ConfigError(f"consumption amounts must be non-negative integers, got {c!r}")
        if p < 0:
            raise ConfigError(f"negative probability {p} for consumption {c}")
        clean[int(c)] = clean.get(int(c), 0.0) + float(p)
    total = sum(clean.values())
    if abs(total - 1.0) > 1e-9:
        raise ConfigError(f"consumption pmf sums to {total!r}, expected 1")
    return clean


def build_battery_chain(
    e_max: int,
    quantum: int,
    harvest_prob: float,
    consumption_pmf: Mapping[int, float],
    harvest_units: int | None = None,
) -> BatteryChain:
    """Transition matrix of the battery level.

    Consumption amounts and ``e_max`` that are not multiples of ``quantum`` are
    truncated down to the grid.
    """
    if e_max < 1:
        raise ConfigError(f"e_max must be >= 1, got {e_max}")
    if quantum < 1:
        raise ConfigError(f"quantum must be >= 1, got {quantum}")
    if not 0.0 <= harvest_prob <= 1.0:
        raise ConfigError(f"harvest_prob must lie in [0, 1], got {harvest_prob}")
    pmf = _check_pmf(consumption_pmf)
    harvest_units = quantum if harvest_units is None else int(harvest_units)

    top = e_max // quantum
    n = top + 1
    up = harvest_units // quantum
    T = np.zeros((n, n))
    idx = np.arange(n)
    for gain, p_gain in ((up, harvest_prob), (0, 1.0 - harvest_prob)):
        if p_gain == 0.0:
            continue
        for c, p_c in pmf.items():
            if p_c == 0.0:
                continue
            dest = np.clip(idx + gain - c // quantum, 0, top)
            np.add.at(T, (idx, dest), p_gain * p_c)
    return BatteryChain(
        levels=idx * quantum,
        transition=T,
        harvest_prob=float(harvest_prob),
        consumption_pmf=pmf,
        quantum=quantum,
        harvest_units=harvest_units,
    )


def battery_stationary(chain: BatteryChain) -> BatteryDistribution:
    return BatteryDistribution(chain.levels.copy(), stationary_distribution(chain.transition))


def pr_battery_at_least(dist: BatteryDistribution, threshold: float) -> float:
    """Stationary probability that the battery holds at least ``threshold`` units."""
    if threshold > dist.e_max:
        warnings.warn(
            f"threshold {threshold} exceeds battery capacity {dist.e_max}; transmission can never occur",
            UnreachableThresholdWarning,
            stacklevel=2,
        )
        return 0.0
    if threshold < 0:
        raise DomainError(f"threshold must be non-negative, got {threshold}")
    return float(min(1.0, dist.probabilities[dist.levels >= threshold].sum()))


@dataclass(frozen=True)
class SemiClosedTransmit:
    binomial: float  # the binomial sum evaluated as written
    beta_form: float  # I_{1 - p_enter}(e_tx + 1, e_max + 1)


def pr_transmit_semiclosed(p_enter: float, e_tx: int, e_max: int) -> SemiClosedTransmit:
    """Closed-form reference value for the transmit-capability probability.

    ``binomial`` is ``sum_{x=e_tx}^{e_max} C(x, e_tx) p^e_tx (1-p)^(x-e_tx)``
    with ``p = p_enter``. It is not normalised and can exceed 1 when
    ``p_enter`` is small; it is reported as computed. The stationary battery
    solve remains the reference for simulation and analysis.
    """
    if not 0.0 <= p_enter <= 1.0:
        raise DomainError(f"p_enter must lie in [0, 1], got {p_enter}")
    if not (0 < e_tx <= e_max):
        raise DomainError(f"need 0 < e_tx <= e_max, got e_tx={e_tx} e_max={e_max}")
    q = 1.0 - p_enter
    total = 0.0
    for x in range(e_tx, e_max + 1):
        total += math.comb(x, e_tx) * p_enter**e_tx * q ** (x - e_tx)
    beta = reg_incomplete_beta(q, e_tx + 1, e_max + 1)
    return SemiClosedTransmit(binomial=total, beta_form=beta)


@dataclass
class FixedPoint:
    occupancy: np.ndarray
    battery: BatteryDistribution
    p_tx_capable: float
    iterations: int
    trace: list[float] = field(default_factory=list)


def consumption_pmf_from_occupancy(occupancy, e_idle: int, e_tx: int) -> dict[int, float]:
    """S1 and S2 cost ``e_idle``, S3 costs ``e_tx``, S4 is free."""
    pi = np.asarray(occupancy, dtype=float)
    pmf: dict[int, float] = {}
    for cost, p in ((e_idle, pi[0] + pi[1]), (e_tx, pi[2]), (0, pi[3])):
        pmf[int(cost)] = pmf.get(int(cost), 0.0) + float(p)
    total = sum(pmf.values())
    return {c: p / total for c, p in pmf.items()}


def coupled_fixed_point(
    duty: DutyCycleConfig,
    alpha: float,
    harvest: HarvestModel | float,
    e_idle: int,
    e_tx: int,
    e_max: int,
    *,
    p_detect: float | None = None,
    p_wake: float = 0.0,
    area: tuple[float, float] = (20.0, 20.0),
    eta: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 1000,
) -> FixedPoint:
    """Jointly consistent state occupancy and battery distribution.

    The S2 -> S3 probability is the stationary chance of holding ``e_tx``
    units, and the battery drain depends on the state occupancy. Starting from
    ``p_tx_capable = 1`` the two are iterated until successive values differ by
    at most ``tol``. When iterates start to oscillate the next guess is the
    mean of the last two.

    ``harvest`` is either a :class:`HarvestModel` or a bare per-TTI harvest
    probability (one-unit quanta).
    """
    if isinstance(harvest, HarvestModel):
        h_prob, h_units = harvest.active_prob, harvest.quantum
    else:
        h_prob, h_units = float(harvest), 1
    if p_detect is None:
        p_detect = mean_sensing_power(area[0], area[1], eta)

    trace: list[float] = []
    guess = 1.0
    prev_step = 0.0
    for it in range(1, max_iter + 1):
        P = build_transition_matrix(duty, alpha, p_detect, p_wake, guess)
        occupancy = state_stationary(P)
        chain = build_battery_chain(
            e_max, 1, h_prob, consumption_pmf_from_occupancy(occupancy, e_idle, e_tx), harvest_units=h_units
        )
        dist = battery_stationary(chain)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnreachableThresholdWarning)
            new = pr_battery_at_least(dist, e_tx)
        trace.append(new)
        step = new - guess
        if abs(step) <= tol:
            return FixedPoint(occupancy, dist, new, it, trace)
        if prev_step * step < 0:
            new = 0.5 * (new + guess)
        prev_step = step
        guess = new
    raise IterationLimitError(
        f"state/battery fixed point did not converge in {max_iter} iterations", trace=trace[-20:]
    )
