"""Analytic four-state device chain and the per-TTI harvesting probability.

The matrix built here is an analysis object. The simulator drives S1 -> S2
from actual event draws and a deterministic duty schedule; this chain is the
averaged description used for mean-consumption prediction and validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError, ModelInconsistencyError
from .markov import stationary_distribution
from .model import AreaSpec, DutyCycleConfig, DeviceState

S1, S2, S3, S4 = (s.value for s in DeviceState)


@dataclass(frozen=True)
class HarvestModel:
    lam: float = 1.0
    tau: float = 1.0
    quantum: int = 1

    def __post_init__(self):
        if self.lam <= 0 or self.tau <= 0:
            raise DomainError(f"harvest model needs lam > 0 and tau > 0, got lam={self.lam} tau={self.tau}")
        if self.quantum < 1:
            raise DomainError(f"harvest quantum must be >= 1, got {self.quantum}")

    @property
    def active_prob(self) -> float:
        return harvest_active_prob(self.lam, self.tau)


@dataclass(frozen=True)
class StateTransitionMatrix:
    matrix: np.ndarray

    def __getitem__(self, mn: tuple[int, int]) -> float:
        """1-based access, ``P[1, 2]`` is the S1 -> S2 probability."""
        m, n = mn
        return float(self.matrix[m - 1, n - 1])

    def as_rows(self) -> list[list[float]]:
        return self.matrix.tolist()


def harvest_active_prob(lam: float, tau: float) -> float:
    """Probability that the energy source is active during one TTI, ``lam*tau*exp(-lam*tau)``."""
    if lam <= 0 or tau <= 0:
        raise DomainError(f"lam and tau must be positive, got lam={lam} tau={tau}")
    x = lam * tau
    return x * math.exp(-x)


def p_sleep_to_idle(duty: DutyCycleConfig) -> float:
    return duty.on_time / duty.drx_cycle


def _window_sum(duty: DutyCycleConfig, alpha: float, name: str) -> float:
    on, drx = duty.on_time, duty.drx_cycle
    total = 0.0
    for i in range(1, on + 1):
        if drx == i:
            raise DomainError(
                f"{name}: zero denominator (drx_cycle - {i}) for on_time={on}, drx_cycle={drx}; "
                "the analytic chain needs drx_cycle > on_time"
            )
        total += (1.0 - alpha) ** i * (on - i) / (drx - i)
    if total > 1.0:
        raise ModelInconsistencyError(
            f"{name} = {total:.6g} exceeds 1 for on_time={on}, drx_cycle={drx}",
            inputs={"on_time": on, "drx_cycle": drx, "alpha": alpha},
        )
    return total


def p_idle_self(duty: DutyCycleConfig, alpha: float) -> float:
    """S1 -> S1: sum over the remaining ON slots of ``(1-alpha)^i (on-i)/(drx-i)``."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    return _window_sum(duty, alpha, "P(S1->S1)")


def p_tx_to_idle(duty: DutyCycleConfig) -> float:
    return _window_sum(duty, 0.0, "P(S3->S1)")


def build_transition_matrix(
    duty: DutyCycleConfig,
    alpha: float,
    p_detect: float,
    p_wake: float,
    p_tx_capable: float,
) -> StateTransitionMatrix:
    inputs = dict(
        on_time=duty.on_time,
        drx_cycle=duty.drx_cycle,
        alpha=alpha,
        p_detect=p_detect,
        p_wake=p_wake,
        p_tx_capable=p_tx_capable,
    )
    for key in ("alpha", "p_detect", "p_wake", "p_tx_capable"):
        if not 0.0 <= inputs[key] <= 1.0:
            raise DomainError(f"{key} must lie in [0, 1], got {inputs[key]}")

    P = np.zeros((4, 4))
    P[0, 1] = alpha * p_detect
    P[0, 0] = p_idle_self(duty, alpha)
    P[0, 3] = 1.0 - P[0, 0] - P[0, 1]
    P[1, 2] = p_tx_capable
    P[1, 3] = 1.0 - p_tx_capable
    P[2, 0] = p_tx_to_idle(duty)
    P[2, 3] = 1.0 - P[2, 0]
    P[3, 0] = p_sleep_to_idle(duty)
    P[3, 1] = p_wake
    P[3, 3] = 1.0 - P[3, 0] - P[3, 1]

    bad = np.argwhere((P < 0.0) | (P > 1.0))
    if bad.size:
        m, n = (int(v) + 1 for v in bad[0])
        raise ModelInconsistencyError(
            f"P({m},{n}) = {P[m - 1, n - 1]:.6g} lies outside [0, 1]",
            entry=(m, n),
            inputs=inputs,
        )
    return StateTransitionMatrix(P)


def state_stationary(matrix: StateTransitionMatrix | np.ndarray) -> np.ndarray:
    P = matrix.matrix if isinstance(matrix, StateTransitionMatrix) else np.asarray(matrix, dtype=float)
    if P.shape != (4, 4):
        raise ValueError(f"expected a 4x4 matrix, got {P.shape}")
    return stationary_distribution(P)


@lru_cache(maxsize=64)
def mean_sensing_power(width: float, height: float, eta: float) -> float:
    """Average of ``exp(-eta*d)`` for epicenter and device independently uniform in the area.

    Each coordinate difference of two uniforms has a triangular density, so the
    four-dimensional average reduces to a two-dimensional integral over the
    positive quadrant.
    """
    area = AreaSpec(width, height)

    def f(v, u):
        return math.exp(-eta * math.hypot(u, v)) * (width - u) * (height - v)

    val, _ = integrate.dblquad(f, 0.0, width, 0.0, height, epsabs=1e-12, epsrel=1e-10)
    return 4.0 * val / (area.width**2 * area.height**2)
