"""Domain types, geometry, sensing power and event-information aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable

import numpy as np

from .errors import ConfigError, DomainError


class DeviceState(IntEnum):
    IDLE = 1  # S1: sensing, waiting for an event
    ACTIVE = 2  # S2: triggered, about to transmit
    TRANSMIT = 3  # S3: reporting to the base station
    SLEEP = 4  # S4: radio off, harvesting only


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def distance(self, other: Position) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class AreaSpec:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"area must have positive sides, got {self.width}x{self.height}")

    @property
    def size(self) -> float:
        return self.width * self.height

    def contains(self, p: Position) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height


@dataclass(frozen=True)
class DutyCycleConfig:
    """ON window of ``on_time`` TTIs repeating every ``drx_cycle`` TTIs.

    A device is scheduled ON at TTI ``t`` iff ``(t - offset) % drx_cycle < on_time``.
    """

    on_time: int = 1
    drx_cycle: int = 1
    offset: int = 0

    def __post_init__(self):
        if not (1 <= self.on_time <= self.drx_cycle):
            raise ConfigError(
                f"duty cycle needs 1 <= on_time <= drx_cycle, got on={self.on_time} drx={self.drx_cycle}"
            )
        if not (0 <= self.offset < self.drx_cycle):
            raise ConfigError(f"offset must lie in [0, {self.drx_cycle}), got {self.offset}")

    def is_on(self, tti: int) -> bool:
        return (tti - self.offset) % self.drx_cycle < self.on_time


@dataclass
class Device:
    id: int
    position: Position
    battery: int
    state: DeviceState = DeviceState.IDLE
    duty: DutyCycleConfig = field(default_factory=DutyCycleConfig)
    harvest_rate: float = 1.0


@dataclass(frozen=True)
class Event:
    tti: int
    epicenter: Position
    id: int


@dataclass(frozen=True)
class Report:
    device_id: int
    event_id: int
    information: float


def sensing_power(d: float, eta: float) -> float:
    """Activation probability ``exp(-eta * d)`` of a device at distance ``d``."""
    if d < 0:
        raise DomainError(f"distance must be non-negative, got {d}")
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}")
    return math.exp(-eta * d)


def event_information(d: float, eta: float, psi: float = 1.0) -> float:
    if psi <= 0:
        raise DomainError(f"psi must be positive, got {psi}")
    return psi * sensing_power(d, eta)


def best_information(reports: Iterable[Report | float]) -> float:
    """Largest information value among the reports; 0 when nothing was received."""
    best = 0.0
    for r in reports:
        value = r.information if isinstance(r, Report) else float(r)
        if value > best:
            best = value
    return best


def deploy_uniform(
    n: int,
    area: AreaSpec,
    rng: np.random.Generator,
    e_max: int = 100,
    harvest_rate: float = 1.0,
) -> list[Device]:
    """Drop ``n`` devices i.i.d. uniformly over ``area``, fully charged and idle."""
    if n < 1:
        raise ConfigError(f"need at least one device, got n={n}")
    xy = rng.random((n, 2)) * np.array([area.width, area.height])
    return [
        Device(id=j, position=Position(float(px), float(py)), battery=int(e_max), harvest_rate=harvest_rate)
        for j, (px, py) in enumerate(xy)
    ]


def positions_array(devices: Iterable[Device]) -> np.ndarray:
    return np.array([[d.position.x, d.position.y] for d in devices], dtype=float).reshape(-1, 2)
