"""Base-station wake-up of spatially correlated sleeping devices.

When the best report for an event carries less than ``i_min``, the base
station ranks sleeping devices by their conditional probability of
reporting, given a reporter ``h`` that did report, and wakes them one by one
(highest first) until the information target is met or the candidates above
the ``p(d_max)`` threshold run out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernel as K
from .errors import DomainError
from .model import Device, DeviceState, Event, Position, Report

GEOMETRY_MODES = {"oracle-geometry": K.GEOMETRY_ORACLE, "estimated": K.GEOMETRY_ESTIMATED}
SENSING_MODES = {"deterministic": K.SENSING_DETERMINISTIC, "bernoulli": K.SENSING_BERNOULLI}


@dataclass
class WakeupDecision:
    ranked: list[tuple[int, float]]  # (device_id, conditional_prob), descending
    threshold: float
    woken: list[int] = field(default_factory=list)
    initial_information: float = 0.0
    final_information: float = 0.0
    delivered: list[float] = field(default_factory=list)


class EnergyLedger:
    """Integer battery bookkeeping for a set of devices.

    ``initial + harvested - spent - lost == battery`` holds per device at all
    times, where ``lost`` is harvest discarded at the capacity clamp.
    """

    def __init__(self, batteries: Sequence[int], e_max: int, ids: Sequence[int] | None = None):
        self.e_max = int(e_max)
        self.ids = list(range(len(batteries))) if ids is None else list(ids)
        self.index = {dev: i for i, dev in enumerate(self.ids)}
        self.battery = np.array(batteries, dtype=np.int64)
        self.initial = self.battery.copy()
        self.harvested = np.zeros_like(self.battery)
        self.spent = np.zeros_like(self.battery)
        self.lost = np.zeros_like(self.battery)

    @classmethod
    def for_devices(cls, devices: Sequence[Device], e_max: int) -> EnergyLedger:
        return cls([d.battery for d in devices], e_max, ids=[d.id for d in devices])

    def level(self, device_id: int) -> int:
        return int(self.battery[self.index[device_id]])

    def harvest(self, device_id: int, units: int) -> None:
        i = self.index[device_id]
        self.harvested[i] += units
        b = self.battery[i] + units
        if b > self.e_max:
            self.lost[i] += b - self.e_max
            b = self.e_max
        self.battery[i] = b

    def spend(self, device_id: int, units: int) -> bool:
        return bool(K.spend(self.index[device_id], int(units), self.battery, self.spent))

    def balanced(self) -> bool:
        return bool(np.all(self.initial + self.harvested - self.spent - self.lost == self.battery))


def estimate_reporter_distance(information: float, psi: float, eta: float) -> float:
    """Distance at which a device would sense exactly ``information``."""
    if not (0.0 < information <= psi):
        raise DomainError(f"information must lie in (0, psi={psi}], got {information}")
    if eta <= 0:
        raise DomainError(f"eta must be positive, got {eta}")
    return -math.log(information / psi) / eta


def conditional_report_prob(d_h: float, d_jh: float, phi: float, eta: float) -> float:
    """``exp(-eta * d_j)`` with ``d_j`` from the law of cosines on (d_h, d_jh, phi)."""
    if d_h < 0 or d_jh < 0:
        raise DomainError(f"distances must be non-negative, got d_h={d_h}, d_jh={d_jh}")
    try:
        return float(K.cond_report_prob(float(d_h), float(d_jh), math.cos(phi), float(eta)))
    except K.NumericInconsistency as exc:
        raise ArithmeticError(f"law-of-cosines radicand negative for d_h={d_h}, d_jh={d_jh}, phi={phi}") from exc


def wakeup_round(
    event: Event,
    reporters: Sequence[Report],
    sleepers: Sequence[Device],
    i_min: float,
    p_threshold: float,
    ledger: EnergyLedger,
    rng: np.random.Generator,
    *,
    positions: Mapping[int, Position],
    eta: float = 1.0,
    psi: float = 1.0,
    e_idle: int = 1,
    e_tx: int = 10,
    sensing: str = "deterministic",
    geometry: str = "oracle-geometry",
) -> WakeupDecision:
    """Run one wake-up round for ``event``.

    ``positions`` maps device ids to coordinates for every reporter. Sleepers
    not in S4 or holding less than ``e_tx`` units are never candidates. Woken
    devices are mutated in place (state, battery) and every debit goes through
    ``ledger``.
    """
    if not reporters:
        raise ValueError("a wake-up round needs at least one report")
    devices = {r.device_id: positions[r.device_id] for r in reporters}
    candidates = [
        d for d in sleepers if d.state == DeviceState.SLEEP and ledger.level(d.id) >= e_tx and d.id not in devices
    ]
    # local index space: reporters first, then candidates
    pts = [devices[r.device_id] for r in reporters] + [d.position for d in candidates]
    x = np.array([p.x for p in pts], dtype=float)
    y = np.array([p.y for p in pts], dtype=float)
    n_rep, n_cand = len(reporters), len(candidates)
    rep_idx = np.arange(n_rep, dtype=np.int64)
    rep_info = np.array([r.information for r in reporters], dtype=float)
    cand_idx = np.arange(n_rep, n_rep + n_cand, dtype=np.int64)

    local_ids = [r.device_id for r in reporters] + [d.id for d in candidates]
    battery = np.zeros(len(pts), dtype=np.int64)
    for c, dev in zip(cand_idx, candidates):
        battery[c] = ledger.level(dev.id)
    spent = np.zeros(len(pts), dtype=np.int64)
    state = np.full(len(pts), K.S4, dtype=np.int64)
    state[:n_rep] = K.S3

    order = np.zeros(max(n_cand, 1), dtype=np.int64)
    scores = np.zeros(max(n_cand, 1))
    woken = np.zeros(max(n_cand, 1), dtype=np.int64)
    delivered = np.zeros(max(n_cand, 1))
    final, n_woken = K.wakeup_core(
        event.epicenter.x, event.epicenter.y, rep_idx, rep_info, n_rep, cand_idx, n_cand,
        x, y, battery, state, spent,
        float(eta), float(psi), float(i_min), float(p_threshold), int(e_idle), int(e_tx),
        SENSING_MODES[sensing], GEOMETRY_MODES[geometry], K.PHI_COS, rng,
        order, scores, woken, delivered,
    )
    initial = float(rep_info.max())
    ranked = [] if initial >= i_min else [(local_ids[order[i]], float(scores[i])) for i in range(n_cand)]

    by_local = {c: dev for c, dev in zip(cand_idx.tolist(), candidates)}
    for c in woken[:n_woken]:
        dev = by_local[int(c)]
        ledger.spend(dev.id, int(spent[c]))
        dev.battery = ledger.level(dev.id)
        dev.state = DeviceState(int(state[c]))
    return WakeupDecision(
        ranked=ranked,
        threshold=float(p_threshold),
        woken=[local_ids[int(c)] for c in woken[:n_woken]],
        initial_information=initial,
        final_information=float(final),
        delivered=[float(v) for v in delivered[:n_woken]],
    )
