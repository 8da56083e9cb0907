"""Discrete-time network simulation, run metrics and Monte Carlo experiments.

Per TTI, in order: harvesting, deterministic duty schedule, event draw,
sensing and Bernoulli detection, transmission, wake-up round, return to
schedule. The genie policy keeps every device asleep and activates only the
device closest to each epicenter. Runs are seeded from
``SeedSequence(base_seed, spawn_key=(i,))`` so results do not depend on how
runs are distributed over worker processes.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernel as K
from .config import SimConfig
from .dynamics import harvest_active_prob
from .model import AreaSpec, Device, DeviceState, DutyCycleConfig, Event, Position, Report, deploy_uniform, positions_array, sensing_power
from .policies import (
    Clustering,
    GridSearchResult,
    PolicyKind,
    RANDOM_DRX_CYCLES,
    RANDOM_ON_TIMES,
    cluster_count,
    grid_search_duty,
    knn_clustering,
    random_duty_policy,
    round_robin_schedule,
    uniform_duty_policy,
)
from .wakeup import GEOMETRY_MODES, SENSING_MODES, WakeupDecision

PILOT_KEY = 0x6E1D
PILOT_RUNS = 8
PILOT_TTIS = 2000
Z95 = 1.959963984540054


@dataclass
class TtiLog:
    tti: int
    event: Event | None
    detections: list[Report]
    woken: WakeupDecision | None
    energy_spent: int
    states_census: tuple[int, int, int, int]
    information: float = 0.0  # final information delivered for the event


@dataclass(frozen=True)
class RunMetrics:
    misdetection_prob: float | None
    mean_ec: float | None
    mean_info: float | None
    events_total: int
    events_missed: int
    tti_count: int
    seed: int | tuple | None = None


@dataclass(frozen=True)
class LedgerCheck:
    initial: np.ndarray
    harvested: np.ndarray
    spent: np.ndarray
    lost: np.ndarray
    final: np.ndarray

    @property
    def balanced(self) -> bool:
        return bool(np.all(self.initial + self.harvested - self.spent - self.lost == self.final))


@dataclass
class RunTrace:
    """Per-TTI columns of the metered window."""

    event: np.ndarray
    epicenter_x: np.ndarray
    epicenter_y: np.ndarray
    reports: np.ndarray
    initial_info: np.ndarray
    woken: np.ndarray
    final_info: np.ndarray
    energy_spent: np.ndarray
    census: np.ndarray
    first_tti: int = 0

    @classmethod
    def empty(cls, k: int) -> RunTrace:
        return cls(
            event=np.zeros(k, dtype=np.bool_),
            epicenter_x=np.full(k, np.nan),
            epicenter_y=np.full(k, np.nan),
            reports=np.zeros(k, dtype=np.int64),
            initial_info=np.zeros(k),
            woken=np.zeros(k, dtype=np.int64),
            final_info=np.zeros(k),
            energy_spent=np.zeros(k, dtype=np.int64),
            census=np.zeros((k, 4), dtype=np.int64),
        )

    def to_csv(self, handle) -> None:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(["tti", "event", "epicenter_x", "epicenter_y", "reports", "initial_info",
                    "woken", "final_info", "energy_spent", "s1", "s2", "s3", "s4"])
        for k in range(len(self.event)):
            ev = bool(self.event[k])
            w.writerow([
                self.first_tti + k, int(ev),
                fmt(self.epicenter_x[k]) if ev else "", fmt(self.epicenter_y[k]) if ev else "",
                int(self.reports[k]), fmt(self.initial_info[k]), int(self.woken[k]),
                fmt(self.final_info[k]), int(self.energy_spent[k]), *map(int, self.census[k]),
            ])

    def wakeup_csv(self, handle) -> None:
        """One row per event that triggered a wake-up round."""
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(["event_id", "tti", "initial_info", "woken_count", "final_info"])
        event_id = 0
        for k in range(len(self.event)):
            if not self.event[k]:
                continue
            if self.woken[k] > 0:
                w.writerow([event_id, self.first_tti + k, fmt(self.initial_info[k]),
                            int(self.woken[k]), fmt(self.final_info[k])])
            event_id += 1


@dataclass
class RunResult:
    metrics: RunMetrics
    ledger: LedgerCheck
    trace: RunTrace | None = None


def fmt(x) -> str:
    """Six significant digits, dot decimal separator; empty for absent values."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.6g}"


class World:
    """Mutable simulation state of one run.

    Device data live in parallel numpy arrays indexed by device id; use
    :meth:`devices` for a snapshot as :class:`Device` objects.
    """

    def __init__(self, config: SimConfig, rng: np.random.Generator, grid_pair: tuple[int, int] | None = None):
        self.config = config
        self.rng = rng
        self.policy = config.policy
        area = AreaSpec(config.width, config.height)
        deployed = deploy_uniform(config.n_devices, area, rng, e_max=config.e_max, harvest_rate=config.lambda_tau)
        pts = positions_array(deployed)
        self.clustering: Clustering | None = None
        self.grid_pair = grid_pair
        n = config.n_devices

        if self.policy == PolicyKind.RANDOM:
            schedule = random_duty_policy(n, rng)
        elif self.policy == PolicyKind.GRID_SEARCH:
            if grid_pair is None:
                raise ValueError("grid-search worlds need the selected (on_time, drx_cycle) pair")
            schedule = uniform_duty_policy(n, grid_pair[0], grid_pair[1], rng)
        elif self.policy == PolicyKind.KNN_CLUSTER:
            m = min(cluster_count(area, config.d_max), n)
            self.clustering = knn_clustering(pts, m, config.k_neighbors, rng)
            schedule = round_robin_schedule(self.clustering)
        else:
            schedule = {j: DutyCycleConfig() for j in range(n)}

        self.x = np.ascontiguousarray(pts[:, 0])
        self.y = np.ascontiguousarray(pts[:, 1])
        self.on = np.array([schedule[j].on_time for j in range(n)], dtype=np.int64)
        self.drx = np.array([schedule[j].drx_cycle for j in range(n)], dtype=np.int64)
        self.offset = np.array([schedule[j].offset for j in range(n)], dtype=np.int64)
        self.battery = np.full(n, config.e_max, dtype=np.int64)
        self.initial_battery = self.battery.copy()
        self.harvested = np.zeros(n, dtype=np.int64)
        self.spent = np.zeros(n, dtype=np.int64)
        self.lost = np.zeros(n, dtype=np.int64)
        self.state = np.full(n, K.S1, dtype=np.int64)
        self.clock = 0
        self.events_seen = 0

        self.genie = self.policy == PolicyKind.GENIE
        self.p_h = harvest_active_prob(config.lambda_tau, 1.0)
        self.p_thr = sensing_power(config.d_max, config.eta)
        self.sensing = SENSING_MODES[config.wakeup_sensing]
        self.geometry = GEOMETRY_MODES[config.geometry_mode]
        self._rep_idx = np.empty(n, dtype=np.int64)
        self._rep_info = np.empty(n)
        self._order = np.empty(n, dtype=np.int64)
        self._scores = np.empty(n)
        self._woken = np.empty(n, dtype=np.int64)
        self._delivered = np.empty(n)
        self._census = np.zeros(4, dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def burn_in(self) -> int:
        if self.config.burn_in is not None:
            return self.config.burn_in
        return 10 * int(self.drx.max())

    def schedule(self) -> dict[int, DutyCycleConfig]:
        return {j: DutyCycleConfig(int(self.on[j]), int(self.drx[j]), int(self.offset[j])) for j in range(self.n)}

    def devices(self) -> list[Device]:
        return [
            Device(
                id=j,
                position=Position(float(self.x[j]), float(self.y[j])),
                battery=int(self.battery[j]),
                state=DeviceState(int(self.state[j])),
                duty=DutyCycleConfig(int(self.on[j]), int(self.drx[j]), int(self.offset[j])),
                harvest_rate=self.config.lambda_tau,
            )
            for j in range(self.n)
        ]

    def ledger(self) -> LedgerCheck:
        return LedgerCheck(self.initial_battery.copy(), self.harvested.copy(), self.spent.copy(),
                           self.lost.copy(), self.battery.copy())

    def _args(self):
        c = self.config
        return (
            self.x, self.y, self.battery, self.state, self.on, self.drx, self.offset,
            self.harvested, self.spent, self.lost,
            self.genie, self.p_h, c.e_h, c.e_max, c.alpha, c.width, c.height,
            c.eta, c.psi, c.i_min, self.p_thr, c.e_idle, c.e_tx, self.sensing, self.geometry, K.PHI_COS, self.rng,
        )


def step_tti(world: World) -> TtiLog:
    t = world.clock
    ev, ex, ey, n_rep, initial, n_cand, n_woken, final, energy = K.step(
        t, *world._args(),
        world._rep_idx, world._rep_info, world._order, world._scores,
        world._woken, world._delivered, world._census,
    )
    world.clock += 1
    event = None
    detections: list[Report] = []
    decision = None
    if ev:
        event = Event(tti=t, epicenter=Position(float(ex), float(ey)), id=world.events_seen)
        world.events_seen += 1
        detections = [
            Report(int(world._rep_idx[r]), event.id, float(world._rep_info[r])) for r in range(n_rep)
        ]
        if n_rep > 0 and initial < world.config.i_min:
            decision = WakeupDecision(
                ranked=[(int(world._order[i]), float(world._scores[i])) for i in range(n_cand)],
                threshold=world.p_thr,
                woken=[int(v) for v in world._woken[:n_woken]],
                initial_information=float(initial),
                final_information=float(final),
                delivered=[float(v) for v in world._delivered[:n_woken]],
            )
    return TtiLog(
        tti=t,
        event=event,
        detections=detections,
        woken=decision,
        energy_spent=int(energy),
        states_census=tuple(int(v) for v in world._census),
        information=float(final) if ev else 0.0,
    )


def _seed_value(seed) -> int | tuple:
    if isinstance(seed, np.random.SeedSequence):
        return (seed.entropy, *seed.spawn_key)
    return seed


def run_simulation(
    config: SimConfig,
    seed: int | np.random.SeedSequence,
    *,
    trace: bool = False,
    grid_pair: tuple[int, int] | None = None,
) -> RunResult:
    """One deployment, burn-in, then ``config.tti_count`` metered TTIs."""
    rng = np.random.default_rng(seed)
    world = World(config, rng, grid_pair=grid_pair)
    k = config.tti_count
    tr = RunTrace.empty(k if trace else 0)
    tr.first_tti = world.burn_in
    events, missed, info_sum, energy = K.run_loop(
        world.burn_in, k, *world._args(),
        trace, tr.event, tr.epicenter_x, tr.epicenter_y, tr.reports, tr.initial_info,
        tr.woken, tr.final_info, tr.energy_spent, tr.census,
    )
    world.clock = world.burn_in + k
    metrics = RunMetrics(
        misdetection_prob=missed / events if events else None,
        mean_ec=energy / (config.n_devices * k) if k else None,
        mean_info=info_sum / (config.alpha * k) if config.alpha * k > 0 else None,
        events_total=int(events),
        events_missed=int(missed),
        tti_count=k,
        seed=_seed_value(seed),
    )
    return RunResult(metrics, world.ledger(), tr if trace else None)


def mean_energy_consumption(logs: Sequence[TtiLog], n_devices: int) -> float | None:
    if not logs:
        return None
    return sum(log.energy_spent for log in logs) / (n_devices * len(logs))


def mean_information_per_event(logs: Sequence[TtiLog], alpha: float, k: int | None = None) -> float | None:
    k = len(logs) if k is None else k
    if alpha * k <= 0:
        return None
    return sum(log.information for log in logs if log.event is not None) / (alpha * k)


def misdetection_probability(logs: Iterable[TtiLog]) -> float | None:
    events = [log for log in logs if log.event is not None]
    if not events:
        return None
    return sum(1 for log in events if log.information <= 0.0) / len(events)


@dataclass(frozen=True)
class MetricSummary:
    mean: float | None
    std: float | None
    ci: float | None  # half-width of the 95% normal-approximation interval
    n: int

    @classmethod
    def of(cls, values: Iterable[float | None]) -> MetricSummary:
        # sorted so the float sum does not depend on run completion order
        vals = sorted(v for v in values if v is not None)
        if not vals:
            return cls(None, None, None, 0)
        arr = np.array(vals)
        mean = float(math.fsum(vals) / len(vals))
        std = float(arr.std(ddof=1)) if len(vals) > 1 else 0.0
        return cls(mean, std, Z95 * std / math.sqrt(len(vals)), len(vals))

    @property
    def low(self) -> float | None:
        return None if self.mean is None else self.mean - self.ci

    @property
    def high(self) -> float | None:
        return None if self.mean is None else self.mean + self.ci


@dataclass
class Aggregate:
    config: SimConfig
    misdetection: MetricSummary
    ec: MetricSummary
    info: MetricSummary
    runs: list[RunMetrics]
    ledger_violations: int = 0
    grid: GridSearchResult | None = None

    @property
    def n_runs(self) -> int:
        return len(self.runs)


def _run_one(args) -> tuple[RunMetrics, bool]:
    config, seed, grid_pair = args
    result = run_simulation(config, seed, grid_pair=grid_pair)
    return result.metrics, result.ledger.balanced


def _map_runs(tasks: list, parallelism: int) -> list:
    if parallelism <= 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * parallelism))))


def run_seeds(base_seed: int, n_runs: int, key: tuple = ()) -> list[np.random.SeedSequence]:
    return [np.random.SeedSequence(base_seed, spawn_key=(*key, i)) for i in range(n_runs)]


def select_grid_pair(config: SimConfig, parallelism: int = 1) -> GridSearchResult:
    """Pilot Monte Carlo over the benchmark (on, drx) grid, network-uniform."""
    pilot = config.replace(policy=PolicyKind.GRID_SEARCH, tti_count=min(config.tti_count, PILOT_TTIS) or PILOT_TTIS)
    seeds = run_seeds(config.base_seed, min(config.n_runs, PILOT_RUNS), key=(PILOT_KEY,))

    def evaluate(on: int, drx: int) -> tuple[float, float]:
        out = _map_runs([(pilot, s, (on, drx)) for s in seeds], parallelism)
        ec = MetricSummary.of(m.mean_ec for m, _ in out).mean
        info = MetricSummary.of(m.mean_info for m, _ in out).mean
        return ec if ec is not None else math.inf, info if info is not None else 0.0

    return grid_search_duty(RANDOM_ON_TIMES, RANDOM_DRX_CYCLES, evaluate, config.i_min)


def run_experiment(
    config: SimConfig,
    n_runs: int | None = None,
    base_seed: int | None = None,
    parallelism: int = 1,
) -> Aggregate:
    """``n_runs`` independent deployments; mean, std and 95% CI per metric."""
    n_runs = config.n_runs if n_runs is None else n_runs
    base_seed = config.base_seed if base_seed is None else base_seed
    if n_runs < 1:
        raise ValueError(f"n_runs must be >= 1, got {n_runs}")
    config = config.replace(n_runs=n_runs, base_seed=base_seed)
    grid = None
    pair = None
    if config.policy == PolicyKind.GRID_SEARCH:
        grid = select_grid_pair(config, parallelism)
        pair = grid.pair
    tasks = [(config, s, pair) for s in run_seeds(base_seed, n_runs)]
    out = _map_runs(tasks, parallelism)
    runs = [m for m, _ in out]
    return Aggregate(
        config=config,
        misdetection=MetricSummary.of(m.misdetection_prob for m in runs),
        ec=MetricSummary.of(m.mean_ec for m in runs),
        info=MetricSummary.of(m.mean_info for m in runs),
        runs=runs,
        ledger_violations=sum(1 for _, ok in out if not ok),
        grid=grid,
    )


def simulate_chain_occupancy(matrix: np.ndarray, n_steps: int, seed: int, start: int = 0) -> np.ndarray:
    """Empirical occupancy of a sampled trajectory of a transition matrix."""
    counts = K.chain_occupancy(np.asarray(matrix, dtype=float), start, n_steps, np.random.default_rng(seed))
    return counts / n_steps


def simulate_single_device(
    matrix: np.ndarray, e_idle: int, e_tx: int, e_max: int, harvest_prob: float, e_h: int, n_steps: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Long-run state and battery-level frequencies of one device whose
    S2 -> S3 branch is decided by its actual battery."""
    states, levels = K.device_chain_run(
        np.asarray(matrix, dtype=float), e_idle, e_tx, e_max, harvest_prob, e_h, n_steps, np.random.default_rng(seed)
    )
    return states / n_steps, levels / n_steps
