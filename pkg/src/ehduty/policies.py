"""Duty-cycling policies: random benchmark, network-uniform grid search,
KNN-cluster round robin, and the genie-aided lower bound.

Exhaustive per-device search costs O(g^N) for g candidate (on, drx) pairs;
the grid search here assigns one pair to the whole network and needs g
evaluations. Brute-force KNN costs O(N(N-1)/2) distance evaluations per
iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError
from .model import AreaSpec, Device, DutyCycleConfig, Event, Position

RANDOM_ON_TIMES = (1, 2)
RANDOM_DRX_CYCLES = (2, 4, 8)


class PolicyKind(str, Enum):
    RANDOM = "random"
    GRID_SEARCH = "grid"
    KNN_CLUSTER = "knn"
    GENIE = "genie"

    @classmethod
    def parse(cls, text: str) -> PolicyKind:
        aliases = {"grid-search": "grid", "gridsearch": "grid", "knn-cluster": "knn"}
        key = aliases.get(text.strip().lower(), text.strip().lower())
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown policy {text!r}; expected one of {[p.value for p in cls]}") from None


@dataclass(frozen=True)
class Clustering:
    assignment: dict[int, int]
    centroids: list[Position]
    k_neighbors: int
    iterations: int = 0

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def members(self) -> list[list[int]]:
        groups: list[list[int]] = [[] for _ in self.centroids]
        for dev, c in sorted(self.assignment.items()):
            groups[c].append(dev)
        return groups


def cluster_count(area: AreaSpec, d_max: float) -> int:
    """Number of clusters so that each covers roughly a disc of radius ``d_max``."""
    if d_max <= 0:
        raise ConfigError(f"d_max must be positive, got {d_max}")
    ratio = area.size / (math.pi * d_max**2)
    # guard against 1.0000000000000002 from exact fits
    return max(1, math.ceil(ratio - 1e-12))


def _nearest(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(d2, axis=1)


def _seed_centers(pts: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` distinct device positions, each drawn with probability
    proportional to its squared distance from the centers chosen so far."""
    n = len(pts)
    chosen = [int(rng.integers(n))]
    d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, m):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:  # coincident points: any unused device will do
            nxt = int(rng.choice(np.setdiff1d(np.arange(n), chosen)))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def knn_clustering(
    positions: Sequence[Position] | np.ndarray,
    m: int,
    k_neighbors: int,
    rng: np.random.Generator,
    max_iter: int = 100,
) -> Clustering:
    """Hybrid KNN / centroid clustering.

    Centroids start at ``m`` distinct device positions spread out by
    squared-distance sampling, and devices start at their nearest centroid. Each round, every device joins the cluster held by
    the majority of its ``k_neighbors`` nearest devices (ties go to the nearest
    tied centroid) and centroids move to cluster means. Stops when assignments
    repeat or after ``max_iter`` rounds; empty clusters are dissolved and their
    ids compacted.
    """
    pts = _as_array(positions)
    n = len(pts)
    if n == 0:
        raise ConfigError("cannot cluster an empty deployment")
    if m < 1 or k_neighbors < 1:
        raise ConfigError(f"need m >= 1 and k_neighbors >= 1, got m={m}, k={k_neighbors}")
    if m > n:
        raise ConfigError(f"cannot form {m} clusters from {n} devices")

    centers = _seed_centers(pts, m, rng)
    labels = _nearest(pts, centers)
    k = min(k_neighbors, n - 1)

    if k > 0:
        d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]
        rows = np.repeat(np.arange(n), k).reshape(n, k)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        if k == 0:
            break
        votes = np.zeros((n, m), dtype=np.int64)
        np.add.at(votes, (rows, labels[neighbors]), 1)
        tied = votes == votes.max(axis=1, keepdims=True)
        center_d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(np.where(tied, center_d2, np.inf), axis=1)
        for c in range(m):
            members = new == c
            if members.any():
                centers[c] = pts[members].mean(axis=0)
        if np.array_equal(new, labels):
            break
        labels = new

    # empty clusters are dissolved; surviving ids are compacted in order
    alive = np.unique(labels)
    remap = np.full(m, -1)
    remap[alive] = np.arange(len(alive))
    labels = remap[labels]
    centers = np.array([pts[labels == i].mean(axis=0) for i in range(len(alive))])

    return Clustering(
        assignment={j: int(c) for j, c in enumerate(labels)},
        centroids=[Position(float(cx), float(cy)) for cx, cy in centers],
        k_neighbors=k_neighbors,
        iterations=iterations,
    )


def _as_array(positions) -> np.ndarray:
    if isinstance(positions, np.ndarray):
        return positions.astype(float).reshape(-1, 2)
    return np.array([[p.x, p.y] for p in positions], dtype=float).reshape(-1, 2)


def round_robin_schedule(clustering: Clustering) -> dict[int, DutyCycleConfig]:
    """One ON slot per cluster per TTI: drx = cluster size, offsets by device id."""
    schedule = {}
    for members in clustering.members():
        size = len(members)
        for offset, dev in enumerate(sorted(members)):
            schedule[dev] = DutyCycleConfig(on_time=1, drx_cycle=size, offset=offset)
    return schedule


def random_duty_policy(n: int, rng: np.random.Generator) -> dict[int, DutyCycleConfig]:
    """Benchmark: each device draws ON time from {1, 2} and DRX cycle from {2, 4, 8}.

    The always-on pair (2, 2) is redrawn, leaving five equally likely pairs.
    """
    if n < 1:
        raise ConfigError(f"need at least one device, got n={n}")
    schedule = {}
    for j in range(n):
        while True:
            on = int(rng.choice(RANDOM_ON_TIMES))
            drx = int(rng.choice(RANDOM_DRX_CYCLES))
            if on < drx:
                break
        schedule[j] = DutyCycleConfig(on, drx, int(rng.integers(drx)))
    return schedule


def uniform_duty_policy(n: int, on_time: int, drx_cycle: int, rng: np.random.Generator) -> dict[int, DutyCycleConfig]:
    """Same (on, drx) pair on every device with independent uniform phase."""
    return {j: DutyCycleConfig(on_time, drx_cycle, int(rng.integers(drx_cycle))) for j in range(n)}


@dataclass(frozen=True)
class GridPoint:
    on_time: int
    drx_cycle: int
    ec: float
    info: float
    feasible: bool


@dataclass(frozen=True)
class GridSearchResult:
    on_time: int
    drx_cycle: int
    feasible: bool  # False: nothing met i_min, the pair is the best-information fallback
    report: list[GridPoint] = field(default_factory=list)

    @property
    def pair(self) -> tuple[int, int]:
        return self.on_time, self.drx_cycle


def grid_search_duty(
    candidate_on: Iterable[int],
    candidate_drx: Iterable[int],
    evaluator: Callable[[int, int], tuple[float, float]],
    i_min: float,
) -> GridSearchResult:
    """Minimum mean energy consumption over network-uniform (on, drx) pairs
    subject to mean information per event >= ``i_min``.

    Ties go to the larger DRX cycle. If no pair is feasible the pair with the
    most information is returned with ``feasible=False``.
    """
    ons = sorted(set(int(v) for v in candidate_on))
    drxs = sorted(set(int(v) for v in candidate_drx))
    if not ons or not drxs:
        raise ConfigError("grid search needs non-empty candidate sets")
    report = []
    for on in ons:
        for drx in drxs:
            if not 1 <= on <= drx:
                continue
            ec, info = evaluator(on, drx)
            report.append(GridPoint(on, drx, float(ec), float(info), bool(info >= i_min)))
    if not report:
        raise ConfigError("no valid (on_time, drx_cycle) pair in the candidate grid")
    feasible = [g for g in report if g.feasible]
    if feasible:
        best = min(feasible, key=lambda g: (g.ec, -g.drx_cycle, g.on_time))
        return GridSearchResult(best.on_time, best.drx_cycle, True, report)
    best = max(report, key=lambda g: (g.info, -g.ec, g.drx_cycle))
    return GridSearchResult(best.on_time, best.drx_cycle, False, report)


def genie_detector(event: Event, devices: Sequence[Device]) -> int:
    """Id of the device closest to the epicenter (lowest id on ties)."""
    if not devices:
        raise ConfigError("genie detector needs at least one device")
    best_id, best_d = None, math.inf
    for dev in sorted(devices, key=lambda d: d.id):
        d = dev.position.distance(event.epicenter)
        if d < best_d:
            best_id, best_d = dev.id, d
    return best_id
