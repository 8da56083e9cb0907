"""Density sweeps over policies and their CSV export."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .config import SimConfig
from .policies import PolicyKind
from .sim import Aggregate, fmt, run_experiment

SWEEP_COLUMNS = [
    "policy",
    "n_devices",
    "misdetection_mean",
    "misdetection_ci",
    "ec_mean",
    "ec_ci",
    "info_mean",
    "info_ci",
    "n_runs",
    "base_seed",
]

DEFAULT_POLICIES = (PolicyKind.GENIE, PolicyKind.KNN_CLUSTER, PolicyKind.GRID_SEARCH, PolicyKind.RANDOM)


@dataclass
class SweepResult:
    rows: list[tuple[PolicyKind, int, Aggregate]]

    def get(self, policy: PolicyKind | str, n_devices: int) -> Aggregate:
        policy = PolicyKind.parse(policy) if isinstance(policy, str) else policy
        for pol, n, agg in self.rows:
            if pol == policy and n == n_devices:
                return agg
        raise KeyError((policy, n_devices))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for pol, n, agg in self.rows:
            w.writerow([
                pol.value, n,
                fmt(agg.misdetection.mean), fmt(agg.misdetection.ci),
                fmt(agg.ec.mean), fmt(agg.ec.ci),
                fmt(agg.info.mean), fmt(agg.info.ci),
                agg.n_runs, agg.config.base_seed,
            ])
        return buf.getvalue()


def sweep(
    config: SimConfig,
    densities: Sequence[int],
    policies: Sequence[PolicyKind] = DEFAULT_POLICIES,
    parallelism: int = 1,
) -> SweepResult:
    """``run_experiment`` for every (policy, density) pair.

    All cells share ``config.base_seed``, so run ``i`` sees the same
    deployment under every policy.
    """
    if not densities:
        raise ValueError("sweep needs at least one density")
    rows = []
    for pol in policies:
        for n in densities:
            cfg = config.replace(policy=pol, n_devices=int(n))
            rows.append((pol, int(n), run_experiment(cfg, parallelism=parallelism)))
    return SweepResult(rows)
