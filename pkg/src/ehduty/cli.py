"""Command-line driver: ``ehduty {simulate,sweep,battery,matrix,cluster}``.

Every subcommand writes CSV to ``--out`` (stdout by default). Exit status is
0 on success, 1 for invalid input and 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import warnings
from pathlib import Path

import numpy as np

from .battery import coupled_fixed_point, pr_battery_at_least, pr_transmit_semiclosed
from .config import SimConfig, load_config, parse_config, serialize_config
from .dynamics import HarvestModel, build_transition_matrix, mean_sensing_power, state_stationary
from .errors import ConfigError, DomainError, EhdutyError, ModelInconsistencyError
from .experiment import DEFAULT_POLICIES, sweep
from .model import AreaSpec, DutyCycleConfig, deploy_uniform, positions_array
from .policies import PolicyKind, cluster_count, knn_clustering, round_robin_schedule
from .sim import fmt, run_experiment, run_seeds, run_simulation

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
DEFAULT_DENSITIES = (10, 50, 100, 250)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; bad usage is a validation error here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    """``10,50,100`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (int(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError
            return list(range(start, stop + 1, step))
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b,c' or 'start:stop:step', got {text!r}") from None


def _policy_list(text: str) -> list[PolicyKind]:
    try:
        return [PolicyKind.parse(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _defaults_epilog() -> str:
    lines = ["configuration keys and defaults (paper-calibration preset):"]
    lines += ["  " + line for line in serialize_config(SimConfig()).splitlines()]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="key = value configuration file")
    common.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                        help="override one configuration key (repeatable)")
    common.add_argument("--seed", type=int, help="base seed, overrides base_seed")
    common.add_argument("--out", metavar="CSV", help="output path (default: stdout)")
    common.add_argument("--trace", nargs="?", const="", default=None, metavar="CSV",
                        help="also write a detailed trace; path defaults to <out>_trace.csv")

    parser = _Parser(prog="ehduty", description="Duty-cycled energy-harvesting sensor network analysis.",
                     epilog=_defaults_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo experiment for one configuration")
    p.add_argument("--parallelism", type=int, default=1)

    p = sub.add_parser("sweep", parents=[common], help="experiments over device densities and policies")
    p.add_argument("--densities", type=_int_list, default=list(DEFAULT_DENSITIES),
                   help="comma list or start:stop:step (default: 10,50,100,250)")
    p.add_argument("--policies", type=_policy_list, default=list(DEFAULT_POLICIES),
                   help="comma list of genie,knn,grid,random (default: all)")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--svg", action="store_true", help="render line charts next to --out")

    for name, text in (("battery", "stationary battery distribution and transmit probability"),
                       ("matrix", "analytic 4-state transition matrix and its stationary vector")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--on", type=int, default=1, help="ON time in TTIs")
        p.add_argument("--drx", type=int, default=4, help="DRX cycle in TTIs")
        p.add_argument("--p-wake", type=float, default=0.0, help="S4 -> S2 wake-up probability")
        if name == "battery":
            p.add_argument("--harvest-prob", type=float, help="per-TTI harvest probability (default: from lambda_tau)")
        else:
            p.add_argument("--p-tx", type=float,
                           help="S2 -> S3 probability (default: solved jointly with the battery chain)")

    sub.add_parser("cluster", parents=[common], help="KNN clustering and round-robin schedule of one deployment")
    return parser


def _config(args) -> SimConfig:
    cfg = load_config(args.config)
    if args.set:
        cfg = parse_config("\n".join(args.set), base=cfg)
    if args.seed is not None:
        cfg = cfg.replace(base_seed=args.seed)
    return cfg


def _trace_path(args, suffix: str) -> Path:
    if args.trace:
        return Path(args.trace)
    if args.out:
        out = Path(args.out)
        return out.with_name(f"{out.stem}_{suffix}.csv")
    return Path(f"{suffix}.csv")


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def cmd_simulate(args, cfg: SimConfig) -> str:
    agg = run_experiment(cfg, parallelism=args.parallelism)
    if args.trace is not None:
        first = run_simulation(cfg, run_seeds(cfg.base_seed, 1)[0], trace=True,
                               grid_pair=agg.grid.pair if agg.grid else None)
        path = _trace_path(args, "trace")
        with open(path, "w", newline="") as fh:
            first.trace.to_csv(fh)
        with open(path.with_name(path.stem + "_wakeup.csv"), "w", newline="") as fh:
            first.trace.wakeup_csv(fh)
    events = sum(m.events_total for m in agg.runs)
    missed = sum(m.events_missed for m in agg.runs)
    header = ["policy", "n_devices", "misdetection_mean", "misdetection_ci", "ec_mean", "ec_ci",
              "info_mean", "info_ci", "n_runs", "base_seed", "events_total", "events_missed",
              "ledger_violations", "grid_on", "grid_drx"]
    row = [cfg.policy.value, cfg.n_devices,
           fmt(agg.misdetection.mean), fmt(agg.misdetection.ci), fmt(agg.ec.mean), fmt(agg.ec.ci),
           fmt(agg.info.mean), fmt(agg.info.ci), agg.n_runs, cfg.base_seed, events, missed,
           agg.ledger_violations,
           agg.grid.on_time if agg.grid else "", agg.grid.drx_cycle if agg.grid else ""]
    return _rows_csv(header, [row])


def cmd_sweep(args, cfg: SimConfig) -> str:
    result = sweep(cfg, args.densities, args.policies, parallelism=args.parallelism)
    if args.svg:
        from .plotting import render_sweep

        stem = Path(args.out).with_suffix("") if args.out else Path("sweep")
        for path in render_sweep(result, stem, i_min=cfg.i_min):
            print(f"wrote {path}", file=sys.stderr)
    return result.to_csv()


def _fixed_point(args, cfg: SimConfig, harvest):
    duty = DutyCycleConfig(args.on, args.drx)
    return coupled_fixed_point(
        duty, cfg.alpha, harvest, cfg.e_idle, cfg.e_tx, cfg.e_max,
        p_wake=args.p_wake, area=(cfg.width, cfg.height), eta=cfg.eta,
    )


def cmd_battery(args, cfg: SimConfig) -> str:
    harvest = HarvestModel(cfg.lambda_tau, 1.0, cfg.e_h) if args.harvest_prob is None else args.harvest_prob
    fp = _fixed_point(args, cfg, harvest)
    if args.trace is not None:
        with open(_trace_path(args, "fixed_point"), "w", newline="") as fh:
            fh.write(_rows_csv(["iteration", "p_tx_capable"], [[i + 1, fmt(v)] for i, v in enumerate(fp.trace)]))
    p_detect = mean_sensing_power(cfg.width, cfg.height, cfg.eta)
    P = build_transition_matrix(DutyCycleConfig(args.on, args.drx), cfg.alpha, p_detect, args.p_wake, fp.p_tx_capable)
    p_enter = P[1, 2] + P[4, 2]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        stationary = pr_battery_at_least(fp.battery, cfg.e_tx)
    if cfg.e_tx <= cfg.e_max:
        semi = pr_transmit_semiclosed(p_enter, cfg.e_tx, cfg.e_max)
        binomial, beta = fmt(semi.binomial), fmt(semi.beta_form)
    else:
        binomial = beta = ""
    header = ["row", "level", "probability", "p_enter", "pr_tx_stationary", "pr_tx_binomial", "pr_tx_beta"]
    rows = [["level", lvl, fmt(p), "", "", "", ""] for lvl, p in zip(fp.battery.levels, fp.battery.probabilities)]
    rows.append(["summary", "", fmt(float(np.sum(fp.battery.probabilities))), fmt(p_enter), fmt(stationary),
                 binomial, beta])
    return _rows_csv(header, rows)


def cmd_matrix(args, cfg: SimConfig) -> str:
    duty = DutyCycleConfig(args.on, args.drx)
    if args.p_tx is None:
        p_tx = _fixed_point(args, cfg, HarvestModel(cfg.lambda_tau, 1.0, cfg.e_h)).p_tx_capable
    else:
        p_tx = args.p_tx
    p_detect = mean_sensing_power(cfg.width, cfg.height, cfg.eta)
    P = build_transition_matrix(duty, cfg.alpha, p_detect, args.p_wake, p_tx)
    pi = state_stationary(P)
    header = ["from", "to_s1", "to_s2", "to_s3", "to_s4"]
    rows = [[f"s{m + 1}", *(fmt(v) for v in P.matrix[m])] for m in range(4)]
    rows.append(["stationary", *(fmt(v) for v in pi)])
    return _rows_csv(header, rows)


def cmd_cluster(args, cfg: SimConfig) -> str:
    area = AreaSpec(cfg.width, cfg.height)
    # same stream as run 0 of an experiment, so the deployment matches simulate's first run
    rng = np.random.default_rng(run_seeds(cfg.base_seed, 1)[0])
    devices = deploy_uniform(cfg.n_devices, area, rng, e_max=cfg.e_max, harvest_rate=cfg.lambda_tau)
    pts = positions_array(devices)
    target = cluster_count(area, cfg.d_max)
    clustering = knn_clustering(pts, min(target, cfg.n_devices), cfg.k_neighbors, rng)
    schedule = round_robin_schedule(clustering)
    print(f"clusters: target {target}, formed {clustering.n_clusters}", file=sys.stderr)
    rows = [
        [j, fmt(pts[j, 0]), fmt(pts[j, 1]), int(clustering.assignment[j]),
         schedule[j].on_time, schedule[j].drx_cycle, schedule[j].offset]
        for j in range(cfg.n_devices)
    ]
    return _rows_csv(["device_id", "x", "y", "cluster_id", "on", "drx", "offset"], rows)


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "battery": cmd_battery,
    "matrix": cmd_matrix,
    "cluster": cmd_cluster,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = _config(args)
        text = COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (UsageError, ConfigError, DomainError, ModelInconsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (EhdutyError, OSError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
