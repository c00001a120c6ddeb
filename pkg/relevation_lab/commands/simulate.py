# relevation_lab/commands/simulate.py

# `simulate`: seeded arrival paths for one process, written as a path CSV, a
# per-arrival empirical curve CSV and a JSON summary of inter-arrival means.

import json
import logging
import sys

import numpy as np

from relevation_lab.commands import RunConfig, add_common_arguments, build_sequence, config_from_args, curve_grid, output_path
from relevation_lab.export import write_curves_csv, write_json, write_paths_csv, write_svg
from relevation_lab.processes import (
    PROCESS_KINDS,
    arrival_column,
    build_process,
    empirical_curves,
    interarrival_means,
    simulate_age_replacement,
    simulate_paths,
)

logger = logging.getLogger(__name__)

COMMAND = "simulate"


def register(subparsers) -> None:
    parser = subparsers.add_parser(COMMAND, help="simulate arrival paths of one process")
    parser.add_argument("--process", required=True, choices=PROCESS_KINDS)
    parser.add_argument("--n", dest="n_arrivals", type=int, default=3, help="arrivals per path")
    parser.add_argument("--offset", type=float, default=1.0, help="Yule multiplier offset")
    parser.add_argument("--interval", type=float, help="age replacement interval K")
    parser.add_argument("--horizon", type=float, help="stop age replacement paths past this time")
    parser.add_argument("--grid-points", dest="grid_points", type=int, default=256)
    add_common_arguments(parser)
    parser.set_defaults(handler=run_simulate)


def run_simulate(args) -> int:
    config = config_from_args(COMMAND, args)
    return cmd_simulate(config)


def _curves(config: RunConfig, paths):
    """Per-arrival empirical curves; only written alongside the path file."""
    arrivals = list(range(1, paths.arrivals + 1))
    if paths.stopping == "horizon":
        grid = np.linspace(0.0, config.horizon, config.grid_points + 1)
    else:
        grid = curve_grid(arrival_column(paths, arrivals[-1]), config.grid_points)
    # δ split across the per-arrival curves
    return empirical_curves(paths, grid, config.delta / len(arrivals), arrivals)


def cmd_simulate(config: RunConfig) -> int:
    seq = build_sequence(config.dists, config.sequence, config.extend)
    spec = build_process(config.process, seq, offset=config.offset, interval=config.interval)

    if spec.policy == "age" and config.horizon is not None:
        paths = simulate_age_replacement(spec, config.reps, config.seed, horizon=config.horizon)
    else:
        paths = simulate_paths(spec, config.n_arrivals, config.reps, config.seed)

    means, errors = interarrival_means(paths)
    summary = {
        "process": spec.token,
        "replications": paths.replications,
        "arrivals": paths.arrivals,
        "seed": config.seed,
        "interarrival_mean": [float(m) for m in means],
        "interarrival_stderr": [float(e) for e in errors],
    }
    for i, (m, e) in enumerate(zip(means, errors), start=1):
        logger.info("[simulate] arrival %d: mean gap %.6g (se %.2g)", i, m, e)

    path_csv = output_path(config, "paths.csv")
    if path_csv is None:
        rows = write_paths_csv(paths, sys.stdout, config.echo())
    else:
        with open(path_csv, "w", encoding="utf-8", newline="") as fh:
            rows = write_paths_csv(paths, fh, config.echo())
        curves = _curves(config, paths)
        with open(output_path(config, "curves.csv"), "w", encoding="utf-8", newline="") as fh:
            write_curves_csv(curves, fh, config.echo(), process=spec.token)
        write_json(summary, output_path(config, "summary.json"))
        if config.svg:
            write_svg(list(curves), output_path(config, "curves.svg"), title=spec.token)
        print(json.dumps(summary, sort_keys=True))
    logger.info("[simulate] wrote %d path rows", rows)
    return 0
