# relevation_lab/commands/relevation_curve.py

# `relevation-curve`: exact survival curves of the first n EPB arrivals of a
# sequence, by quadrature. With --dist F --dist G and --n 2 this is the
# relevation F # G.

import logging
import sys

import numpy as np

from relevation_lab.commands import RunConfig, add_common_arguments, build_sequence, config_from_args, output_path
from relevation_lab.export import write_curves_csv, write_svg
from relevation_lab.relevation import default_grid, epb_marginal_curves

logger = logging.getLogger(__name__)

COMMAND = "relevation-curve"


def register(subparsers) -> None:
    parser = subparsers.add_parser(COMMAND, help="exact EPB / relevation survival curves")
    parser.add_argument("--n", dest="n_arrivals", type=int, default=2)
    parser.add_argument("--grid-points", dest="grid_points", type=int, default=256)
    parser.add_argument("--t-max", dest="t_max", type=float, help="last grid time (default: 0.999 quantile of the n-th law)")
    parser.add_argument("--svg", action="store_true")
    add_common_arguments(parser, seeded=False)
    parser.set_defaults(handler=run_relevation_curve)


def run_relevation_curve(args) -> int:
    config = config_from_args(COMMAND, args)
    return cmd_relevation_curve(config, t_max=args.t_max)


def cmd_relevation_curve(config: RunConfig, t_max=None) -> int:
    seq = build_sequence(config.dists, config.sequence, config.extend)
    n = config.n_arrivals
    if t_max is None:
        grid = default_grid(seq.nth(n), points=config.grid_points)
    else:
        grid = np.concatenate(([0.0], np.linspace(t_max / config.grid_points, t_max, config.grid_points)))
    curves = epb_marginal_curves(seq, n, grid)
    header = dict(config.echo(), t_max=t_max)

    path = output_path(config, "relevation_curve.csv")
    if path is None:
        write_curves_csv(curves, sys.stdout, header, process="epb")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_curves_csv(curves, fh, header, process="epb")
        if config.svg:
            write_svg(curves, output_path(config, "relevation_curve.svg"), title=seq.token)
    logger.info("[relevation-curve] %d curves on %d grid points", len(curves), grid.size)
    return 0
