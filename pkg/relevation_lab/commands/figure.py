# relevation_lab/commands/figure.py

# `figure cox`: relevation T₁#T₂ against the sum T₁+T₂ under the Lai–Xie law,
# where the two survival curves cross.
# `figure age`: minimal repair (closed form) against age replacement (Monte
# Carlo) under the Stoyanov NBU law for K in {0.5, 1, 2}, arrivals 1-4.

import dataclasses
import json
import logging
from typing import List

import numpy as np
from scipy.special import gammainccinv

from relevation_lab.commands import RunConfig, add_common_arguments, config_from_args, output_path
from relevation_lab.dist_core import LaiXieNonMonotone, StoyanovNBU
from relevation_lab.export import write_curves_csv, write_json, write_svg
from relevation_lab.orders import refine_until_stable, st_compare
from relevation_lab.processes import AgeReplacementProcess, empirical_curves, simulate_age_replacement
from relevation_lab.relevation import SurvivalCurve, convolution_survival, minimal_repair_marginal, relevation_transform

logger = logging.getLogger(__name__)

COMMAND = "figure"

COX_HORIZON = 3.0
COX_POINTS = 512
AGE_INTERVALS = (0.5, 1.0, 2.0)
AGE_ARRIVALS = 4
AGE_REPS = 100_000


def register(subparsers) -> None:
    parser = subparsers.add_parser(COMMAND, help="reproduce the crossing (cox) or age-replacement (age) figure data")
    parser.add_argument("figure", choices=["cox", "age"])
    parser.add_argument("--grid-points", dest="grid_points", type=int, default=256)
    add_common_arguments(parser)
    parser.set_defaults(handler=run_figure, reps=AGE_REPS)


def run_figure(args) -> int:
    return cmd_figure(config_from_args(COMMAND, args))


def cox_curves(points: int = COX_POINTS, horizon: float = COX_HORIZON) -> List[SurvivalCurve]:
    """Relevation and convolution survival of two Lai–Xie lifetimes on 0 plus `points` times in (0, horizon]."""
    law = LaiXieNonMonotone()
    grid = np.concatenate(([0.0], np.linspace(horizon / points, horizon, points)))
    relevation = SurvivalCurve(
        grid=grid, values=relevation_transform(law, law, grid), tolerance=1e-8, label="relevation", arrival=2
    )
    convolution = SurvivalCurve(
        grid=grid, values=convolution_survival(law, law, grid), tolerance=1e-8, label="convolution", arrival=2
    )
    return [relevation, convolution]


def figure_cox(config: RunConfig) -> dict:
    curves = cox_curves()
    verdict = st_compare(*curves)
    stable = refine_until_stable(lambda points: st_compare(*cox_curves(points)), start=256, max_points=1024)
    logger.info("[figure] cox: %s with %d crossing brackets", verdict.relation, len(verdict.crossings))
    path = output_path(config, "figure_cox.csv")
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_curves_csv(curves, fh, config.echo())
        if config.svg:
            write_svg(curves, output_path(config, "figure_cox.svg"), title="Lai-Xie: T1#T2 vs T1+T2")
    return {"figure": "cox", "verdict": verdict.model_dump(), "refinement": stable.details["refinement"]}


def _age_grid(law, points: int) -> np.ndarray:
    # 0.999 quantile of the last minimal-repair arrival: H(T₄) ~ Gamma(4, 1)
    top = float(law.inverse_cumulative_hazard(gammainccinv(AGE_ARRIVALS, 1e-3)))
    return np.linspace(0.0, top, points + 1)


def figure_age(config: RunConfig) -> dict:
    law = StoyanovNBU()
    grid = _age_grid(law, config.grid_points)
    minimal = [
        SurvivalCurve(
            grid=grid,
            values=minimal_repair_marginal(law, n, grid),
            tolerance=1e-12,
            label="minimal_repair",
            arrival=n,
        )
        for n in range(1, AGE_ARRIVALS + 1)
    ]
    rows: List[SurvivalCurve] = list(minimal)
    checks = []
    # one simultaneous level over all interval and arrival bands
    band_delta = config.delta / (len(AGE_INTERVALS) * AGE_ARRIVALS)
    for K in AGE_INTERVALS:
        spec = AgeReplacementProcess(law=law, interval=K)
        paths = simulate_age_replacement(spec, config.reps, config.seed, n_failures=AGE_ARRIVALS)
        curves = empirical_curves(paths, grid, band_delta)
        for n in range(1, AGE_ARRIVALS + 1):
            empirical = curves[n]
            rows.append(dataclasses.replace(empirical, label=f"age K={K:g}"))
            verdict = st_compare(minimal[n - 1], empirical)
            excess = float(np.max(minimal[n - 1].values - empirical.upper))
            checks.append({"K": K, "n": n, "relation": verdict.relation, "max_excess_over_band": excess})
            logger.info("[figure] age K=%g n=%d: %s", K, n, verdict.relation)

    path = output_path(config, "figure_age.csv")
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write_curves_csv(rows, fh, config.echo())
        if config.svg:
            write_svg(rows, output_path(config, "figure_age.svg"), title="Stoyanov: minimal repair vs age replacement")
    return {"figure": "age", "band_delta": band_delta, "checks": checks}


def cmd_figure(config: RunConfig) -> int:
    result = figure_cox(config) if config.figure == "cox" else figure_age(config)
    result["config"] = config.echo()
    path = output_path(config, f"figure_{config.figure}.json")
    if path:
        write_json(result, path)
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return 0
