# relevation_lab/commands/compare.py

# `compare`: two processes driven by the same uniform streams. Per arrival n the
# survival curves of Tₙ are compared in the st order (exact where a quadrature
# form exists, empirical otherwise), counts are compared at the requested times
# and, for an EPB process against a replacement process, the pathwise coupling
# is certified.

import json
import logging
from typing import Dict, List, Optional

from relevation_lab.commands import RunConfig, add_common_arguments, build_sequence, config_from_args, curve_grid, output_path
from relevation_lab.errors import InconclusiveError, QuadratureError
from relevation_lab.export import write_curves_csv, write_json, write_svg
from relevation_lab.orders import count_compare, coupling_certificate, st_compare
from relevation_lab.processes import PROCESS_KINDS, PathSet, arrival_column, build_process, empirical_survival, simulate_paths
from relevation_lab.relevation import SurvivalCurve, convolution_survival, epb_marginal_curves

logger = logging.getLogger(__name__)

COMMAND = "compare"


def register(subparsers) -> None:
    parser = subparsers.add_parser(COMMAND, help="compare two processes in the st / count / coupling sense")
    parser.add_argument("--a", dest="process", default="relevation", choices=PROCESS_KINDS, help="process A")
    parser.add_argument("--b", dest="process_b", default="renewal", choices=PROCESS_KINDS, help="process B")
    parser.add_argument("--dist-b", dest="dists_b", action="append", default=[], help="laws of B (default: same as A)")
    parser.add_argument("--sequence-b", dest="sequence_b")
    parser.add_argument("--n", dest="n_arrivals", type=int, default=4)
    parser.add_argument("--t", dest="count_times", type=float, action="append", default=[], help="count comparison time (repeatable)")
    parser.add_argument("--offset", type=float, default=1.0)
    parser.add_argument("--interval", type=float)
    parser.add_argument("--grid-points", dest="grid_points", type=int, default=256)
    parser.add_argument("--mode", default="auto", choices=["auto", "exact", "empirical"], help="curve source for st verdicts")
    add_common_arguments(parser)
    parser.set_defaults(handler=run_compare)


def run_compare(args) -> int:
    return cmd_compare(config_from_args(COMMAND, args))


def _exact_curves(spec, n_max: int, grid) -> Dict[int, SurvivalCurve]:
    """Quadrature curves where available: every EPB arrival, renewal arrivals 1 and 2."""
    if spec.policy == "epb":
        return {c.arrival: c for c in epb_marginal_curves(spec.sequence, n_max, grid)}
    if spec.policy == "renewal":
        seq = spec.sequence
        first = SurvivalCurve(grid=grid, values=seq.nth(1).survival(grid), tolerance=1e-9, label=spec.token, arrival=1)
        curves = {1: first}
        if n_max >= 2:
            values = convolution_survival(seq.nth(1), seq.nth(2), grid)
            curves[2] = SurvivalCurve(grid=grid, values=values, tolerance=2e-8, label=spec.token, arrival=2)
        return curves
    return {}


def _exact_or_none(spec, n_max: int, grid, mode: str) -> Dict[int, SurvivalCurve]:
    try:
        return _exact_curves(spec, n_max, grid)
    except QuadratureError as e:
        if mode == "exact":
            raise
        logger.warning("[compare] %s: quadrature unavailable on this grid (%s); using Monte Carlo", spec.token, e)
        return {}


def cmd_compare(config: RunConfig) -> int:
    seq_a = build_sequence(config.dists, config.sequence, config.extend)
    if config.dists_b or config.sequence_b:
        seq_b = build_sequence(config.dists_b, config.sequence_b, config.extend)
    else:
        seq_b = seq_a
    spec_a = build_process(config.process, seq_a, offset=config.offset, interval=config.interval)
    spec_b = build_process(config.process_b, seq_b, offset=config.offset, interval=config.interval)
    n_max = config.n_arrivals

    # common seed: replication r of A and of B read the same uniform stream
    paths_a = simulate_paths(spec_a, n_max, config.reps, config.seed)
    paths_b = simulate_paths(spec_b, n_max, config.reps, config.seed)

    exact_a = exact_b = {}
    if config.mode != "empirical":
        grid = curve_grid(arrival_column(paths_b, n_max), config.grid_points)
        exact_a = _exact_or_none(spec_a, n_max, grid, config.mode)
        exact_b = _exact_or_none(spec_b, n_max, grid, config.mode)

    # δ split across every empirical curve that may enter a verdict
    delta = config.delta / (2 * n_max)
    verdicts: List[dict] = []
    curves_out: List[SurvivalCurve] = []
    for n in range(1, n_max + 1):
        grid_n = curve_grid(arrival_column(paths_b, n), config.grid_points)
        a = exact_a.get(n) or empirical_survival(paths_a, n, grid_n, delta)
        b = exact_b.get(n) or empirical_survival(paths_b, n, grid_n, delta)
        if config.mode == "exact" and (a.kind != "exact" or b.kind != "exact"):
            logger.warning("[compare] no exact curve for arrival %d; using Monte Carlo", n)
        verdict = st_compare(a, b)
        verdicts.append({"n": n, **verdict.model_dump()})
        curves_out.extend([a, b])
        logger.info("[compare] arrival %d: %s (%s)", n, verdict.relation, "statistical" if verdict.statistical else "exact")

    counts = [count_compare(paths_a, paths_b, t, config.delta).model_dump() for t in config.count_times]
    coupling = _coupling(spec_a, spec_b, paths_a, paths_b)

    result = {
        "a": spec_a.token,
        "b": spec_b.token,
        "st": verdicts,
        "count": counts,
        "coupling": coupling,
        "config": config.echo(),
    }
    path = output_path(config, "verdict.json")
    if path:
        write_json(result, path)
        with open(output_path(config, "curves.csv"), "w", encoding="utf-8", newline="") as fh:
            write_curves_csv(curves_out, fh, config.echo())
        if config.svg:
            write_svg(curves_out, output_path(config, "curves.svg"), title=f"{spec_a.token} vs {spec_b.token}")
    print(json.dumps(result, indent=2, sort_keys=True, default=str))

    inconclusive = [v["n"] for v in verdicts if v["relation"] == "inconclusive"]
    inconclusive += [c["details"]["t"] for c in counts if c["relation"] == "inconclusive"]
    if config.strict and inconclusive:
        raise InconclusiveError(f"statistically inconclusive at {inconclusive}")
    return 0


def _coupling(spec_a, spec_b, paths_a: PathSet, paths_b: PathSet) -> Optional[dict]:
    policies = (spec_a.policy, spec_b.policy)
    if policies == ("epb", "renewal"):
        return coupling_certificate(paths_b, paths_a).model_dump()
    if policies == ("renewal", "epb"):
        return coupling_certificate(paths_a, paths_b).model_dump()
    return None
