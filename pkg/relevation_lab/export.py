# relevation_lab/export.py

# CSV and SVG writers. CSV bytes depend only on the data and the echoed config;
# SVG charts are drawn from the same rows afterwards and never feed back.

import csv
import json
import logging
import os
from typing import Any, Dict, Iterable, List, Optional, Sequence, TextIO

import numpy as np

from relevation_lab.processes import PathSet
from relevation_lab.relevation import SurvivalCurve

logger = logging.getLogger(__name__)

PATH_COLUMNS = ("replication", "arrival_index", "time")
CURVE_COLUMNS = ("t", "survival", "lower", "upper", "n", "process")


def fmt(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return f"{float(value):.17g}"


def config_header(config: Dict[str, Any]) -> str:
    return "# config: " + json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)


def _writer(fh: TextIO, config: Optional[Dict[str, Any]], columns: Sequence[str]):
    if config is not None:
        fh.write(config_header(config) + "\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    return writer


def write_paths_csv(paths: PathSet, fh: TextIO, config: Optional[Dict[str, Any]] = None) -> int:
    """One row per recorded arrival; returns the number of data rows."""
    writer = _writer(fh, config, PATH_COLUMNS)
    rows = 0
    for replication, row in enumerate(paths.times):
        for index, time in enumerate(row, start=1):
            if np.isnan(time):
                break
            writer.writerow((replication, index, fmt(time)))
            rows += 1
    return rows


def curve_rows(curve: SurvivalCurve, process: str) -> Iterable[List[str]]:
    lower, upper = curve.lower, curve.upper
    for t, value, lo, hi in zip(curve.grid, curve.values, lower, upper):
        yield [fmt(t), fmt(value), fmt(lo), fmt(hi), str(curve.arrival), process]


def write_curves_csv(
    curves: Iterable[SurvivalCurve],
    fh: TextIO,
    config: Optional[Dict[str, Any]] = None,
    process: Optional[str] = None,
) -> int:
    """Curves stacked in the `t,survival,lower,upper,n,process` layout; `process` defaults to each curve's label."""
    writer = _writer(fh, config, CURVE_COLUMNS)
    rows = 0
    for curve in curves:
        for row in curve_rows(curve, process or curve.label):
            writer.writerow(row)
            rows += 1
    return rows


def write_json(payload: Dict[str, Any], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def write_svg(curves: Sequence[SurvivalCurve], path: str, title: str = "", labels: Optional[Sequence[str]] = None) -> None:
    """Line chart of survival curves on linear axes, legend from process names."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for i, curve in enumerate(curves):
        name = labels[i] if labels else f"{curve.label} n={curve.arrival}"
        ax.plot(curve.grid, curve.values, linewidth=1.2, label=name)
        if curve.kind == "empirical":
            ax.fill_between(curve.grid, curve.lower, curve.upper, alpha=0.15)
    ax.set_xlabel("t")
    ax.set_ylabel("survival")
    ax.set_ylim(0.0, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(fontsize="small")
    fig.tight_layout()
    # fixed metadata keeps repeated runs byte-identical
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info("[export] wrote %s", os.path.basename(path))
