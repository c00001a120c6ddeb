# relevation_lab/commands/__init__.py

# Shared pieces of the subcommands: the validated RunConfig, the common flags
# and the output helpers. Each subcommand module owns one name and registers
# itself on the parser in main.py.

import logging
import os
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator

from relevation_lab.dist_core import parse_distribution
from relevation_lab.errors import ConfigError
from relevation_lab.relevation import DistributionSequence, load_sequence

logger = logging.getLogger(__name__)

SEEDED_COMMANDS = ("simulate", "compare", "figure")


class RunConfig(BaseModel):
    """Everything a run depends on; echoed into every CSV header."""

    command: Literal["simulate", "compare", "figure", "ageing", "relevation-curve"]
    process: Optional[str] = Field(None, description="process kind for simulate / side A of compare")
    process_b: Optional[str] = Field(None, description="process kind for side B of compare")
    dists: List[str] = Field(default_factory=list, description="distribution mini-grammar strings")
    dists_b: List[str] = Field(default_factory=list)
    sequence: Optional[str] = Field(None, description="JSON sequence file or text")
    sequence_b: Optional[str] = None
    extend: Literal["repeat_last", "cycle", "finite"] = "repeat_last"
    figure: Optional[Literal["cox", "age"]] = None
    reps: int = Field(10_000, ge=1)
    n_arrivals: int = Field(3, ge=1)
    seed: Optional[int] = Field(None, ge=0)
    grid_points: int = Field(256, ge=2)
    delta: float = Field(0.01, gt=0, lt=1, description="simultaneous band level, split across curves")
    offset: float = Field(1.0, gt=-1.0)
    interval: Optional[float] = Field(None, gt=0)
    horizon: Optional[float] = Field(None, gt=0)
    count_times: List[float] = Field(default_factory=list)
    mode: Literal["auto", "exact", "empirical"] = "auto"

    # presentation only; not part of the echoed config
    out_dir: Optional[str] = None
    svg: bool = False
    strict: bool = False

    @model_validator(mode="after")
    def seed_required(self):
        if self.command in SEEDED_COMMANDS and self.seed is None:
            raise ValueError(f"--seed is mandatory for '{self.command}' (no wall-clock default)")
        return self

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(exclude={"out_dir", "svg", "strict"}, exclude_none=True)


def add_common_arguments(parser, *, seeded: bool = True) -> None:
    parser.add_argument("--dist", dest="dists", action="append", default=[], help="distribution, e.g. gamma:shape=2,scale=1 (repeatable)")
    parser.add_argument("--sequence", help="JSON sequence file or inline JSON")
    parser.add_argument("--extend", default="repeat_last", choices=["repeat_last", "cycle", "finite"])
    parser.add_argument("--out-dir", dest="out_dir", help="directory for CSV/JSON/SVG outputs")
    if seeded:
        parser.add_argument("--seed", type=int, help="master seed (mandatory)")
        parser.add_argument("--reps", type=int, default=10_000)
        parser.add_argument("--delta", type=float, default=0.01, help="DKW band level")
        parser.add_argument("--svg", action="store_true", help="also draw SVG line charts")
        parser.add_argument("--strict", action="store_true", help="exit 4 on statistically inconclusive verdicts")


def config_from_args(command: str, args, **extra) -> RunConfig:
    fields = {name: getattr(args, name) for name in RunConfig.model_fields if hasattr(args, name)}
    fields.update(extra)
    fields["command"] = command
    return RunConfig(**fields)


def build_sequence(dists: List[str], sequence: Optional[str], extend: str = "repeat_last") -> DistributionSequence:
    """Sequence from repeated --dist tokens or a --sequence JSON source (not both)."""
    if sequence and dists:
        raise ConfigError("give either --dist or --sequence, not both")
    if sequence:
        return load_sequence(sequence)
    if not dists:
        raise ConfigError("a distribution is required (--dist or --sequence)")
    return DistributionSequence(entries=[parse_distribution(tok) for tok in dists], extend=extend)


def output_path(config: RunConfig, name: str) -> Optional[str]:
    if not config.out_dir:
        return None
    os.makedirs(config.out_dir, exist_ok=True)
    return os.path.join(config.out_dir, name)


def curve_grid(samples: np.ndarray, points: int, level: float = 0.999) -> np.ndarray:
    """0 followed by log-spaced times up to the empirical `level` quantile of the finite samples."""
    finite = samples[np.isfinite(samples)]
    if finite.size == 0:
        raise ConfigError("no finite arrival times to build a grid from")
    top = float(np.quantile(finite, level))
    return np.concatenate(([0.0], np.geomspace(top * 1e-3, top, points)))
