# relevation_lab/ageing.py

# Grid-based IFR/DFR/NBU/NWU classification. Every verdict is tri-state so the
# exponential boundary case does not flip between yes and no on rounding noise.

import logging
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from relevation_lab.dist_core import LifetimeDistribution
from relevation_lab.errors import RelevationError

logger = logging.getLogger(__name__)

TriState = Literal["yes", "no", "boundary"]

HAZARD_TOLERANCE = 1e-9
NBU_TOLERANCE = 1e-9
GRID_LEVEL = 0.995
HAZARD_POINTS = 512
NBU_POINTS = 64


def _log_grid(d: LifetimeDistribution, points: int) -> np.ndarray:
    top = float(d.quantile(GRID_LEVEL))
    return np.geomspace(top * 1e-3, top, points)


class HazardMonotonicity(BaseModel):
    ifr: TriState
    dfr: TriState
    turning_points: List[float] = Field(default_factory=list)
    grid_size: int


class ProductInequality(BaseModel):
    nbu: TriState
    nwu: TriState
    witnesses: List[Tuple[float, float]] = Field(default_factory=list, description="(s, t) pairs violating NBU or NWU")
    grid_size: int


def classify_hazard_monotonicity(d: LifetimeDistribution, grid=None) -> HazardMonotonicity:
    arr = _log_grid(d, HAZARD_POINTS) if grid is None else np.asarray(grid, dtype=float)
    rates = np.asarray(d.hazard(arr), dtype=float)
    steps = np.diff(rates)
    tol = HAZARD_TOLERANCE * np.maximum(1.0, np.abs(rates[1:]))
    up, down = steps > tol, steps < -tol

    turning: List[float] = []
    if up.any() and down.any():
        signed = np.flatnonzero(up | down)
        for prev, cur in zip(signed[:-1], signed[1:]):
            if up[prev] != up[cur]:
                turning.append(float(arr[cur]))
        ifr = dfr = "no"
    elif up.any():
        ifr, dfr = "yes", "no"
    elif down.any():
        ifr, dfr = "no", "yes"
    else:
        ifr = dfr = "boundary"
    return HazardMonotonicity(ifr=ifr, dfr=dfr, turning_points=turning, grid_size=int(arr.size))


def classify_nbu(d: LifetimeDistribution, s_grid=None, t_grid=None) -> ProductInequality:
    """NBU iff F̄(s+t) ≤ F̄(s)·F̄(t) on the grid product; NWU with the inequality reversed."""
    s = _log_grid(d, NBU_POINTS) if s_grid is None else np.asarray(s_grid, dtype=float)
    t = s if t_grid is None else np.asarray(t_grid, dtype=float)
    ss, tt = np.meshgrid(s, t, indexing="ij")
    product = np.asarray(d.survival(ss)) * np.asarray(d.survival(tt))
    joint = np.asarray(d.survival(ss + tt))
    diff = product - joint
    scale = NBU_TOLERANCE * np.maximum(product, joint)
    worse, better = diff < -scale, diff > scale

    if not worse.any() and not better.any():
        return ProductInequality(nbu="boundary", nwu="boundary", grid_size=int(diff.size))
    witnesses: List[Tuple[float, float]] = []
    if worse.any() and better.any():
        for mask, pick in ((worse, np.argmin), (better, np.argmax)):
            idx = np.unravel_index(pick(np.where(mask, diff, 0.0)), diff.shape)
            witnesses.append((float(ss[idx]), float(tt[idx])))
    return ProductInequality(
        nbu="no" if worse.any() else "yes",
        nwu="no" if better.any() else "yes",
        witnesses=witnesses,
        grid_size=int(diff.size),
    )


def _implies(premise: TriState, conclusion: TriState) -> bool:
    if premise == "yes":
        return conclusion == "yes"
    if premise == "boundary":
        return conclusion in ("yes", "boundary")
    return True


class AgeingReport(BaseModel):
    """Ageing classes of one law; IFR ⇒ NBU and DFR ⇒ NWU are enforced on construction."""

    distribution: str
    ifr: TriState
    dfr: TriState
    nbu: TriState
    nwu: TriState
    turning_points: List[float] = Field(default_factory=list)
    nbu_witnesses: List[Tuple[float, float]] = Field(default_factory=list)
    hazard_grid_size: int
    product_grid_size: int

    @model_validator(mode="after")
    def check_implications(self):
        if not _implies(self.ifr, self.nbu):
            raise ValueError(f"ifr={self.ifr} but nbu={self.nbu}")
        if not _implies(self.dfr, self.nwu):
            raise ValueError(f"dfr={self.dfr} but nwu={self.nwu}")
        return self


def classify(d: LifetimeDistribution, hazard_grid=None, s_grid=None, t_grid=None) -> AgeingReport:
    hazard = classify_hazard_monotonicity(d, hazard_grid)
    product = classify_nbu(d, s_grid, t_grid)
    try:
        report = AgeingReport(
            distribution=d.token,
            ifr=hazard.ifr,
            dfr=hazard.dfr,
            nbu=product.nbu,
            nwu=product.nwu,
            turning_points=hazard.turning_points,
            nbu_witnesses=product.witnesses,
            hazard_grid_size=hazard.grid_size,
            product_grid_size=product.grid_size,
        )
    except ValidationError as e:
        raise RelevationError(f"[{d.token}] inconsistent ageing classification: {e.errors()[0]['msg']}") from None
    logger.info("[ageing] %s: ifr=%s dfr=%s nbu=%s nwu=%s", d.token, report.ifr, report.dfr, report.nbu, report.nwu)
    return report


def predict_relevation_order(d: LifetimeDistribution, report: Optional[AgeingReport] = None) -> str:
    """Expected st relation of relevation (A) against renewal (B) at the second arrival.

    NBU puts relevation below renewal, NWU above; the exponential boundary
    makes them equal. A law that is neither gets no prediction.
    """
    report = report or classify(d)
    if report.nbu == "boundary":
        return "equal"
    if report.nbu == "yes":
        return "a_less_b"
    if report.nwu == "yes":
        return "b_less_a"
    return "inconclusive"
