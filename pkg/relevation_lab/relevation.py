# relevation_lab/relevation.py

# Relevation transform, EPB (elementary pure birth) marginal and joint laws and
# the closed-form minimal-repair oracle.
#
# Marginals follow the recursion
#   Ḡ₁ = F̄₁,   Ḡₙ(t) = Ḡₙ₋₁(t) + F̄ₙ(t)·Iₙ(t),   Iₙ(t) = ∫₀ᵗ gₙ₋₁(x)/F̄ₙ(x) dx,
# with F̄ₙ evaluated at the integration variable, and the density recursion
#   gₙ(t) = fₙ(t)·Iₙ(t),   I₁ ≡ 1,
# so each level only needs the previous level's antiderivative, never a
# numerical derivative of Ḡ.

import json
import logging
import math
import os
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy.special import gammaincc

from relevation_lab.dist_core import HazardMultiple, LifetimeDistribution, parse_distribution
from relevation_lab.errors import (
    ConfigError,
    DomainError,
    GridError,
    IntegrandSingularityError,
    OutOfSupportError,
    SequenceExhaustedError,
)
from relevation_lab.quadrature import ChebyshevAntiderivative, integrate

logger = logging.getLogger(__name__)

SINGULARITY_GUARD = 1e-12
GUARD_PROBES = 1024
# an EPB level carries ten times the quadrature tolerance of its laws
LEVEL_TOLERANCE_FACTOR = 10.0


class DistributionSequence(BaseModel):
    """The laws {Fₙ} behind an EPB or replacement process, with a rule for indices past the list."""

    model_config = ConfigDict(frozen=True)

    entries: List[LifetimeDistribution] = Field(..., min_length=1)
    extend: Literal["repeat_last", "cycle", "finite"] = "repeat_last"

    def nth(self, k: int) -> LifetimeDistribution:
        """Law of the k-th unit, k >= 1."""
        if k < 1:
            raise DomainError(f"sequence index must be >= 1, got {k}")
        size = len(self.entries)
        if k <= size:
            return self.entries[k - 1]
        if self.extend == "repeat_last":
            return self.entries[-1]
        if self.extend == "cycle":
            return self.entries[(k - 1) % size]
        raise SequenceExhaustedError(f"finite sequence of {size} laws has no entry {k}")

    def prefix(self, n: int) -> List[LifetimeDistribution]:
        return [self.nth(k) for k in range(1, n + 1)]

    @property
    def token(self) -> str:
        return "[" + ";".join(d.token for d in self.entries) + f"]/{self.extend}"

    def is_identical(self, n: int) -> bool:
        first = self.nth(1)
        return all(d == first for d in self.prefix(n))


class YuleSequence(DistributionSequence):
    """Generalised Yule laws: the k-th law has hazard (k + offset)·r(t), r the hazard of the k-th entry."""

    offset: float = Field(1.0, gt=-1.0)

    def nth(self, k: int) -> LifetimeDistribution:
        return HazardMultiple(base=super().nth(k), multiplier=k + self.offset)

    @property
    def base(self) -> DistributionSequence:
        """The underlying laws, without the hazard multipliers."""
        return DistributionSequence(entries=self.entries, extend=self.extend)

    @property
    def token(self) -> str:
        return f"yule({super().token},offset={self.offset:g})"


@dataclass(frozen=True)
class SurvivalCurve:
    """Survival values on a grid; exact (with a tolerance) or empirical (with a DKW half-width)."""

    grid: np.ndarray
    values: np.ndarray
    kind: Literal["exact", "empirical"] = "exact"
    tolerance: float = 0.0
    replications: int = 0
    confidence: float = 0.0
    half_width: float = 0.0
    label: str = ""
    arrival: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size == 0:
            raise GridError("curve grid and values must be equal-length 1-D arrays")
        if grid[0] < 0 or np.any(np.diff(grid) <= 0):
            raise GridError("curve grid must be non-negative and strictly increasing")
        slack = self.margin + 1e-12
        if np.any(np.diff(values) > 2 * slack):
            raise GridError(f"curve '{self.label}' increases beyond its {self.kind} margin")
        if self.kind == "exact" and grid[0] == 0 and abs(values[0] - 1.0) > slack:
            raise GridError(f"exact curve '{self.label}' must start at 1, got {values[0]!r}")

    @property
    def margin(self) -> float:
        return self.tolerance if self.kind == "exact" else self.half_width

    @property
    def lower(self) -> np.ndarray:
        return np.clip(self.values - self.margin, 0.0, 1.0)

    @property
    def upper(self) -> np.ndarray:
        return np.clip(self.values + self.margin, 0.0, 1.0)


def quad_tolerance(*laws: LifetimeDistribution) -> float:
    """Tightest `quad_tol` among the laws entering one integral."""
    return min(law.quad_tol for law in laws)


def default_grid(dist: LifetimeDistribution, points: int = 256, level: float = 0.999) -> np.ndarray:
    """0 followed by `points` log-spaced times on (0, quantile(level)]."""
    top = float(dist.quantile(level))
    return np.concatenate(([0.0], np.geomspace(top * 1e-3, top, points)))


def _times(t) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("times must be >= 0")
    return arr


def _guard_ratio(F: LifetimeDistribution, G: LifetimeDistribution, upper: float) -> None:
    """Raise when F̄/Ḡ exceeds 1/SINGULARITY_GUARD somewhere in (0, upper]."""
    if upper <= 0:
        return
    probe = np.linspace(0.0, upper, GUARD_PROBES + 1)[1:]
    gap = np.asarray(F.log_survival_ratio(G, probe))
    bad = np.flatnonzero(gap > -math.log(SINGULARITY_GUARD))
    if bad.size:
        raise IntegrandSingularityError(f"survival of {G.token} vanishes relative to {F.token} inside [0, {upper:.6g}]", float(probe[bad[0]]))


def relevation_transform(F: LifetimeDistribution, G: LifetimeDistribution, t):
    """Survival of the relevation F # G: F̄(t) + Ḡ(t)·∫₀ᵗ f(x)/Ḡ(x) dx, clamped to [0,1]."""
    arr = _times(t)
    order = np.argsort(arr)
    ordered = arr[order]
    _guard_ratio(F, G, float(ordered[-1]))

    def integrand(x):
        return F.density_over_survival(G, x)

    tol = quad_tolerance(F, G)
    kinks = F.breakpoints() + G.breakpoints()
    pieces = np.empty_like(ordered)
    previous = 0.0
    for i, upper in enumerate(ordered):
        pieces[i] = integrate(integrand, previous, upper, epsabs=tol, points=kinks)
        previous = upper
    accumulated = np.cumsum(pieces)

    values = np.empty_like(arr)
    values[order] = F.survival(ordered) + G.survival(ordered) * accumulated
    values = np.clip(values, 0.0, 1.0)
    return float(values[0]) if np.ndim(t) == 0 else values


def convolution_survival(F: LifetimeDistribution, G: LifetimeDistribution, t):
    """Survival of the independent sum X + Y (X ~ F, Y ~ G): F̄(t) + ∫₀ᵗ Ḡ(t−x) f(x) dx."""
    arr = _times(t)
    tol = quad_tolerance(F, G)
    values = np.empty_like(arr)
    for i, upper in enumerate(arr):
        if upper == 0:
            values[i] = 1.0
            continue
        kinks = F.breakpoints() + tuple(upper - p for p in G.breakpoints())
        tail = integrate(
            lambda x, upper=upper: G.survival(max(upper - x, 0.0)) * F.density(x),
            0.0,
            upper,
            epsabs=tol,
            points=kinks,
        )
        values[i] = F.survival(upper) + tail
    values = np.clip(values, 0.0, 1.0)
    return float(values[0]) if np.ndim(t) == 0 else values


class EPBLevels:
    """Per-call cache of the antiderivatives I₂..Iₙ on [0, upper]."""

    def __init__(self, seq: DistributionSequence, n: int, upper: float):
        if n < 1:
            raise DomainError(f"arrival index must be >= 1, got {n}")
        self.entries = seq.prefix(n)
        self.upper = float(upper)
        self._levels: List[Optional[ChebyshevAntiderivative]] = [None]
        self.tolerance = quad_tolerance(*self.entries)

        for k in range(2, n + 1):
            prev, cur = self.entries[k - 2], self.entries[k - 1]
            _guard_ratio(prev, cur, self.upper)
            below = self._levels[-1]

            def integrand(x, prev=prev, cur=cur, below=below):
                weight = 1.0 if below is None else below(x)
                return prev.density_over_survival(cur, x) * weight

            def head(width, prev=prev, cur=cur, below=below):
                mass = -math.expm1(-prev.cumulative_hazard(width))
                weight = 1.0 if below is None else float(below(width))
                return mass * weight / cur.survival(width)

            self._levels.append(
                ChebyshevAntiderivative(
                    integrand,
                    self.upper,
                    head_integral=head,
                    breakpoints=prev.breakpoints() + cur.breakpoints(),
                    atol=1e-5 * self.tolerance,
                    rtol=1e-4 * self.tolerance,
                )
            )
            logger.debug("[relevation] level %d cached with %d panels", k, self._levels[-1].panel_count)

    def level(self, k: int, x: np.ndarray) -> np.ndarray:
        if k == 1:
            return np.ones_like(x)
        return self._levels[k - 1](x)

    def survival(self, k: int, x: np.ndarray) -> np.ndarray:
        total = self.entries[0].survival(x)
        for j in range(2, k + 1):
            total = total + self.entries[j - 1].survival(x) * self.level(j, x)
        return np.clip(total, 0.0, 1.0)

    def density(self, k: int, x: np.ndarray) -> np.ndarray:
        return self.entries[k - 1].density(x) * self.level(k, x)


def _marginal_grid(seq: DistributionSequence, n: int, grid) -> np.ndarray:
    if grid is None:
        return default_grid(seq.nth(n))
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 1 or arr.size == 0 or arr[0] < 0 or np.any(np.diff(arr) <= 0):
        raise GridError("grid must be a non-empty strictly increasing array of times >= 0")
    return arr


def epb_marginal(seq: DistributionSequence, n: int, grid=None) -> SurvivalCurve:
    """Exact survival curve Ḡₙ of the n-th EPB arrival time."""
    arr = _marginal_grid(seq, n, grid)
    upper = float(arr[-1]) if arr[-1] > 0 else 1.0
    levels = EPBLevels(seq, n, upper)
    values = levels.survival(n, arr)
    return SurvivalCurve(
        grid=arr,
        values=values,
        kind="exact",
        tolerance=n * LEVEL_TOLERANCE_FACTOR * levels.tolerance,
        label=f"epb {seq.token}",
        arrival=n,
    )


def epb_marginal_density(seq: DistributionSequence, n: int, grid=None) -> np.ndarray:
    """Density gₙ of the n-th EPB arrival time on `grid`."""
    arr = _marginal_grid(seq, n, grid)
    upper = float(arr[-1]) if arr[-1] > 0 else 1.0
    return EPBLevels(seq, n, upper).density(n, arr)


def epb_marginal_curves(seq: DistributionSequence, n: int, grid=None) -> List[SurvivalCurve]:
    """Curves for arrivals 1..n sharing one level cache."""
    arr = _marginal_grid(seq, n, grid)
    upper = float(arr[-1]) if arr[-1] > 0 else 1.0
    levels = EPBLevels(seq, n, upper)
    return [
        SurvivalCurve(
            grid=arr,
            values=levels.survival(k, arr),
            kind="exact",
            tolerance=k * LEVEL_TOLERANCE_FACTOR * levels.tolerance,
            label=f"epb {seq.token}",
            arrival=k,
        )
        for k in range(1, n + 1)
    ]


def minimal_repair_marginal(F: LifetimeDistribution, n: int, t):
    """F̄(t)·Σ_{k<n} H(t)^k/k!, i.e. the regularised upper incomplete gamma Q(n, H(t))."""
    if int(n) != n or n < 1:
        raise DomainError(f"arrival index must be an integer >= 1, got {n}")
    arr = np.asarray(t, dtype=float)
    if np.any(np.atleast_1d(F.survival(arr)) <= 0):
        raise OutOfSupportError(f"[{F.token}] survival vanishes on the requested times")
    values = gammaincc(int(n), F.cumulative_hazard(arr))
    return float(values) if np.ndim(t) == 0 else np.asarray(values)


def epb_joint_density(seq: DistributionSequence, times: Sequence[float]) -> float:
    """Joint density of (T₁..Tₙ) at t₁ < … < tₙ: ∏ᵢ fᵢ(tᵢ)/F̄ᵢ(tᵢ₋₁) with t₀ = 0.

    Product of the Markov transition densities; for identical laws this is
    ∏_{i<n} r(tᵢ) · f(tₙ).
    """
    arr = np.asarray(times, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("joint density needs a non-empty 1-D tuple of times")
    if arr[0] <= 0 or np.any(np.diff(arr) <= 0):
        raise DomainError(f"joint density needs 0 < t1 < ... < tn, got {arr.tolist()}")
    value = 1.0
    previous = 0.0
    for i, t in enumerate(arr, start=1):
        law = seq.nth(i)
        alive = float(law.survival(previous))
        if alive <= 0:
            raise OutOfSupportError(f"[{law.token}] survival vanishes at t={previous:.17g}")
        value *= float(law.density(t)) / alive
        previous = t
    return value


def _sequence_from_payload(payload) -> DistributionSequence:
    extend = "repeat_last"
    tokens: List[str] = []
    if isinstance(payload, dict):
        tokens = payload.get("entries", [])
        extend = payload.get("extend", extend)
        offset = payload.get("yule_offset")
    elif isinstance(payload, list):
        offset = None
        for item in payload:
            if isinstance(item, dict):
                extend = item.get("extend", extend)
                offset = item.get("yule_offset", offset)
            else:
                tokens.append(item)
    else:
        raise ConfigError("sequence must be a JSON array or an object with 'entries'")
    if not tokens or not all(isinstance(tok, str) for tok in tokens):
        raise ConfigError("sequence needs at least one distribution string")
    entries = [parse_distribution(tok) for tok in tokens]
    try:
        if offset is not None:
            return YuleSequence(entries=entries, extend=extend, offset=offset)
        return DistributionSequence(entries=entries, extend=extend)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"invalid sequence field '{first['loc'][0]}': {first['msg']}") from None


def load_sequence(source: str) -> DistributionSequence:
    """Sequence from a JSON file path or JSON text: `["gamma:shape=2", {"extend": "cycle"}]`."""
    text = source
    if os.path.exists(source):
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"sequence is not valid JSON: {e}") from None
    return _sequence_from_payload(payload)
