# relevation_lab/orders.py

# Stochastic-order verdicts: usual (st), hazard rate (hr) and multivariate
# dynamic hazard rate (dyn-hr) comparisons, CIS transition checks, the NBU
# relevation integral, counting-process and pathwise coupling certificates.
#
# "For all t" is always certified on a finite grid; refine_until_stable doubles
# the grid until the relation stops moving.

import dataclasses
import logging
from typing import Any, Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.interpolate import PchipInterpolator

from relevation_lab.dist_core import LifetimeDistribution, Residual
from relevation_lab.errors import DomainError, GridError, HistoryError
from relevation_lab.processes import PathSet, count_at, dkw_half_width
from relevation_lab.quadrature import integrate
from relevation_lab.relevation import DistributionSequence, SurvivalCurve, default_grid, quad_tolerance

logger = logging.getLogger(__name__)

EXACT_TIE_TOLERANCE = 1e-9
DYN_HR_TOLERANCE = 1e-12
COUPLING_RTOL = 1e-9

Relation = Literal["a_less_b", "b_less_a", "equal", "crossing", "inconclusive"]
OrderKind = Literal["st", "hr", "dyn_hr", "cis", "count"]

_SWAP = {"a_less_b": "b_less_a", "b_less_a": "a_less_b"}


class OrderVerdict(BaseModel):
    """Outcome of comparing A against B under one order."""

    relation: Relation
    order: OrderKind
    witnesses: List[Any] = Field(default_factory=list, description="points certifying the relation or a violation")
    tolerance: float = Field(..., ge=0, description="tie tolerance or combined band half-width")
    grid_size: int = Field(..., ge=0)
    crossings: List[Tuple[float, float]] = Field(
        default_factory=list, description="grid intervals bracketing certified sign changes"
    )
    statistical: bool = Field(False, description="True when any input is a Monte Carlo estimate")
    details: Dict[str, Any] = Field(default_factory=dict)

    def swapped(self) -> "OrderVerdict":
        return self.model_copy(update={"relation": _SWAP.get(self.relation, self.relation)})

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


# -----------------------------------------------------------------
# Usual stochastic order on curves
# -----------------------------------------------------------------
def resample(curve: SurvivalCurve, grid) -> SurvivalCurve:
    """Monotone (PCHIP) interpolation of `curve` onto `grid`, which must lie inside the curve's grid."""
    arr = np.asarray(grid, dtype=float)
    if arr[0] < curve.grid[0] or arr[-1] > curve.grid[-1]:
        raise GridError(
            f"cannot resample '{curve.label}' from [{curve.grid[0]:g}, {curve.grid[-1]:g}] onto [{arr[0]:g}, {arr[-1]:g}]"
        )
    if curve.grid.size == 1:
        values = np.full_like(arr, curve.values[0])
    else:
        values = np.clip(PchipInterpolator(curve.grid, curve.values)(arr), 0.0, 1.0)
    return dataclasses.replace(curve, grid=arr, values=values)


def _common_grid(a: SurvivalCurve, b: SurvivalCurve) -> Tuple[SurvivalCurve, SurvivalCurve]:
    if a.grid.shape == b.grid.shape and np.array_equal(a.grid, b.grid):
        return a, b
    lo, hi = max(a.grid[0], b.grid[0]), min(a.grid[-1], b.grid[-1])
    merged = np.union1d(a.grid, b.grid)
    merged = merged[(merged >= lo) & (merged <= hi)]
    if merged.size < 2:
        raise GridError("curve grids do not overlap")
    return resample(a, merged), resample(b, merged)


def _brackets(grid: np.ndarray, above: np.ndarray, below: np.ndarray) -> List[Tuple[float, float]]:
    """Intervals between consecutive certified points whose signs differ."""
    certified = np.flatnonzero(above | below)
    out = []
    for prev, cur in zip(certified[:-1], certified[1:]):
        if above[prev] != above[cur]:
            out.append((float(grid[prev]), float(grid[cur])))
    return out


def _signed_verdict(
    grid: np.ndarray,
    diff: np.ndarray,
    margin,
    *,
    order: OrderKind,
    statistical: bool,
    tolerance: float,
    details: Optional[Dict[str, Any]] = None,
) -> OrderVerdict:
    # diff > 0 certifies "A above B", which is a violation of A ≤ B
    above = diff > margin
    below = diff < -margin
    crossings: List[Tuple[float, float]] = []
    witnesses: List[Any] = []
    if above.any() and below.any():
        relation = "crossing"
        crossings = _brackets(grid, above, below)
        witnesses = [float(grid[np.argmax(diff)]), float(grid[np.argmin(diff)])]
    elif below.any():
        relation = "a_less_b"
        witnesses = [float(grid[np.argmin(diff)])]
    elif above.any():
        relation = "b_less_a"
        witnesses = [float(grid[np.argmax(diff)])]
    else:
        relation = "inconclusive" if statistical else "equal"
    return OrderVerdict(
        relation=relation,
        order=order,
        witnesses=witnesses,
        tolerance=tolerance,
        grid_size=int(grid.size),
        crossings=crossings,
        statistical=statistical,
        details=details or {},
    )


def st_compare(curve_a: SurvivalCurve, curve_b: SurvivalCurve) -> OrderVerdict:
    """A ≤st B when A's survival never exceeds B's beyond the tie tolerance (exact) or the combined DKW bands."""
    a, b = _common_grid(curve_a, curve_b)
    statistical = a.kind == "empirical" or b.kind == "empirical"
    if statistical:
        margin = a.margin + b.margin
    else:
        margin = max(EXACT_TIE_TOLERANCE, a.margin + b.margin)
    verdict = _signed_verdict(
        a.grid,
        a.values - b.values,
        margin,
        order="st",
        statistical=statistical,
        tolerance=margin,
        details={"a": a.label, "b": b.label, "arrival": a.arrival or b.arrival},
    )
    logger.debug("[orders] st %s vs %s: %s", a.label, b.label, verdict.relation)
    return verdict


def refine_until_stable(
    build: Callable[[int], OrderVerdict],
    start: int = 256,
    max_points: int = 2 ** 14,
) -> OrderVerdict:
    """Call `build(points)` on doubling grids until the relation is unchanged on two successive refinements."""
    history: List[Tuple[int, str]] = []
    points = start
    verdict = build(points)
    history.append((points, verdict.relation))
    while points * 2 <= max_points:
        points *= 2
        verdict = build(points)
        history.append((points, verdict.relation))
        if len(history) >= 3 and len({rel for _, rel in history[-3:]}) == 1:
            break
    else:
        logger.warning("[orders] relation not stable up to %d grid points: %s", max_points, history)
    details = dict(verdict.details)
    details["refinement"] = history
    details["stable"] = len(history) >= 3 and len({rel for _, rel in history[-3:]}) == 1
    return verdict.model_copy(update={"details": details})


def nbu_relevation_integral(F: LifetimeDistribution, t):
    """∫₀ᵗ (F̄(t−x) − F̄(t)/F̄(x)) f(x) dx: the survival of T₁+T₂ minus that of T₁#T₂.

    Positive means relevation is st-smaller than renewal at t (NBU side),
    negative the reverse.
    """
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(arr < 0):
        raise DomainError("times must be >= 0")
    F.cumulative_hazard(arr)  # support check
    values = np.empty_like(arr)
    for i, upper in enumerate(arr):
        if upper == 0:
            values[i] = 0.0
            continue
        tail = float(F.survival(upper))
        kinks = F.breakpoints() + tuple(upper - p for p in F.breakpoints())

        def integrand(x, upper=upper, tail=tail):
            return (F.survival(max(upper - x, 0.0)) - tail / F.survival(x)) * F.density(x)

        values[i] = integrate(integrand, 0.0, upper, epsabs=quad_tolerance(F), points=kinks)
    return float(values[0]) if np.ndim(t) == 0 else values


# -----------------------------------------------------------------
# Hazard rate order
# -----------------------------------------------------------------
def hr_compare(dist_a: LifetimeDistribution, dist_b: LifetimeDistribution, grid=None) -> OrderVerdict:
    """A ≤hr B iff r_A ≥ r_B pointwise; the survival ratio F̄_B/F̄_A is cross-checked for monotonicity."""
    if grid is None:
        grid = default_grid(dist_a)
    arr = np.asarray(grid, dtype=float)
    arr = arr[arr > 0]
    if arr.size == 0:
        raise GridError("hazard comparison needs positive grid times")
    ra, rb = np.asarray(dist_a.hazard(arr)), np.asarray(dist_b.hazard(arr))
    finite = np.isfinite(ra) & np.isfinite(rb)
    arr, ra, rb = arr[finite], ra[finite], rb[finite]
    margin = EXACT_TIE_TOLERANCE * np.maximum(1.0, np.maximum(np.abs(ra), np.abs(rb)))

    # log(F̄_B/F̄_A) = H_A − H_B
    log_ratio = np.asarray(dist_a.cumulative_hazard(arr)) - np.asarray(dist_b.cumulative_hazard(arr))
    steps = np.diff(log_ratio)
    step_tol = EXACT_TIE_TOLERANCE * np.maximum(1.0, np.abs(log_ratio[1:]))
    rising, falling = np.any(steps > step_tol), np.any(steps < -step_tol)
    monotone = {(False, False): "constant", (True, False): "nondecreasing", (False, True): "nonincreasing"}.get(
        (bool(rising), bool(falling)), "neither"
    )

    verdict = _signed_verdict(
        arr,
        rb - ra,
        margin,
        order="hr",
        statistical=False,
        tolerance=EXACT_TIE_TOLERANCE,
        details={"a": dist_a.token, "b": dist_b.token, "ratio_monotone": monotone},
    )
    expected = {"a_less_b": "nondecreasing", "b_less_a": "nonincreasing", "equal": "constant"}.get(verdict.relation)
    verdict.details["consistent"] = expected is None or monotone in (expected, "constant")
    return verdict


# -----------------------------------------------------------------
# Dynamic hazard rate order over histories
# -----------------------------------------------------------------
class History(BaseModel):
    """Failure times observed up to the censoring time t."""

    model_config = ConfigDict(frozen=True)

    failures: Tuple[float, ...] = ()
    censor: float = Field(..., gt=0)

    def model_post_init(self, __context) -> None:
        times = np.asarray(self.failures, dtype=float)
        if times.size and (times[0] <= 0 or np.any(np.diff(times) <= 0)):
            raise HistoryError("ascent", f"failure times must be positive and strictly increasing, got {list(self.failures)}")
        if times.size and times[-1] >= self.censor:
            raise HistoryError("censor", f"last failure {times[-1]!r} is not before t={self.censor!r}")

    @property
    def count(self) -> int:
        return len(self.failures)

    @property
    def last(self) -> float:
        return self.failures[-1] if self.failures else 0.0


class HistoryPair(BaseModel):
    """`severe` (j failures at x) is more severe than `mild` (i failures at y)."""

    model_config = ConfigDict(frozen=True)

    severe: History
    mild: History


def check_severity(severe: History, mild: History) -> None:
    """Raise HistoryError unless `severe` is more severe than `mild`: same t, j >= i, x_k <= y_k for k <= i."""
    if severe.censor != mild.censor:
        raise HistoryError("censor", f"histories observed at different times {severe.censor!r} and {mild.censor!r}")
    if severe.count < mild.count:
        raise HistoryError("count", f"severe history has {severe.count} failures, mild has {mild.count}")
    for k, (x, y) in enumerate(zip(severe.failures, mild.failures), start=1):
        if x > y:
            raise HistoryError("times", f"x_{k}={x!r} exceeds y_{k}={y!r}")


def history_pair_sampler(seed: int, count: int, t: float, max_failures: int) -> List[HistoryPair]:
    """Scattered admissible pairs at censoring time t; the empty pair comes first."""
    if not t > 0:
        raise DomainError(f"history time must be > 0, got {t}")
    empty = History(censor=t)
    pairs = [HistoryPair(severe=empty, mild=empty)]
    if max_failures <= 0:
        return pairs
    rng = np.random.default_rng(seed)
    while len(pairs) < count:
        j = int(rng.integers(0, max_failures + 1))
        i = j if rng.random() < 0.25 else int(rng.integers(0, j + 1))
        x = np.sort(rng.uniform(0.0, t, size=j))
        z = np.sort(rng.uniform(0.0, t, size=i))
        y = np.maximum(x[:i], z)
        if (x.size and x[0] <= 0) or (y.size and y[0] <= 0):
            continue
        pair = HistoryPair(
            severe=History(failures=tuple(float(v) for v in x), censor=t),
            mild=History(failures=tuple(float(v) for v in y), censor=t),
        )
        check_severity(pair.severe, pair.mild)
        pairs.append(pair)
    return pairs


def _next_unit_hazards(replacement: DistributionSequence, epb: DistributionSequence, pair: HistoryPair, epb_severe: bool):
    """(η, λ) for the first unfailed unit of the severe history, k = j+1.

    The EPB unit k is aged t (relevation keeps the age), the replacement unit k
    is aged t minus the last failure. Units past i+1 in the mild history have
    zero intensity.
    """
    severe, mild = pair.severe, pair.mild
    t = severe.censor
    k = severe.count + 1
    if epb_severe:
        eta = float(epb.nth(k).hazard(t))
        lam = float(replacement.nth(k).hazard(t - mild.last)) if mild.count == severe.count else 0.0
    else:
        eta = float(replacement.nth(k).hazard(t - severe.last))
        lam = float(epb.nth(k).hazard(t)) if mild.count == severe.count else 0.0
    return eta, lam


def dyn_hr_compare(
    replacement: DistributionSequence,
    epb: DistributionSequence,
    pairs: Sequence[HistoryPair],
) -> OrderVerdict:
    """A = EPB arrivals (T), B = replacement arrivals (T′).

    a_less_b: T ≤dyn-hr T′, i.e. η_k(t|h) ≥ λ_k(t|h′) whenever T's history h
    is more severe than T′'s history h′. b_less_a: the same with the roles of
    the two processes exchanged.
    """
    for pair in pairs:
        check_severity(pair.severe, pair.mild)

    def worst(epb_severe: bool):
        margins = []
        for pair in pairs:
            eta, lam = _next_unit_hazards(replacement, epb, pair, epb_severe)
            margins.append((eta - lam) / max(1.0, abs(lam)))
        margins = np.asarray(margins)
        return margins, np.flatnonzero(margins < -DYN_HR_TOLERANCE)

    forward, forward_bad = worst(True)
    reverse, reverse_bad = worst(False)
    forward_ok, reverse_ok = forward_bad.size == 0, reverse_bad.size == 0
    if forward_ok and reverse_ok:
        relation, witnesses = "equal", []
    elif forward_ok:
        relation, witnesses = "a_less_b", [pairs[int(i)].model_dump() for i in reverse_bad[:3]]
    elif reverse_ok:
        relation, witnesses = "b_less_a", [pairs[int(i)].model_dump() for i in forward_bad[:3]]
    else:
        relation = "inconclusive"
        witnesses = [pairs[int(np.argmin(forward))].model_dump(), pairs[int(np.argmin(reverse))].model_dump()]
    logger.info("[orders] dyn-hr over %d history pairs: %s", len(pairs), relation)
    return OrderVerdict(
        relation=relation,
        order="dyn_hr",
        witnesses=witnesses,
        tolerance=DYN_HR_TOLERANCE,
        grid_size=len(pairs),
        details={
            "a": epb.token,
            "b": replacement.token,
            "forward_violations": int(forward_bad.size),
            "reverse_violations": int(reverse_bad.size),
            "min_forward_margin": float(forward.min()),
            "min_reverse_margin": float(reverse.min()),
        },
    )


# -----------------------------------------------------------------
# CIS and theorem hypotheses
# -----------------------------------------------------------------
def cis_check(seq: DistributionSequence, s_grid, t_grid, n: Optional[int] = None) -> OrderVerdict:
    """Transition-level CIS: F̄ᵢ(t)/F̄ᵢ(s) nondecreasing in s ≤ t for each unit i ≤ n."""
    s_arr = np.sort(np.asarray(s_grid, dtype=float))
    t_arr = np.asarray(t_grid, dtype=float)
    n = n or len(seq.entries)
    witnesses = []
    checked = 0
    for i in range(1, n + 1):
        law = seq.nth(i)
        for t in t_arr:
            s = s_arr[s_arr <= t]
            if s.size < 2:
                continue
            # log ratio = H(s) − H(t)
            log_ratio = np.asarray(law.cumulative_hazard(s)) - float(law.cumulative_hazard(t))
            checked += s.size
            drops = np.flatnonzero(np.diff(log_ratio) < -1e-12 * np.maximum(1.0, np.abs(log_ratio[1:])))
            witnesses.extend((i, float(t), float(s[d]), float(s[d + 1])) for d in drops[:1])
    return OrderVerdict(
        relation="a_less_b" if not witnesses else "inconclusive",
        order="cis",
        witnesses=witnesses,
        tolerance=1e-12,
        grid_size=checked,
        details={"sequence": seq.token, "units": n},
    )


class HypothesisReport(BaseModel):
    """Pass/fail of X₁ vs Y₁ and of Xₙ vs the residual {Yₙ − t | Yₙ > t} over (n, t)."""

    mode: Literal["st", "hr"]
    direction: Literal["ge", "le"]
    first_unit: bool
    arrivals: List[int]
    ages: List[float]
    matrix: List[List[bool]]
    failures: List[Tuple[int, float]] = Field(default_factory=list)
    holds: bool


def _dominates(x: LifetimeDistribution, y: LifetimeDistribution, mode: str, direction: str, grid: np.ndarray) -> bool:
    """x ≥ y (direction 'ge') or x ≤ y ('le') in the st or hr order on the grid."""
    if mode == "st":
        sx, sy = np.asarray(x.survival(grid)), np.asarray(y.survival(grid))
        gap = sx - sy if direction == "ge" else sy - sx
        return bool(np.all(gap >= -EXACT_TIE_TOLERANCE))
    rx, ry = np.asarray(x.hazard(grid)), np.asarray(y.hazard(grid))
    finite = np.isfinite(rx) & np.isfinite(ry)
    rx, ry = rx[finite], ry[finite]
    gap = ry - rx if direction == "ge" else rx - ry
    return bool(np.all(gap >= -EXACT_TIE_TOLERANCE * np.maximum(1.0, np.maximum(np.abs(rx), np.abs(ry)))))


def theorem_hypotheses_check(
    replacement: DistributionSequence,
    epb: DistributionSequence,
    mode: Literal["st", "hr"] = "st",
    *,
    direction: Literal["ge", "le"] = "ge",
    n_max: int = 4,
    ages=None,
    grid=None,
) -> HypothesisReport:
    """X₁ vs Y₁ and Xₙ vs {Yₙ − t | Yₙ > t} for n = 2..n_max and each age t."""
    if ages is None:
        ages = np.geomspace(0.05, float(epb.nth(1).quantile(0.99)), 16)
    ages = np.asarray(ages, dtype=float)
    if grid is None:
        grid = default_grid(replacement.nth(1))[1:]
    grid = np.asarray(grid, dtype=float)
    grid = grid[grid > 0]

    first = _dominates(replacement.nth(1), epb.nth(1), mode, direction, grid)
    arrivals = list(range(2, n_max + 1))
    matrix: List[List[bool]] = []
    failures: List[Tuple[int, float]] = []
    for n in arrivals:
        row = []
        for age in ages:
            ok = _dominates(replacement.nth(n), Residual(base=epb.nth(n), age=float(age)), mode, direction, grid)
            row.append(ok)
            if not ok:
                failures.append((n, float(age)))
        matrix.append(row)
    return HypothesisReport(
        mode=mode,
        direction=direction,
        first_unit=first,
        arrivals=arrivals,
        ages=ages.tolist(),
        matrix=matrix,
        failures=failures,
        holds=first and not failures,
    )


# -----------------------------------------------------------------
# Counting processes and coupling
# -----------------------------------------------------------------
def _count_curve(paths: PathSet, t: float, levels: int, delta: float) -> SurvivalCurve:
    counts = count_at(paths, t, allow_censored=True)
    ks = np.arange(levels)
    values = np.array([np.mean(counts > k) for k in ks])
    return SurvivalCurve(
        grid=ks.astype(float),
        values=values,
        kind="empirical",
        replications=paths.replications,
        confidence=delta,
        half_width=dkw_half_width(paths.replications, delta),
        label=f"N(t={t:g}) {paths.spec_id}",
    )


def _count_levels(paths: PathSet, t: float) -> int:
    if paths.stopping == "horizon":
        return int(np.max(count_at(paths, t))) + 1
    return paths.arrivals


def count_compare(paths_a: PathSet, paths_b: PathSet, t: float, delta: float = 0.01) -> OrderVerdict:
    """N_A(t) vs N_B(t) in the st order, from P(N(t) > k) over the levels both path sets resolve.

    Count-stopped sets only resolve P(N > k) for k below their arrival count,
    so the comparison is restricted to those levels. δ is split across the two curves.
    """
    levels = min(_count_levels(paths_a, t), _count_levels(paths_b, t))
    if levels < 1:
        raise GridError("no resolvable count levels")
    a = _count_curve(paths_a, t, levels, delta / 2)
    b = _count_curve(paths_b, t, levels, delta / 2)
    if levels == 1:
        # single level: compare as a one-point curve
        diff = a.values - b.values
        return _signed_verdict(
            a.grid, diff, a.margin + b.margin, order="count", statistical=True, tolerance=a.margin + b.margin,
            details={"t": t, "a": paths_a.spec_id, "b": paths_b.spec_id},
        )
    verdict = st_compare(a, b)
    details = dict(verdict.details, t=t, a=paths_a.spec_id, b=paths_b.spec_id)
    return verdict.model_copy(update={"order": "count", "details": details})


class CouplingCertificate(BaseModel):
    """Pathwise comparison of coupled EPB arrivals T against replacement arrivals T′."""

    replications: int
    arrivals: int
    epb_below: int = Field(..., description="paths with Tᵢ ≤ T′ᵢ for every i")
    epb_above: int = Field(..., description="paths with Tᵢ ≥ T′ᵢ for every i")
    identical: int
    rtol: float
    direction: Literal["epb_le_replacement", "epb_ge_replacement", "identical", "none"]
    first_violation: Optional[int] = Field(None, description="replication breaking the certified direction")


def coupling_certificate(replacement: PathSet, epb: PathSet, rtol: float = COUPLING_RTOL) -> CouplingCertificate:
    if replacement.times.shape != epb.times.shape:
        raise GridError("coupled path sets differ in shape")
    t_ren, t_epb = replacement.times, epb.times
    slack = rtol * np.maximum(np.abs(t_ren), np.abs(t_epb))
    below = np.all(t_epb <= t_ren + slack, axis=1)
    above = np.all(t_epb >= t_ren - slack, axis=1)
    same = below & above
    reps = replacement.replications
    if same.all():
        direction, broken = "identical", None
    elif below.all():
        direction, broken = "epb_le_replacement", None
    elif above.all():
        direction, broken = "epb_ge_replacement", None
    else:
        direction = "none"
        # report against the majority direction
        mask = below if below.sum() >= above.sum() else above
        broken = int(np.flatnonzero(~mask)[0])
    logger.info("[orders] coupling over %d paths: %s", reps, direction)
    return CouplingCertificate(
        replications=reps,
        arrivals=replacement.arrivals,
        epb_below=int(below.sum()),
        epb_above=int(above.sum()),
        identical=int(same.sum()),
        rtol=rtol,
        direction=direction,
        first_violation=broken,
    )
