# relevation_lab/processes.py

# Seeded path simulators for relevation (EPB), renewal, minimal repair,
# generalised Yule and age replacement, plus counting / empirical-curve
# extraction. Replications run in chunks on a thread pool; every uniform is a
# pure function of (seed, replication, position), so results do not depend on
# the thread count or on chunk scheduling.

import logging
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Iterable, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from relevation_lab.dist_core import LifetimeDistribution
from relevation_lab.errors import ConfigError, DomainError, TruncationError
from relevation_lab.relevation import DistributionSequence, SurvivalCurve, YuleSequence
from relevation_lab.rng import UniformStreams

logger = logging.getLogger(__name__)

# worker threads for replication chunks; None reads the RELEVATION_THREADS environment variable
RELEVATION_THREADS: Optional[int] = None
CHUNK_SIZE = 4096
AGE_BLOCK = 64
MAX_AGE_CYCLES = 10 ** 6


# -----------------------------------------------------------------
# Process specifications
# -----------------------------------------------------------------
class _Process(BaseModel):
    model_config = ConfigDict(frozen=True)

    @property
    def policy(self) -> Literal["epb", "renewal", "age"]:
        return "epb"

    @property
    def sequence(self) -> DistributionSequence:
        raise NotImplementedError


class RelevationProcess(_Process):
    kind: Literal["relevation"] = "relevation"
    laws: DistributionSequence

    @property
    def sequence(self) -> DistributionSequence:
        return self.laws

    @property
    def token(self) -> str:
        return f"relevation{self.laws.token}"


class RenewalProcess(_Process):
    kind: Literal["renewal"] = "renewal"
    laws: DistributionSequence

    @property
    def policy(self):
        return "renewal"

    @property
    def sequence(self) -> DistributionSequence:
        return self.laws

    @property
    def token(self) -> str:
        return f"renewal{self.laws.token}"


class MinimalRepairProcess(_Process):
    kind: Literal["minimal_repair"] = "minimal_repair"
    law: LifetimeDistribution

    @property
    def sequence(self) -> DistributionSequence:
        return DistributionSequence(entries=[self.law])

    @property
    def token(self) -> str:
        return f"minimal_repair[{self.law.token}]"


class YuleProcess(_Process):
    """EPB process whose n-th law has hazard (n + offset)·r(t), r the hazard of `rate_law`."""

    kind: Literal["yule"] = "yule"
    rate_law: LifetimeDistribution
    offset: float = Field(1.0, gt=-1.0)

    @property
    def sequence(self) -> DistributionSequence:
        return YuleSequence(entries=[self.rate_law], offset=self.offset)

    @property
    def token(self) -> str:
        return f"yule[{self.rate_law.token}]/offset={self.offset:g}"


class AgeReplacementProcess(_Process):
    """Replace at failure or at age K; only failures are recorded."""

    kind: Literal["age_replacement"] = "age_replacement"
    law: LifetimeDistribution
    interval: float = Field(..., gt=0)

    @property
    def policy(self):
        return "age"

    @property
    def token(self) -> str:
        return f"age[{self.law.token}]/K={self.interval:g}"


ProcessSpec = Union[RelevationProcess, RenewalProcess, MinimalRepairProcess, YuleProcess, AgeReplacementProcess]

PROCESS_KINDS = ("relevation", "renewal", "minimal_repair", "yule", "age")


def build_process(
    kind: str,
    sequence: DistributionSequence,
    *,
    offset: float = 1.0,
    interval: Optional[float] = None,
) -> ProcessSpec:
    """Process spec from CLI-level pieces; single-law kinds use the first entry.

    A Yule kind built from a sequence that already carries a Yule offset takes
    the base laws and that offset, so the multiplier is applied once.
    """
    if kind == "relevation":
        return RelevationProcess(laws=sequence)
    if kind == "renewal":
        return RenewalProcess(laws=sequence)
    if kind == "minimal_repair":
        return MinimalRepairProcess(law=sequence.nth(1))
    if kind == "yule":
        if isinstance(sequence, YuleSequence):
            return YuleProcess(rate_law=sequence.base.nth(1), offset=sequence.offset)
        return YuleProcess(rate_law=sequence.nth(1), offset=offset)
    if kind in ("age", "age_replacement"):
        if interval is None:
            raise ConfigError("age replacement needs a replacement interval K (--interval)")
        return AgeReplacementProcess(law=sequence.nth(1), interval=interval)
    raise ConfigError(f"unknown process '{kind}'; expected one of {', '.join(PROCESS_KINDS)}")


# -----------------------------------------------------------------
# Paths
# -----------------------------------------------------------------
@dataclass(frozen=True)
class ArrivalPath:
    times: np.ndarray
    spec_id: str
    replication: int
    seed: Optional[int] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        object.__setattr__(self, "times", times)
        finite = times[~np.isnan(times)]
        if np.any(finite <= 0) or np.any(np.diff(finite) <= 0):
            raise DomainError(f"path {self.replication} of {self.spec_id} is not strictly increasing and positive")


@dataclass(frozen=True)
class PathSet:
    """Many paths as a matrix: rows are replications, columns arrival indices (NaN past the last failure)."""

    times: np.ndarray
    spec_id: str
    seed: int
    stopping: Literal["count", "horizon"] = "count"
    horizon: Optional[float] = None

    @property
    def replications(self) -> int:
        return self.times.shape[0]

    @property
    def arrivals(self) -> int:
        return self.times.shape[1]

    def path(self, replication: int) -> ArrivalPath:
        row = self.times[replication]
        return ArrivalPath(times=row[~np.isnan(row)], spec_id=self.spec_id, replication=replication, seed=self.seed)

    def __len__(self):
        return self.replications


def _chain(spec, uniforms: np.ndarray) -> np.ndarray:
    """Arrival-time matrix driven by a uniform matrix of the same shape."""
    seq = spec.sequence
    reps, n = uniforms.shape
    times = np.empty_like(uniforms)
    if spec.policy == "renewal":
        elapsed = np.zeros(reps)
        for i in range(n):
            step = np.asarray(seq.nth(i + 1).sample(uniforms[:, i]), dtype=float)
            # partial sums; the floor keeps ties from a draw that rounds to 0
            elapsed = np.maximum(elapsed + step, np.nextafter(elapsed, np.inf))
            times[:, i] = elapsed
        return times
    times[:, 0] = seq.nth(1).sample(uniforms[:, 0])
    for i in range(1, n):
        times[:, i] = seq.nth(i + 1).sample_conditional_exceed(uniforms[:, i], times[:, i - 1])
    return times


def _check_uniforms(uniforms) -> np.ndarray:
    arr = np.asarray(uniforms, dtype=float)
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError("uniforms must lie in (0,1)")
    return arr


def simulate_path(spec: ProcessSpec, n_arrivals: int, uniforms: Iterable[float]) -> ArrivalPath:
    """One path of `n_arrivals` arrivals driven by explicit uniforms u₁..uₙ."""
    if n_arrivals < 1:
        raise DomainError(f"n_arrivals must be >= 1, got {n_arrivals}")
    if spec.policy == "age":
        return simulate_age_replacement_failures(
            spec.law, spec.interval, None, uniforms, n_failures=n_arrivals, spec_id=spec.token
        )
    arr = _check_uniforms(list(uniforms)[:n_arrivals])
    if arr.size < n_arrivals:
        raise TruncationError(f"{n_arrivals} arrivals need {n_arrivals} uniforms, got {arr.size}")
    times = _chain(spec, arr.reshape(1, -1))[0]
    return ArrivalPath(times=times, spec_id=spec.token, replication=0)


def simulate_age_replacement_failures(
    F: LifetimeDistribution,
    K: float,
    horizon: Optional[float],
    uniforms: Iterable[float],
    *,
    n_failures: Optional[int] = None,
    spec_id: str = "age",
    replication: int = 0,
) -> ArrivalPath:
    """Failure times under age replacement with interval K, one uniform per cycle.

    A cycle draws X = sample(F, u): X < K is a failure after X, otherwise a
    planned replacement after K (not recorded). Stops past `horizon` or after
    `n_failures` failures.
    """
    if not K > 0:
        raise DomainError(f"replacement interval must be > 0, got {K}")
    if horizon is None and n_failures is None:
        raise ConfigError("age replacement needs a horizon or a failure count")
    clock = 0.0
    failures: List[float] = []
    for cycle, u in enumerate(uniforms):
        if cycle >= MAX_AGE_CYCLES:
            break
        x = F.sample(u)
        clock += x if x < K else K
        if horizon is not None and clock > horizon:
            return ArrivalPath(times=np.array(failures), spec_id=spec_id, replication=replication)
        if x < K:
            failures.append(clock)
            if n_failures is not None and len(failures) >= n_failures:
                return ArrivalPath(times=np.array(failures), spec_id=spec_id, replication=replication)
    raise TruncationError(f"uniform stream ended after {len(failures)} failures at clock {clock:.6g}")


def _chunks(reps: int) -> List[range]:
    return [range(start, min(start + CHUNK_SIZE, reps)) for start in range(0, reps, CHUNK_SIZE)]


def worker_threads(threads: Optional[int] = None) -> int:
    """Explicit count, else the module setting, else RELEVATION_THREADS from the environment (default 1)."""
    if threads:
        return max(1, int(threads))
    if RELEVATION_THREADS is not None:
        return max(1, int(RELEVATION_THREADS))
    raw = os.getenv("RELEVATION_THREADS", "").strip() or "1"
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"RELEVATION_THREADS must be a positive integer, got {raw!r}")
    if value < 1:
        raise ConfigError(f"RELEVATION_THREADS must be a positive integer, got {raw!r}")
    return value


def _run_chunks(work, reps: int, threads: Optional[int]) -> List[Tuple[int, np.ndarray]]:
    workers = worker_threads(threads)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(work, _chunks(reps)))
    # merge by replication index
    results.sort(key=lambda item: item[0])
    return results


def simulate_paths(spec: ProcessSpec, n_arrivals: int, reps: int, seed: int, threads: Optional[int] = None) -> PathSet:
    """`reps` replications of the first `n_arrivals` arrivals (count-based stopping)."""
    if reps < 1 or n_arrivals < 1:
        raise ConfigError(f"need reps >= 1 and n_arrivals >= 1, got {reps} and {n_arrivals}")
    if spec.policy == "age":
        return simulate_age_replacement(spec, reps, seed, n_failures=n_arrivals, threads=threads)
    streams = UniformStreams(seed)

    def work(chunk: range):
        return chunk.start, _chain(spec, streams.matrix(chunk, n_arrivals))

    times = np.vstack([block for _, block in _run_chunks(work, reps, threads)])
    logger.info("[processes] %s: %d replications x %d arrivals (seed=%d)", spec.token, reps, n_arrivals, seed)
    return PathSet(times=times, spec_id=spec.token, seed=int(seed))


def simulate_age_replacement(
    spec: AgeReplacementProcess,
    reps: int,
    seed: int,
    *,
    n_failures: Optional[int] = None,
    horizon: Optional[float] = None,
    threads: Optional[int] = None,
) -> PathSet:
    """Vectorised age-replacement failures; row r matches the single-path simulator on stream r."""
    if horizon is None and n_failures is None:
        raise ConfigError("age replacement needs a horizon or a failure count")
    streams = UniformStreams(seed)
    F, K = spec.law, spec.interval

    def work(chunk: range):
        ids = np.array(chunk)
        width = n_failures or 8
        times = np.full((ids.size, width), np.nan)
        clock = np.zeros(ids.size)
        count = np.zeros(ids.size, dtype=int)
        alive = np.ones(ids.size, dtype=bool)
        position = 0
        while np.any(alive):
            if position >= MAX_AGE_CYCLES:
                raise TruncationError(f"{spec.token}: no stop after {MAX_AGE_CYCLES} cycles")
            rows = np.flatnonzero(alive)
            block = streams.matrix(ids[rows], AGE_BLOCK, start=position)
            for j in range(AGE_BLOCK):
                live = rows[alive[rows]]
                if live.size == 0:
                    break
                x = np.asarray(F.sample(block[alive[rows], j]), dtype=float)
                clock[live] += np.where(x < K, x, K)
                if horizon is not None:
                    past = clock[live] > horizon
                    alive[live[past]] = False
                    live, x = live[~past], x[~past]
                failed = live[x < K]
                if failed.size:
                    if np.any(count[failed] >= times.shape[1]):
                        times = np.hstack([times, np.full_like(times, np.nan)])
                    times[failed, count[failed]] = clock[failed]
                    count[failed] += 1
                    if n_failures is not None:
                        alive[failed[count[failed] >= n_failures]] = False
            position += AGE_BLOCK
        return chunk.start, times

    blocks = [block for _, block in _run_chunks(work, reps, threads)]
    width = max(block.shape[1] for block in blocks)
    times = np.vstack([np.pad(b, ((0, 0), (0, width - b.shape[1])), constant_values=np.nan) for b in blocks])
    stopping = "horizon" if horizon is not None else "count"
    logger.info("[processes] %s: %d replications (%s stopping, seed=%d)", spec.token, reps, stopping, seed)
    return PathSet(times=times, spec_id=spec.token, seed=int(seed), stopping=stopping, horizon=horizon)


def simulate_coupled_paths(
    replacement: DistributionSequence,
    epb: DistributionSequence,
    n_arrivals: int,
    uniforms: Iterable[float],
) -> Tuple[ArrivalPath, ArrivalPath]:
    """(T′, T) driven by the same uniforms: partial sums of Xᵢ draws and the conditional-exceed chain of Yᵢ."""
    arr = _check_uniforms(list(uniforms)[:n_arrivals])
    if arr.size < n_arrivals:
        raise TruncationError(f"{n_arrivals} arrivals need {n_arrivals} uniforms, got {arr.size}")
    renewal, relevation = RenewalProcess(laws=replacement), RelevationProcess(laws=epb)
    u = arr.reshape(1, -1)
    return (
        ArrivalPath(times=_chain(renewal, u)[0], spec_id=renewal.token, replication=0),
        ArrivalPath(times=_chain(relevation, u)[0], spec_id=relevation.token, replication=0),
    )


def simulate_coupled(
    replacement: DistributionSequence,
    epb: DistributionSequence,
    n_arrivals: int,
    reps: int,
    seed: int,
    threads: Optional[int] = None,
) -> Tuple[PathSet, PathSet]:
    """Coupled path sets: replication r of both processes uses uniform stream r."""
    renewal, relevation = RenewalProcess(laws=replacement), RelevationProcess(laws=epb)
    return (
        simulate_paths(renewal, n_arrivals, reps, seed, threads),
        simulate_paths(relevation, n_arrivals, reps, seed, threads),
    )


# -----------------------------------------------------------------
# Counting and curves
# -----------------------------------------------------------------
def _as_pathset(paths) -> PathSet:
    if isinstance(paths, PathSet):
        return paths
    if isinstance(paths, ArrivalPath):
        paths = [paths]
    paths = list(paths)
    if not paths:
        raise DomainError("no paths given")
    width = max(p.times.size for p in paths)
    if any(p.times.size != width for p in paths):
        raise TruncationError("paths of unequal length need a PathSet with horizon stopping")
    return PathSet(times=np.vstack([p.times for p in paths]), spec_id=paths[0].spec_id, seed=paths[0].seed or 0)


def count_at(paths, t: float, *, allow_censored: bool = False) -> np.ndarray:
    """N(t) per replication: number of arrivals at or before t, so N(t) < n iff Tₙ > t."""
    if t < 0:
        raise DomainError(f"count time must be >= 0, got {t}")
    ps = _as_pathset(paths)
    with np.errstate(invalid="ignore"):
        counts = np.sum(ps.times <= t, axis=1)
    if ps.stopping == "horizon":
        if ps.horizon is not None and t > ps.horizon:
            raise TruncationError(f"count at t={t:g} past the simulated horizon {ps.horizon:g}")
    elif not allow_censored and np.any(counts >= ps.arrivals):
        raise TruncationError(
            f"{int(np.sum(counts >= ps.arrivals))} paths reach all {ps.arrivals} simulated arrivals by t={t:g}"
        )
    return counts


def dkw_half_width(replications: int, delta: float) -> float:
    """Simultaneous (1-δ) DKW half-width √(ln(2/δ)/(2m))."""
    if not 0 < delta < 1:
        raise ConfigError(f"confidence δ must lie in (0,1), got {delta}")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * replications))


def arrival_column(paths, n: int) -> np.ndarray:
    """Tₙ per replication; missing arrivals of horizon-stopped paths become +inf."""
    ps = _as_pathset(paths)
    if n < 1:
        raise DomainError(f"arrival index must be >= 1, got {n}")
    if n > ps.arrivals:
        if ps.stopping == "horizon":
            return np.full(ps.replications, np.inf)
        raise TruncationError(f"arrival {n} exceeds the {ps.arrivals} simulated arrivals")
    column = ps.times[:, n - 1]
    if ps.stopping != "horizon" and np.any(np.isnan(column)):
        raise TruncationError(f"arrival {n} missing from some count-stopped paths")
    return np.where(np.isnan(column), np.inf, column)


def empirical_survival(paths, n: int, grid, delta: float = 0.01) -> SurvivalCurve:
    """Empirical P(Tₙ > t) on `grid` with a DKW band."""
    ps = _as_pathset(paths)
    arr = np.asarray(grid, dtype=float)
    if ps.stopping == "horizon" and ps.horizon is not None and arr[-1] > ps.horizon:
        raise TruncationError(f"grid reaches {arr[-1]:g}, past the simulated horizon {ps.horizon:g}")
    ordered = np.sort(arrival_column(ps, n))
    values = 1.0 - np.searchsorted(ordered, arr, side="right") / ordered.size
    return SurvivalCurve(
        grid=arr,
        values=values,
        kind="empirical",
        replications=ps.replications,
        confidence=delta,
        half_width=dkw_half_width(ps.replications, delta),
        label=ps.spec_id,
        arrival=n,
    )


@dataclass(frozen=True)
class EmpiricalCurveSet:
    curves: Dict[int, SurvivalCurve]
    delta: float
    replications: int

    def __getitem__(self, n: int) -> SurvivalCurve:
        return self.curves[n]

    def __iter__(self):
        return iter(self.curves[n] for n in sorted(self.curves))


def empirical_curves(paths, grid, delta: float = 0.01, arrivals: Optional[Sequence[int]] = None) -> EmpiricalCurveSet:
    ps = _as_pathset(paths)
    indices = list(arrivals) if arrivals is not None else list(range(1, ps.arrivals + 1))
    return EmpiricalCurveSet(
        curves={n: empirical_survival(ps, n, grid, delta) for n in indices},
        delta=delta,
        replications=ps.replications,
    )


def interarrival_means(paths) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and standard error of Tᵢ − Tᵢ₋₁ per arrival index (T₀ = 0)."""
    ps = _as_pathset(paths)
    gaps = np.diff(np.hstack([np.zeros((ps.replications, 1)), ps.times]), axis=1)
    counts = np.sum(~np.isnan(gaps), axis=0)
    with warnings.catch_warnings():
        # arrival columns with fewer than two recorded gaps give NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        means = np.nanmean(gaps, axis=0)
        errors = np.nanstd(gaps, axis=0, ddof=1) / np.sqrt(counts)
    return means, errors
