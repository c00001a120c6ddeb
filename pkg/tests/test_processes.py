"""Path simulators, counting, DKW bands and the pathwise coupling."""

import math
from typing import get_args

import numpy as np
import pytest

from relevation_lab import processes
from relevation_lab.dist_core import Exponential, Gamma, Weibull
from relevation_lab.errors import ConfigError, DomainError, TruncationError
from relevation_lab.processes import (
    AgeReplacementProcess,
    ArrivalPath,
    MinimalRepairProcess,
    ProcessSpec,
    RelevationProcess,
    RenewalProcess,
    YuleProcess,
    arrival_column,
    build_process,
    count_at,
    dkw_half_width,
    empirical_curves,
    empirical_survival,
    interarrival_means,
    simulate_age_replacement,
    simulate_age_replacement_failures,
    simulate_coupled,
    simulate_coupled_paths,
    simulate_path,
    simulate_paths,
)
from relevation_lab.orders import coupling_certificate, st_compare
from relevation_lab.relevation import DistributionSequence, load_sequence, minimal_repair_marginal
from relevation_lab.rng import UniformStreams, to_unit

E1 = math.exp(-1.0)


def test_exponential_paths_from_explicit_uniforms(exp1, iid):
    seq = iid(exp1)
    for spec in (RenewalProcess(laws=seq), RelevationProcess(laws=seq)):
        path = simulate_path(spec, 2, [E1, E1])
        np.testing.assert_allclose(path.times, [1.0, 2.0], rtol=1e-12)


def test_simulate_path_validates_uniforms(exp1, iid):
    spec = RenewalProcess(laws=iid(exp1))
    with pytest.raises(DomainError):
        simulate_path(spec, 2, [0.5, 1.0])
    with pytest.raises(TruncationError):
        simulate_path(spec, 3, [0.5, 0.5])
    with pytest.raises(DomainError):
        simulate_path(spec, 0, [0.5])


def test_arrival_path_must_increase():
    with pytest.raises(DomainError):
        ArrivalPath(times=np.array([1.0, 1.0]), spec_id="x", replication=0)
    with pytest.raises(DomainError):
        ArrivalPath(times=np.array([0.0, 1.0]), spec_id="x", replication=0)


def test_build_process_kinds(exp1, iid):
    seq = iid(exp1)
    assert build_process("relevation", seq).policy == "epb"
    assert build_process("renewal", seq).policy == "renewal"
    assert isinstance(build_process("minimal_repair", seq), MinimalRepairProcess)
    assert build_process("yule", seq, offset=0.5).offset == 0.5
    assert build_process("age", seq, interval=2.0).policy == "age"
    for kind in processes.PROCESS_KINDS:
        assert isinstance(build_process(kind, seq, interval=1.0), get_args(ProcessSpec))
    with pytest.raises(ConfigError):
        build_process("age", seq)
    with pytest.raises(ConfigError):
        build_process("poisson", seq)


def test_rows_match_single_path_streams(gamma2, iid):
    spec = RelevationProcess(laws=iid(gamma2))
    paths = simulate_paths(spec, 4, 10, seed=3)
    streams = UniformStreams(3)
    for r in (0, 4, 9):
        single = simulate_path(spec, 4, streams.block(r, 0, 4))
        np.testing.assert_array_equal(paths.times[r], single.times)


def test_results_do_not_depend_on_thread_count(weibull2, iid):
    spec = RenewalProcess(laws=iid(weibull2))
    reps = processes.CHUNK_SIZE * 2 + 17
    serial = simulate_paths(spec, 3, reps, seed=42, threads=1)
    pooled = simulate_paths(spec, 3, reps, seed=42, threads=4)
    np.testing.assert_array_equal(serial.times, pooled.times)


def test_thread_count_from_module_setting(monkeypatch, exp1, iid):
    spec = RelevationProcess(laws=iid(exp1))
    baseline = simulate_paths(spec, 2, 5000, seed=9)
    monkeypatch.setattr(processes, "RELEVATION_THREADS", 3)
    np.testing.assert_array_equal(simulate_paths(spec, 2, 5000, seed=9).times, baseline.times)


def test_different_seeds_differ(exp1, iid):
    spec = RenewalProcess(laws=iid(exp1))
    a = simulate_paths(spec, 2, 100, seed=1)
    b = simulate_paths(spec, 2, 100, seed=2)
    assert not np.array_equal(a.times, b.times)


def test_count_at_single_path():
    path = ArrivalPath(times=np.array([1.0, 2.0, 3.0]), spec_id="fixed", replication=0)
    assert count_at(path, 2.5).tolist() == [2]
    assert count_at(path, 2.0).tolist() == [2]
    assert count_at(path, 0.0).tolist() == [0]
    with pytest.raises(TruncationError):
        count_at(path, 5.0)
    assert count_at(path, 5.0, allow_censored=True).tolist() == [3]
    with pytest.raises(DomainError):
        count_at(path, -1.0)


def test_count_duality(gamma_half, iid):
    paths = simulate_paths(RelevationProcess(laws=iid(gamma_half)), 5, 2000, seed=4)
    for t in (0.1, 0.5, 1.0):
        counts = count_at(paths, t, allow_censored=True)
        for n in range(1, 6):
            np.testing.assert_array_equal(counts < n, paths.times[:, n - 1] > t)


def test_dkw_half_width():
    assert dkw_half_width(10_000, 0.01) == pytest.approx(math.sqrt(math.log(200.0) / 20_000))
    with pytest.raises(ConfigError):
        dkw_half_width(100, 1.5)


def test_empirical_second_exponential_arrival(exp1, iid):
    paths = simulate_paths(RenewalProcess(laws=iid(exp1)), 2, 20_000, seed=7)
    curve = empirical_survival(paths, 2, np.array([0.0, 2.0]), delta=0.01)
    # P(T2 <= 2) = 1 - 3e^-2 ≈ 0.59399
    assert 1 - curve.values[1] == pytest.approx(1 - 3 * math.exp(-2.0), abs=curve.half_width)
    assert curve.values[0] == 1.0
    assert curve.kind == "empirical" and curve.replications == 20_000


def test_empirical_curves_cover_every_arrival(exp1, iid):
    paths = simulate_paths(RelevationProcess(laws=iid(exp1)), 3, 500, seed=1)
    curves = empirical_curves(paths, np.linspace(0, 5, 11), delta=0.05)
    assert [c.arrival for c in curves] == [1, 2, 3]
    assert curves[2].half_width == pytest.approx(dkw_half_width(500, 0.05))


def test_minimal_repair_matches_closed_form(weibull2):
    paths = simulate_paths(MinimalRepairProcess(law=weibull2), 3, 20_000, seed=13)
    grid = np.linspace(0.0, 3.0, 31)
    for n in (1, 2, 3):
        curve = empirical_survival(paths, n, grid, delta=0.01)
        exact = minimal_repair_marginal(weibull2, n, grid)
        assert np.max(np.abs(curve.values - exact)) <= curve.half_width


def test_yule_interarrival_means(exp1):
    paths = simulate_paths(YuleProcess(rate_law=exp1, offset=1.0), 4, 40_000, seed=21)
    means, errors = interarrival_means(paths)
    for n in range(1, 5):
        assert abs(means[n - 1] - 1.0 / (n + 1)) <= 5 * errors[n - 1]


@pytest.mark.parametrize("interval", [0.5, 1.0, 2.0])
def test_age_replacement_is_inert_for_exponential(exp1, interval):
    spec = AgeReplacementProcess(law=exp1, interval=interval)
    paths = simulate_age_replacement(spec, 20_000, seed=5, n_failures=3)
    grid = np.linspace(0.0, 6.0, 25)
    for n in (1, 2, 3):
        curve = empirical_survival(paths, n, grid, delta=0.01)
        assert np.max(np.abs(curve.values - minimal_repair_marginal(exp1, n, grid))) <= curve.half_width


def test_age_replacement_rows_match_single_stream():
    law = Weibull(shape=2.0, scale=1.0)
    spec = AgeReplacementProcess(law=law, interval=0.7)
    paths = simulate_age_replacement(spec, 50, seed=8, n_failures=3)
    streams = UniformStreams(8)
    for r in (0, 17, 49):
        single = simulate_age_replacement_failures(law, 0.7, None, streams.stream(r), n_failures=3)
        np.testing.assert_allclose(paths.times[r], single.times, rtol=1e-12)


def test_age_replacement_horizon_stopping(exp1):
    # every draw exceeds K, so no failure is ever recorded
    path = simulate_age_replacement_failures(exp1, 1.0, 5.0, [0.01] * 10)
    assert path.times.size == 0
    with pytest.raises(TruncationError):
        simulate_age_replacement_failures(exp1, 1.0, None, [0.01] * 10, n_failures=1)
    with pytest.raises(ConfigError):
        simulate_age_replacement_failures(exp1, 1.0, None, [0.5])


def test_age_replacement_horizon_paths(gamma2):
    spec = AgeReplacementProcess(law=gamma2, interval=1.0)
    paths = simulate_age_replacement(spec, 300, seed=2, horizon=4.0)
    assert paths.stopping == "horizon"
    assert np.all(np.nan_to_num(paths.times, nan=0.0) <= 4.0)
    beyond = arrival_column(paths, paths.arrivals + 1)
    assert np.all(np.isinf(beyond))
    with pytest.raises(TruncationError):
        count_at(paths, 5.0)


def test_coupled_single_path(exp1, iid):
    renewal, epb = simulate_coupled_paths(iid(exp1), iid(exp1), 2, [E1, E1])
    np.testing.assert_allclose(renewal.times, epb.times, rtol=1e-12)


def test_coupling_nbu_epb_below_replacement(gamma2, iid):
    renewal, epb = simulate_coupled(iid(gamma2), iid(gamma2), 4, 2000, seed=17)
    assert coupling_certificate(renewal, epb).direction == "epb_le_replacement"
    np.testing.assert_array_equal(renewal.times[:, 0], epb.times[:, 0])


def test_coupling_nwu_epb_above_replacement(gamma_half, iid):
    renewal, epb = simulate_coupled(iid(gamma_half), iid(gamma_half), 4, 2000, seed=17)
    cert = coupling_certificate(renewal, epb)
    assert cert.direction == "epb_ge_replacement"
    assert cert.first_violation is None


def test_coupling_exponential_identical(iid):
    law = Exponential(rate=2.0)
    renewal, epb = simulate_coupled(iid(law), iid(law), 3, 1000, seed=3)
    assert coupling_certificate(renewal, epb).direction == "identical"


def test_uniform_streams_positions():
    streams = UniformStreams(11)
    whole = streams.block(2, 0, 16)
    np.testing.assert_array_equal(streams.block(2, 8, 8), whole[8:])
    assert np.all((whole > 0) & (whole < 1))
    with pytest.raises(ValueError):
        streams.block(0, 3, 4)
    with pytest.raises(ConfigError):
        UniformStreams(-1)


def test_sequence_with_distinct_units():
    seq = DistributionSequence(entries=[Exponential(rate=1.0), Exponential(rate=3.0)])
    path = simulate_path(RenewalProcess(laws=seq), 2, [E1, E1])
    np.testing.assert_allclose(path.times, [1.0, 1.0 + 1.0 / 3.0], rtol=1e-12)


def test_yule_offset_is_applied_once():
    plain = build_process("yule", load_sequence('["exp:rate=1"]'))
    carried = build_process("yule", load_sequence('["exp:rate=1", {"yule_offset": 1}]'))
    for k, expected in ((1, 2.0), (2, 3.0), (4, 5.0)):
        assert plain.sequence.nth(k).hazard(0.5) == pytest.approx(expected)
        assert carried.sequence.nth(k).hazard(0.5) == pytest.approx(expected)
    # the offset carried by the sequence wins over the keyword
    half = build_process("yule", load_sequence('["exp:rate=1", {"yule_offset": 0.5}]'), offset=3.0)
    assert half.offset == 0.5
    assert half.sequence.nth(2).hazard(1.0) == pytest.approx(2.5)


def test_thread_count_from_environment(monkeypatch, exp1, iid):
    monkeypatch.setenv("RELEVATION_THREADS", "3")
    assert processes.worker_threads() == 3
    assert processes.worker_threads(5) == 5
    monkeypatch.setattr(processes, "RELEVATION_THREADS", 2)
    assert processes.worker_threads() == 2
    monkeypatch.setattr(processes, "RELEVATION_THREADS", None)
    spec = RenewalProcess(laws=iid(exp1))
    for raw in ("many", "0", "-2"):
        monkeypatch.setenv("RELEVATION_THREADS", raw)
        with pytest.raises(ConfigError):
            simulate_paths(spec, 2, 10, seed=1)


@pytest.mark.slow
@pytest.mark.parametrize(
    "shape, certified, relation",
    [(2.0, "epb_le_replacement", "a_less_b"), (0.5, "epb_ge_replacement", "b_less_a")],
)
def test_coupled_gamma_large_run(iid, shape, certified, relation):
    law = Gamma(shape=shape, scale=1.0)
    reps = 100_000
    renewal, epb = simulate_coupled(iid(law), iid(law), 5, reps, seed=2024)
    cert = coupling_certificate(renewal, epb)
    assert cert.direction == certified
    assert cert.epb_below == reps if certified == "epb_le_replacement" else cert.epb_above == reps

    grid = np.linspace(0.0, 12.0, 121)
    sign = 1.0 if relation == "a_less_b" else -1.0
    for n in range(2, 6):
        relevation_curve = empirical_survival(epb, n, grid, delta=0.01)
        renewal_curve = empirical_survival(renewal, n, grid, delta=0.01)
        # pathwise dominance carries over to the empirical curves without slack
        assert np.all(sign * (relevation_curve.values - renewal_curve.values) <= 1e-12)
        assert st_compare(relevation_curve, renewal_curve).relation == relation


def test_uniform_conversion_stays_inside_unit_interval():
    extremes = np.array([0, 2 ** 12 - 1, 2 ** 64 - 1], dtype=np.uint64)
    values = to_unit(extremes)
    assert values[0] == values[1] == pytest.approx(2.0 ** -53)
    assert 0.0 < values[0] and values[2] < 1.0
    assert values[2] == 1.0 - 2.0 ** -53
