"""End-to-end runs of main.main() with temporary output directories."""

import csv
import json

import pytest

import main


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        rows = list(csv.DictReader(fh))
    return header, rows


def run(argv, capsys=None):
    code = main.main(argv)
    out = capsys.readouterr().out if capsys is not None else ""
    return code, out


def test_simulate_writes_paths_and_curves(tmp_path, capsys):
    out = tmp_path / "sim"
    code, stdout = run(
        ["simulate", "--process", "renewal", "--dist", "exp:rate=1", "--n", "3", "--reps", "1000", "--seed", "7", "--out-dir", str(out)],
        capsys,
    )
    assert code == 0
    header, rows = read_csv(out / "paths.csv")
    assert header.startswith("# config: ")
    assert json.loads(header[len("# config: "):])["seed"] == 7
    assert len(rows) == 3000
    assert list(rows[0]) == ["replication", "arrival_index", "time"]
    assert {row["arrival_index"] for row in rows} == {"1", "2", "3"}

    _, curves = read_csv(out / "curves.csv")
    assert {row["n"] for row in curves} == {"1", "2", "3"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["replications"] == 1000
    assert json.loads(stdout)["interarrival_mean"] == summary["interarrival_mean"]


def test_simulate_is_byte_identical_across_runs_and_threads(tmp_path, monkeypatch):
    from relevation_lab import processes

    argv = ["simulate", "--process", "relevation", "--dist", "gamma:shape=2", "--n", "2", "--reps", "5000", "--seed", "3"]
    assert main.main(argv + ["--out-dir", str(tmp_path / "a")]) == 0
    monkeypatch.setattr(processes, "CHUNK_SIZE", 1000)
    monkeypatch.setattr(processes, "RELEVATION_THREADS", 4)
    assert main.main(argv + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("paths.csv", "curves.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_to_stdout(capsys):
    code, stdout = run(["simulate", "--process", "yule", "--dist", "exp", "--n", "2", "--reps", "5", "--seed", "1"], capsys)
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0].startswith("# config: ")
    assert lines[1] == "replication,arrival_index,time"
    assert len(lines) == 2 + 10


def test_simulate_age_replacement_horizon(tmp_path):
    out = tmp_path / "age"
    argv = ["simulate", "--process", "age", "--dist", "weibull:shape=2", "--interval", "0.8", "--horizon", "3", "--reps", "200", "--seed", "2", "--out-dir", str(out)]
    assert main.main(argv) == 0
    _, rows = read_csv(out / "paths.csv")
    assert all(float(row["time"]) <= 3.0 for row in rows)


def test_missing_seed_is_a_config_error(capsys):
    assert main.main(["simulate", "--process", "renewal", "--dist", "exp:rate=1"]) == 2
    assert "--seed is mandatory" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--process", "renewal", "--dist", "lognormal:mu=0", "--seed", "1"],
        ["simulate", "--process", "renewal", "--dist", "gamma:shape=-1", "--seed", "1"],
        ["simulate", "--process", "age", "--dist", "exp", "--seed", "1"],
        ["simulate", "--process", "renewal", "--seed", "1"],
        ["simulate", "--process", "martingale", "--dist", "exp", "--seed", "1"],
        ["simulate", "--process", "renewal", "--dist", "exp", "--seed", "1", "--reps", "0"],
    ],
)
def test_bad_configuration_exits_2(argv, capsys):
    assert main.main(argv) == 2


def test_ageing_report(capsys):
    code, stdout = run(["ageing", "--dist", "gamma:shape=2"], capsys)
    assert code == 0
    report = json.loads(stdout)
    assert report["ifr"] == "yes" and report["nbu"] == "yes"
    assert report["predicted_relevation_vs_renewal"] == "a_less_b"


def test_ageing_several_laws(tmp_path, capsys):
    code, stdout = run(["ageing", "--dist", "exp", "--dist", "laixie", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    reports = json.loads(stdout)
    assert [r["nbu"] for r in reports] == ["boundary", "no"]
    assert json.loads((tmp_path / "ageing.json").read_text())["reports"] == reports


def test_relevation_curve_csv(tmp_path):
    argv = ["relevation-curve", "--dist", "exp:rate=1", "--n", "2", "--grid-points", "20", "--t-max", "4", "--out-dir", str(tmp_path)]
    assert main.main(argv) == 0
    _, rows = read_csv(tmp_path / "relevation_curve.csv")
    second = [row for row in rows if row["n"] == "2"]
    assert len(second) == 21
    last = second[-1]
    assert float(last["t"]) == pytest.approx(4.0)
    assert float(last["survival"]) == pytest.approx(5 * 2.718281828459045 ** -4, abs=1e-6)
    assert {row["process"] for row in rows} == {"epb"}


def test_compare_relevation_against_renewal(tmp_path, capsys):
    argv = [
        "compare", "--dist", "gamma:shape=2", "--n", "2", "--reps", "4000", "--seed", "5",
        "--grid-points", "64", "--t", "2.0", "--out-dir", str(tmp_path),
    ]
    code, stdout = run(argv, capsys)
    assert code == 0
    result = json.loads((tmp_path / "verdict.json").read_text())
    assert json.loads(stdout) == result
    first, second = result["st"]
    assert first["relation"] == "equal"
    assert second["relation"] == "a_less_b" and not second["statistical"]
    assert result["coupling"]["direction"] == "epb_le_replacement"
    assert result["count"][0]["order"] == "count"
    assert (tmp_path / "curves.csv").exists()


def test_compare_strict_inconclusive_exits_4(capsys):
    argv = [
        "compare", "--a", "renewal", "--b", "renewal", "--dist", "exp", "--n", "2",
        "--reps", "500", "--seed", "1", "--mode", "empirical", "--strict",
    ]
    assert main.main(argv) == 4


@pytest.mark.slow
def test_figure_age_small_run(tmp_path, capsys):
    argv = ["figure", "age", "--reps", "2000", "--seed", "4", "--grid-points", "32", "--out-dir", str(tmp_path)]
    code, stdout = run(argv, capsys)
    assert code == 0
    result = json.loads(stdout)
    assert len(result["checks"]) == 3 * 4
    assert result["band_delta"] == pytest.approx(0.01 / 12)
    for check in result["checks"]:
        assert check["relation"] in ("a_less_b", "inconclusive")
    assert (tmp_path / "figure_age.csv").exists()


@pytest.mark.slow
def test_figure_cox_reports_crossing(tmp_path, capsys):
    code, stdout = run(["figure", "cox", "--seed", "1", "--out-dir", str(tmp_path)], capsys)
    assert code == 0
    result = json.loads(stdout)
    assert result["verdict"]["relation"] == "crossing"
    assert result["verdict"]["crossings"]


def test_simulate_yule_interarrival_means(tmp_path, capsys):
    argv = ["simulate", "--process", "yule", "--dist", "exp:rate=1", "--offset", "1", "--n", "3", "--reps", "20000", "--seed", "9", "--out-dir", str(tmp_path)]
    code, stdout = run(argv, capsys)
    assert code == 0
    summary = json.loads(stdout)
    for n, (mean, err) in enumerate(zip(summary["interarrival_mean"], summary["interarrival_stderr"]), start=1):
        assert abs(mean - 1.0 / (n + 1)) <= 5 * err


def test_simulate_stdout_skips_curves(capsys, monkeypatch):
    from relevation_lab.commands import simulate

    def unused(*args, **kwargs):
        raise AssertionError("curves are only built for an output directory")

    monkeypatch.setattr(simulate, "empirical_curves", unused)
    code, stdout = run(["simulate", "--process", "renewal", "--dist", "exp", "--n", "2", "--reps", "4", "--seed", "1"], capsys)
    assert code == 0
    assert len(stdout.splitlines()) == 2 + 8


def test_simulate_yule_from_offset_sequence(tmp_path, capsys):
    argv = [
        "simulate", "--process", "yule", "--sequence", '["exp:rate=1", {"yule_offset": 1}]',
        "--n", "3", "--reps", "20000", "--seed", "9", "--out-dir", str(tmp_path),
    ]
    code, stdout = run(argv, capsys)
    assert code == 0
    summary = json.loads(stdout)
    for n, (mean, err) in enumerate(zip(summary["interarrival_mean"], summary["interarrival_stderr"]), start=1):
        assert abs(mean - 1.0 / (n + 1)) <= 5 * err


def test_compare_is_byte_identical_across_runs_and_threads(tmp_path, monkeypatch, capsys):
    from relevation_lab import processes

    argv = ["compare", "--dist", "gamma:shape=0.5", "--n", "3", "--reps", "3000", "--seed", "12", "--t", "1.0", "--mode", "empirical"]
    assert main.main(argv + ["--out-dir", str(tmp_path / "a")]) == 0
    monkeypatch.setattr(processes, "CHUNK_SIZE", 512)
    for threads in (4, 8):
        monkeypatch.setattr(processes, "RELEVATION_THREADS", threads)
        assert main.main(argv + ["--out-dir", str(tmp_path / f"t{threads}")]) == 0
        for name in ("verdict.json", "curves.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / f"t{threads}" / name).read_bytes()
    capsys.readouterr()


@pytest.mark.slow
def test_figure_age_is_byte_identical_across_runs_and_threads(tmp_path, monkeypatch, capsys):
    from relevation_lab import processes

    argv = ["figure", "age", "--reps", "1500", "--seed", "6", "--grid-points", "16"]
    assert main.main(argv + ["--out-dir", str(tmp_path / "a")]) == 0
    monkeypatch.setattr(processes, "CHUNK_SIZE", 256)
    monkeypatch.setattr(processes, "RELEVATION_THREADS", 4)
    assert main.main(argv + ["--out-dir", str(tmp_path / "b")]) == 0
    for name in ("figure_age.csv", "figure_age.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    capsys.readouterr()


def test_figure_cox_is_byte_identical_on_rerun(tmp_path, monkeypatch, capsys):
    from relevation_lab.commands import figure

    monkeypatch.setattr(figure, "refine_until_stable", lambda build, **kwargs: build(64).model_copy(update={"details": {"refinement": []}}))
    for run_dir in ("a", "b"):
        assert main.main(["figure", "cox", "--seed", "1", "--out-dir", str(tmp_path / run_dir)]) == 0
    for name in ("figure_cox.csv", "figure_cox.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    capsys.readouterr()
