import csv
import json
import subprocess
import sys

import pytest

from crowdrep.cli import CONFIG_ENV, EXIT_DATA, EXIT_OK, EXIT_USAGE, main

HEADER = "evaluator,worker,value,timestamp,credit\n"


def _write(path, rows):
    path.write_text(HEADER + "".join(f"{r},{w},{v},{ts},{c}\n" for r, w, v, ts, c in rows))
    return path


@pytest.fixture
def small_log(tmp_path):
    return _write(tmp_path / "log.csv", [
        ("r1", "w1", 3, "2004-01-05T00:00:00", 1),
        ("r2", "w1", 2, "2004-03-01T00:00:00", 1),
        ("r1", "w2", 1, "2004-08-01T00:00:00", 2),
        ("r3", "w2", 3, "2005-02-01T00:00:00", 1),
        ("r2", "w2", 1, "2005-03-01T00:00:00", 1),
    ])


@pytest.fixture
def popular_vs_niche(tmp_path):
    """``niche`` has one perfect vote; ``popular`` has many slightly lower votes."""
    rows = [("fan", "niche", 3, "2005-01-10T00:00:00", 1)]
    for k in range(12):
        rows.append((f"v{k}", "popular", 3 if k % 4 else 2, f"2005-0{1 + k % 5}-02T00:00:00", 1))
    return _write(tmp_path / "two.csv", rows)


def _csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_compute_outputs(small_log, tmp_path):
    out = tmp_path / "out"
    assert main(["compute", "-i", str(small_log), "-o", str(out), "--dump-graph", "--dump-fairness"]) == EXIT_OK
    for name in ("workers.csv", "evaluators.csv", "report.json", "manifest.json", "graph.csv",
                 "consensus.csv", "fairness.csv"):
        assert (out / name).is_file(), name
    workers = _csv(out / "workers.csv")
    assert [w["worker"] for w in workers] == ["w1", "w2"]
    report = json.loads((out / "report.json").read_text())
    assert report["horizon"] == 3
    assert set(report["workers"]["w1"]) == {"rho", "weight", "degenerate"}
    assert float(workers[0]["rho"]) == pytest.approx(report["workers"]["w1"]["rho"], rel=1e-5)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "compute"
    assert manifest["ingest"]["accepted"] == 5
    assert len(manifest["inputs"][0]["sha256"]) == 64
    assert {"ingest", "model"} <= set(manifest["timing_seconds"])


def test_compute_as_of(small_log, tmp_path):
    out = tmp_path / "out"
    assert main(["compute", "-i", str(small_log), "-o", str(out), "--as-of", "1"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["horizon"] == 1
    assert set(report["workers"]) == {"w1"}
    assert main(["compute", "-i", str(small_log), "-o", str(out), "--as-of", "2"]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["horizon"] == 2
    assert set(report["evaluators"]) == {"r1", "r2"}
    assert report["workers"]["w2"]["rho"] == 1.0


def test_empty_input_is_data_error(tmp_path, capsys):
    empty = tmp_path / "empty.csv"
    empty.write_text(HEADER)
    assert main(["compute", "-i", str(empty), "-o", str(tmp_path / "o")]) == EXIT_DATA
    assert "no records" in capsys.readouterr().err


def test_missing_input_is_data_error(tmp_path):
    assert main(["compute", "-i", str(tmp_path / "nope.csv"), "-o", str(tmp_path / "o")]) == EXIT_DATA


@pytest.mark.parametrize("argv", [
    [],
    ["compute"],
    ["bogus"],
    ["synth", "--workers", "0"],
    ["synth", "--honest", "1.5"],
])
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE


def test_bad_interval_and_threads(small_log, tmp_path):
    base = ["compute", "-i", str(small_log), "-o", str(tmp_path / "o")]
    assert main(base + ["--interval", "fortnightish"]) == EXIT_USAGE
    assert main(base + ["--threads", "0"]) == EXIT_USAGE


def test_table2_style_ordering(popular_vs_niche, tmp_path):
    out = tmp_path / "out"
    assert main(["compute", "-i", str(popular_vs_niche), "-o", str(out)]) == EXIT_OK
    workers = json.loads((out / "report.json").read_text())["workers"]
    assert workers["niche"]["rho"] > workers["popular"]["rho"]
    assert workers["popular"]["weight"] > workers["niche"]["weight"]


def test_report_command(popular_vs_niche, tmp_path, capsys):
    out = tmp_path / "out"
    main(["compute", "-i", str(popular_vs_niche), "-o", str(out)])
    capsys.readouterr()
    assert main(["report", str(out), "--sort", "weight", "--top", "1"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "popular" in text.split("evaluators")[0] and "niche" not in text.split("evaluators")[0]
    assert main(["report", str(out), "--sort", "rho", "--top", "1"]) == EXIT_OK
    assert "niche" in capsys.readouterr().out
    assert main(["report", str(tmp_path)]) == EXIT_DATA


def test_baseline_command(small_log, tmp_path):
    out = tmp_path / "out"
    assert main(["baseline", "-i", str(small_log), "-o", str(out)]) == EXIT_OK
    rows = _csv(out / "baselines.csv")
    normal = {r["worker"]: float(r["score"]) for r in rows if r["model"] == "normal_avg"}
    assert normal == {"w1": 2.5, "w2": pytest.approx(5 / 3, rel=1e-5)}
    data = json.loads((out / "baselines.json").read_text())
    assert "adaptive_avg" in json.dumps(data)


def _synth(tmp_path, name, *extra):
    path = tmp_path / name
    assert main(["synth", "--workers", "60", "--evaluators", "30", "--intervals", "4",
                 "--seed", "3", "-o", str(path), *extra]) == EXIT_OK
    return path


def test_synth_deterministic_bytes(tmp_path):
    a = _synth(tmp_path, "a.csv")
    b = _synth(tmp_path, "b.csv")
    c = _synth(tmp_path, "c.csv", "--seed", "4")
    assert a.read_bytes() == b.read_bytes() != c.read_bytes()
    assert len(_csv(a)) == 600


def test_synth_manifest_records_dishonest(tmp_path):
    path = _synth(tmp_path, "s.csv", "--honest", "0.8")
    manifest = json.loads(path.with_name("s.csv.manifest.json").read_text())
    d = manifest["dishonest_evaluators"]
    assert d["count"] == 6 and d["fraction"] == pytest.approx(0.2)
    assert manifest["seed"] == 3


def test_attack_zero_noise(tmp_path):
    log = _synth(tmp_path, "s.csv")
    out = tmp_path / "att"
    assert main(["attack", "-i", str(log), "-o", str(out), "--noise", "0"]) == EXIT_OK
    summary = json.loads((out / "attack_report.json").read_text())
    assert summary["n_injected"] == 0
    for by in summary["models"].values():
        assert by["full"]["mean"] == 0.0 and by["full"]["fraction_below_10pct"] == 1.0


def test_attack_model_subset_and_files(tmp_path):
    log = _synth(tmp_path, "s.csv")
    out = tmp_path / "att"
    assert main(["attack", "-i", str(log), "-o", str(out), "--models", "ours,ebay"]) == EXIT_OK
    summary = json.loads((out / "attack_report.json").read_text())
    assert set(summary["models"]) == {"ours", "normal_avg"}
    assert not (out / "changes_adaptive_avg.csv").exists()
    hist = _csv(out / "histogram_ours.csv")
    assert {h["cohort"] for h in hist} == {"full", "changed"}
    assert sum(int(h["count"]) for h in hist if h["cohort"] == "full") == 60
    assert len(_csv(out / "changes_normal_avg.csv")) == 60


def test_attack_unknown_model(tmp_path):
    log = _synth(tmp_path, "s.csv")
    assert main(["attack", "-i", str(log), "-o", str(tmp_path / "o"), "--models", "ours,magic"]) == EXIT_USAGE


def test_config_file_and_env(small_log, tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"half-life": 4.0, "scale_max": 5.0}))
    out = tmp_path / "o1"
    assert main(["--config", str(cfg), "compute", "-i", str(small_log), "-o", str(out)]) == EXIT_OK
    conf = json.loads((out / "report.json").read_text())["config"]
    assert conf["half_life"] == 4.0 and conf["scale_max"] == 5.0

    monkeypatch.setenv(CONFIG_ENV, str(cfg))
    out2 = tmp_path / "o2"
    assert main(["compute", "-i", str(small_log), "-o", str(out2), "--half-life", "3"]) == EXIT_OK
    conf = json.loads((out2 / "report.json").read_text())["config"]
    assert conf["half_life"] == 3.0 and conf["scale_max"] == 5.0

    cfg.write_text("{not json")
    assert main(["compute", "-i", str(small_log), "-o", str(out2)]) == EXIT_USAGE


def test_wikilog_compute(tmp_path):
    log = tmp_path / "wiki.tsv"
    log.write_text(
        "2004-09-21 01:15:53\tandyl\tcjcurrie\t1\t3\tludraman\t1\t2004-09-14 16:26:00\n"
        "2004-09-21 01:15:53\tandyl\tcjcurrie\t1\t25\tblankfaze\t-1\t2004-09-14 16:53:00\n"
        "2005-07-05 00:11:04\tlst27\tlst27\t0\t33\tchmod007\t1\t2004-09-14 22:12:00\n"
        "2005-07-05 00:11:04\tlst27\tlst27\t0\t99\tlst27\t1\t2004-09-16 18:00:00\n")
    out = tmp_path / "out"
    assert main(["compute", "-i", str(log), "--format", "wikilog", "-o", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert set(report["workers"]) == {"cjcurrie", "lst27"}
    assert "lst27" in report["evaluators"]
    out2 = tmp_path / "out2"
    assert main(["compute", "-i", str(log), "--format", "wikilog", "--exclude-self-votes", "-o", str(out2)]) == 0
    assert "lst27" not in json.loads((out2 / "report.json").read_text())["evaluators"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "crowdrep", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "kernels" in proc.stdout
