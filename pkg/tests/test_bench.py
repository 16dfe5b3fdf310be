import csv
import json

import pytest

from extsw.bench import BASELINE, SCENARIOS, bench_pipeline, format_table, run_bench, write_report
from extsw.ir import validate_config


@pytest.fixture(scope="module")
def small():
    return run_bench(packets=400, seed=3, flows=2, warmup=50)


def test_all_scenarios_verify(small):
    report, samples = small
    assert report["ok"] and report["outputs_identical"]
    assert [f["scenario"] for f in report["scenarios"]] == [f"{e}+{r}" for e, r in SCENARIOS]
    for f in report["scenarios"]:
        assert f["integrity"] == 1.0 and f["delivered"] == 400
        assert f["latency"]["samples"] == 350 == len(samples[f["scenario"]])
        assert f["compression"]["ir_frames"] + f["compression"]["uo0_frames"] == 400
    base = next(f for f in report["scenarios"] if f["scenario"] == BASELINE)
    assert base["latency"]["normalized"] == 1.0


def test_comparisons_present(small):
    report, _ = small
    names = set(report["comparisons"])
    assert "native: modify_and_resubmit < recirculate" in names
    assert "recirculate: |native - extern|" in names


def test_same_seed_same_output(small):
    again, _ = run_bench(packets=400, seed=3, flows=2, warmup=50)
    assert again["traffic"]["sha256"] == small[0]["traffic"]["sha256"]
    assert again["scenarios"][0]["output_sha256"] == small[0]["scenarios"][0]["output_sha256"]


@pytest.mark.parametrize("n", [0, 1, 5])
def test_egress_table_count(n):
    cfg, rules = bench_pipeline(n)
    assert validate_config(cfg) == []
    acl = [t.name for t in cfg.egress.tables if t.name.startswith("acl_")]
    assert len(acl) == n
    assert {r["table"] for r in rules if r["table"].startswith("acl_")} == set(acl)


def test_fewer_tables_still_verify():
    report, _ = run_bench(packets=100, egress_tables=0, warmup=10)
    assert report["ok"]


def test_bad_arguments():
    with pytest.raises(ValueError):
        run_bench(packets=-1)
    with pytest.raises(ValueError):
        run_bench(packets=10, flows=0)


def test_parallel_warns():
    report, _ = run_bench(packets=60, warmup=5, parallel=True)
    assert report["ok"] and report["warnings"]


def test_report_files(small, tmp_path):
    report, samples = small
    paths = write_report(report, samples, tmp_path, write_csv=True, figures=True)
    names = {p.rsplit("/", 1)[-1] for p in map(str, paths)}
    assert names == {"report.json", "report.csv", "normalized_latency.png", "latency_cdf.png"}
    assert json.loads((tmp_path / "report.json").read_text())["ok"]
    rows = list(csv.DictReader(open(tmp_path / "report.csv")))
    assert len(rows) == 4 and rows[0]["integrity"] == "100.0%"
    assert (tmp_path / "latency_cdf.png").read_bytes()[:4] == b"\x89PNG"
    text = format_table(report)
    assert BASELINE in text and "outputs identical across scenarios: True" in text
