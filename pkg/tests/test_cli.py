import json

import pytest
from click.testing import CliRunner

from src.cli import main
from src.harness import PAIR_COLUMNS, make_fair, make_planted_bias

SMALL = ["--trees", "5", "--max-depth", "6", "--d-rand", "1", "--k-thresholds", "3"]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def planted_files(tmp_path):
    data, _ = make_planted_bias(n=600, seed=0)
    data.save(tmp_path / "data.csv", tmp_path / "schema.json")
    return tmp_path / "data.csv", tmp_path / "schema.json"


def run_debug(runner, planted_files, out, *extra, env=None):
    data, schema = planted_files
    args = ["debug", "--train", str(data), "--schema", str(schema), "--out", str(out), *SMALL, *extra]
    return runner.invoke(main, args, env=env)


# debug
def test_debug_writes_artifacts(runner, planted_files, tmp_path):
    out = tmp_path / "run"
    result = run_debug(runner, planted_files, out)
    assert result.exit_code == 0, result.output
    for name in ("resolved_config.json", "bias_before.json", "explanations.csv", "explanations_full.json"):
        assert (out / name).exists(), f"{name} not written"
    full = json.loads((out / "explanations_full.json").read_text())
    assert len(full["explanations"]) == len(full["diagnostics"]), "one diagnostic per explanation"
    assert (out / "explanations.csv").read_text().startswith("Index,"), "table header missing"


def test_debug_is_deterministic(runner, planted_files, tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run_debug(runner, planted_files, first).exit_code == 0, "first run failed"
    assert run_debug(runner, planted_files, second).exit_code == 0, "second run failed"
    for name in ("explanations.csv", "bias_before.json"):
        assert (first / name).read_text() == (second / name).read_text(), f"{name} differs between identical runs"


def test_debug_unbiased_model(runner, tmp_path):
    make_fair(n_pairs=60).save(tmp_path / "fair.csv", tmp_path / "schema.json")
    args = ["debug", "--train", str(tmp_path / "fair.csv"), "--test", str(tmp_path / "fair.csv")]
    args += ["--schema", str(tmp_path / "schema.json"), "--out", str(tmp_path / "run"), *SMALL]
    result = runner.invoke(main, args)
    assert result.exit_code == 2 and "nothing to debug" in result.output, result.output
    assert (tmp_path / "run" / "bias_before.json").exists(), "the bias is recorded before giving up"


def test_debug_missing_schema(runner, planted_files, tmp_path):
    data, _ = planted_files
    args = ["debug", "--train", str(data), "--schema", str(tmp_path / "nope.json"), "--out", str(tmp_path / "run")]
    result = runner.invoke(main, args + SMALL)
    assert result.exit_code == 1 and "ingest failed" in result.output, result.output


def test_debug_config_errors(runner, planted_files, tmp_path):
    data, _ = planted_files
    result = run_debug(runner, planted_files, tmp_path / "run", "--test", str(data), "--test-split", "0.3")
    assert result.exit_code == 1 and "config failed" in result.output, result.output
    result = run_debug(runner, planted_files, tmp_path / "run", "--metric", "accuracy")
    assert result.exit_code == 1 and "unknown" in result.output, result.output
    result = run_debug(runner, planted_files, tmp_path / "run", "--format", "xlsx")
    assert result.exit_code == 1, result.output


def test_debug_reads_environment(runner, planted_files, tmp_path):
    data, schema = planted_files
    out = tmp_path / "run"
    args = ["debug", "--train", str(data), "--schema", str(schema), "--out", str(out)]
    args += ["--max-depth", "6", "--d-rand", "1", "--k-thresholds", "3"]
    result = runner.invoke(main, args, env={"SBD_DEBUG_TREES": "3"})
    assert result.exit_code == 0, result.output
    resolved = json.loads((out / "resolved_config.json").read_text())
    assert resolved["forest"]["n_trees"] == 3, "environment variable ignored"
    assert resolved["test_split"] == 0.2, "default split not resolved"


def test_debug_trace_and_markdown(runner, planted_files, tmp_path):
    out = tmp_path / "run"
    result = run_debug(runner, planted_files, out, "--trace", "--format", "markdown")
    assert result.exit_code == 0, result.output
    lines = (out / "trace.jsonl").read_text().splitlines()
    assert lines and all("status" in json.loads(line) for line in lines), "trace lines must be lattice nodes"
    assert (out / "explanations.md").read_text().startswith("| Index"), "markdown table expected"


# prepare, fit, bias
def test_prepare_fit_bias(runner, planted_files, tmp_path):
    data, schema = planted_files
    prep, model = tmp_path / "prep", tmp_path / "model"
    result = runner.invoke(main, ["prepare", "--train", str(data), "--schema", str(schema), "--out", str(prep)])
    assert result.exit_code == 0 and "prepared 480 training and 120 test rows" in result.output, result.output
    result = runner.invoke(
        main, ["fit", "--train", str(prep / "train.csv"), "--schema", str(prep / "schema.json"), "--out", str(model), *SMALL]
    )
    assert result.exit_code == 0 and (model / "forest.json").exists(), result.output
    result = runner.invoke(
        main,
        ["bias", "--forest", str(model / "forest.json"), "--test", str(prep / "test.csv")]
        + ["--schema", str(prep / "schema.json"), "--out", str(model), "--metric", "eo"],
    )
    assert result.exit_code == 0 and result.output.startswith("equalized_odds:"), result.output
    report = json.loads((model / "bias.json").read_text())
    assert 0 <= report["accuracy"] <= 1, "accuracy missing from the bias report"


# fidelity
def test_fidelity(runner, planted_files, tmp_path):
    data, schema = planted_files
    out = tmp_path / "fid"
    args = ["fidelity", "--train", str(data), "--schema", str(schema), "--out", str(out), *SMALL]
    result = runner.invoke(main, args + ["--n-random", "3", "--n-coherent", "2", "--max-literals", "3"])
    assert result.exit_code == 0, result.output
    summary = json.loads((out / "fidelity_summary.json").read_text())
    assert summary["summary"]["all"]["n_pairs"] == 5, "every sampled subset should be reported"
    assert (out / "fidelity_pairs.csv").read_text().splitlines()[0] == ",".join(PAIR_COLUMNS), "pair header changed"


def test_fidelity_without_subsets(runner, planted_files, tmp_path):
    data, schema = planted_files
    out = tmp_path / "fid"
    args = ["fidelity", "--train", str(data), "--schema", str(schema), "--out", str(out), *SMALL]
    result = runner.invoke(main, args + ["--n-random", "0", "--n-coherent", "0"])
    assert result.exit_code == 0, result.output
    assert (out / "fidelity_pairs.csv").read_text().splitlines() == [",".join(PAIR_COLUMNS)], "header-only file expected"
    result = runner.invoke(main, args + ["--n-random", "-1"])
    assert result.exit_code == 1, result.output


# bench
def test_bench(runner, tmp_path):
    out = tmp_path / "bench"
    args = ["bench", "--sizes", "200x3,300x3", "--out", str(out), "--trees", "3", "--max-depth", "4"]
    result = runner.invoke(main, args + ["--d-rand", "1", "--k-thresholds", "2"])
    assert result.exit_code == 0, result.output
    lines = (out / "bench.csv").read_text().splitlines()
    assert len(lines) == 3 and lines[0].startswith("n,m,fit_seconds"), "one row per size expected"
    result = runner.invoke(main, ["bench", "--sizes", "200by3"])
    assert result.exit_code == 2, "a malformed size list is a usage error"
