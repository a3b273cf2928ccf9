import json

import pytest
from click.testing import CliRunner

from navharness import templates
from navharness.cli import main
from navharness.iteration import RunLog
from navharness.metrics import summarize_run

from conftest import write_convergence_files


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def fixture_files(tmp_path):
    return write_convergence_files(tmp_path / "fixtures")


def test_evaluate_writes_outputs(runner, fixture_files, tmp_path):
    out = tmp_path / "run1"
    result = runner.invoke(
        main,
        [
            "evaluate",
            "--world", str(fixture_files["world"]),
            "--tasks", str(fixture_files["tasks"]),
            "--student", str(fixture_files["student"]),
            "--tolerance", "0.5",
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert (out / "runlog.jsonl").exists()
    assert (out / "metrics.json").exists()
    run = RunLog.from_jsonl((out / "runlog.jsonl").read_text())
    assert len(run.records) == 4  # single pass, no teacher: all locked, all fail
    assert run.accuracy == [(1, 0.0)]


def test_iterate_produces_convergent_run(runner, fixture_files, tmp_path):
    out = tmp_path / "run2"
    result = runner.invoke(
        main,
        [
            "iterate",
            "--max-iter", "3",
            "--world", str(fixture_files["world"]),
            "--tasks", str(fixture_files["tasks"]),
            "--student", str(fixture_files["student"]),
            "--teacher", str(fixture_files["teacher"]),
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    csv_lines = (out / "accuracy.csv").read_text().splitlines()
    assert csv_lines == ["iteration,sr", "1,0.0", "2,1.0", "3,1.0"]

    run = RunLog.from_jsonl((out / "runlog.jsonl").read_text())
    recomputed = summarize_run(run)
    csv_srs = [float(line.split(",")[1]) for line in csv_lines[1:]]
    assert csv_srs == [m.sr for m in recomputed.per_iteration]

    report = json.loads((out / "metrics.json").read_text())
    assert [m["sr"] for m in report["per_iteration"]] == [0.0, 1.0, 1.0]


def test_dry_run_prints_prompt_without_side_effects(runner, fixture_files, tmp_path):
    out = tmp_path / "dry"
    result = runner.invoke(
        main,
        [
            "iterate",
            "--dry-run",
            "--world", str(fixture_files["world"]),
            "--tasks", str(fixture_files["tasks"]),
            "--student", str(fixture_files["student"]),
            "--teacher", str(fixture_files["teacher"]),
            "--out", str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert templates.OUTPUT_CONTRACT in result.output
    assert "Go to the charging dock." in result.output
    assert not out.exists()


def test_metrics_subcommand_on_empty_log(runner, tmp_path):
    runlog = tmp_path / "runlog.jsonl"
    runlog.write_text(json.dumps({"type": "header", "run_id": "r0", "config": {}}) + "\n")
    result = runner.invoke(main, ["metrics", "--runlog", str(runlog)])
    assert result.exit_code == 0, result.output
    report = json.loads(result.output)
    assert report["final"]["ne"] == "n/a"
    assert report["final"]["mtr"] == "n/a"
    assert report["final"]["sr"] == 0.0


def test_metrics_subcommand_missing_file(runner, tmp_path):
    result = runner.invoke(main, ["metrics", "--runlog", str(tmp_path / "absent.jsonl")])
    assert result.exit_code == 1
    assert "error:" in result.output


def test_unknown_flag_is_usage_error(runner):
    result = runner.invoke(main, ["evaluate", "--nonsense"])
    assert result.exit_code == 2


def test_unknown_subcommand_is_usage_error(runner):
    result = runner.invoke(main, ["transmogrify"])
    assert result.exit_code == 2


def test_missing_world_file_is_domain_error(runner, fixture_files, tmp_path):
    result = runner.invoke(
        main,
        [
            "evaluate",
            "--world", str(tmp_path / "absent.world"),
            "--tasks", str(fixture_files["tasks"]),
            "--student", str(fixture_files["student"]),
            "--out", str(tmp_path / "out"),
        ],
    )
    assert result.exit_code == 1
    assert "error:" in result.output


def test_evaluate_is_deterministic(runner, fixture_files, tmp_path):
    def run(out):
        result = runner.invoke(
            main,
            [
                "evaluate",
                "--world", str(fixture_files["world"]),
                "--tasks", str(fixture_files["tasks"]),
                "--student", str(fixture_files["student"]),
                "--out", str(out),
            ],
        )
        assert result.exit_code == 0
        return (out / "runlog.jsonl").read_bytes()

    assert run(tmp_path / "a") == run(tmp_path / "b")


def test_dataset_export_roundtrip(runner, tmp_path):
    from navharness.dataset import SessionStore, create_session
    from navharness.world import load_world
    from conftest import lab_world_doc
    from test_dataset import seeds_for

    world = load_world(lab_world_doc())
    store = SessionStore(tmp_path / "data")
    store.save(create_session("s1", world, 7, seed_tasks=seeds_for((1, 3, 2, 1))))

    result = runner.invoke(
        main,
        [
            "dataset", "export",
            "--data-dir", str(tmp_path / "data"),
            "--session", "s1",
            "--test-fraction", "0.25",
            "--seed", "3",
        ],
    )
    assert result.exit_code == 0, result.output
    exports = tmp_path / "data" / "exports" / "s1"
    assert (exports / "train.jsonl").exists()
    assert (exports / "test.jsonl").exists()


def test_dataset_export_unknown_session(runner, tmp_path):
    result = runner.invoke(
        main,
        ["dataset", "export", "--data-dir", str(tmp_path), "--session", "ghost"],
    )
    assert result.exit_code == 1
