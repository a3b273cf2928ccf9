"""Command-line entry point for experiments.

Exit codes: 0 success, 1 domain error (bad files, backend failures surfaced as
errors), 2 usage error. Runs start here, never over HTTP; the service only
reads their logs.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .backends import BackendConfig, BackendConfigError, make_backend
from .dataset import SessionError, SessionStore, UnknownSessionError, export_dataset
from .iteration import (
    IterationConfig,
    RunLog,
    TaskFormatError,
    load_tasks_jsonl,
    run_iteration_loop,
)
from .metrics import summarize_run
from .prompts import ENV_MODES, EMPTY_DIRECTIVE, build_student_prompt
from .service import ServeError, ServiceConfig, serve as serve_app
from .world import WorldFormatError, load_world

DOMAIN_ERRORS = (
    WorldFormatError,
    TaskFormatError,
    BackendConfigError,
    SessionError,
    ServeError,
    OSError,
    ValueError,
    KeyError,
)


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _load_world_file(path: str):
    try:
        return load_world(Path(path).read_bytes())
    except DOMAIN_ERRORS as exc:
        _fail(f"cannot load world {path}: {exc}")


def _load_backend(path: str):
    try:
        return make_backend(BackendConfig.from_file(path))
    except DOMAIN_ERRORS as exc:
        _fail(f"cannot load backend config {path}: {exc}")


def _load_tasks(path: str):
    try:
        return load_tasks_jsonl(path)
    except DOMAIN_ERRORS as exc:
        _fail(f"cannot load tasks {path}: {exc}")


def _write_run_outputs(run: RunLog, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "runlog.jsonl").write_text(run.to_jsonl(), encoding="utf-8")
    (out / "accuracy.csv").write_text(run.accuracy_csv(), encoding="utf-8")
    report = summarize_run(run).to_report_dict()
    (out / "metrics.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    click.echo(f"wrote {out / 'runlog.jsonl'}")
    click.echo(f"wrote {out / 'accuracy.csv'}")
    click.echo(f"wrote {out / 'metrics.json'}")


run_options = [
    click.option("--world", "world_path", required=True, help="world document file"),
    click.option("--tasks", "tasks_path", required=True, help="tasks JSONL file"),
    click.option("--student", "student_cfg", required=True, help="student backend config"),
    click.option("--tolerance", default=0.5, show_default=True, help="success radius in meters"),
    click.option("--env-mode", default="landmarks_only", show_default=True,
                 type=click.Choice(ENV_MODES)),
    click.option("--fine-tuned", is_flag=True, help="run flag for fine-tuned student models"),
    click.option("--speed", default=0.5, show_default=True, help="robot speed in m/s"),
    click.option("--seed", default=0, show_default=True, help="seed recorded in the run config"),
    click.option("--run-id", default=None, help="override the derived run id"),
    click.option("--out", "out_dir", required=True, help="output directory"),
]


def _apply(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
@click.version_option(__version__)
def main():
    """Experiment harness for language-guided multi-point navigation."""
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@_apply(run_options)
def evaluate(world_path, tasks_path, student_cfg, tolerance, env_mode, fine_tuned, speed,
             seed, run_id, out_dir):
    """Single-pass evaluation of one backend on a task set (no teacher)."""
    world = _load_world_file(world_path)
    tasks = _load_tasks(tasks_path)
    student = _load_backend(student_cfg)
    config = IterationConfig(
        max_iter=1, tolerance=tolerance, env_mode=env_mode, fine_tuned=fine_tuned,
        robot_speed=speed, seed=seed,
    )
    try:
        run = run_iteration_loop(config, tasks, world, None, student, run_id=run_id)
    except DOMAIN_ERRORS as exc:
        _fail(str(exc))
    _write_run_outputs(run, out_dir)


@main.command()
@_apply(run_options)
@click.option("--teacher", "teacher_cfg", required=True, help="teacher backend config")
@click.option("--max-iter", default=10, show_default=True, help="iteration rounds")
@click.option("--feedback-window", default=3, show_default=True,
              help="most recent attempts shown to the teacher")
@click.option("--dry-run", is_flag=True, help="print the first student prompt and exit")
def iterate(world_path, tasks_path, student_cfg, tolerance, env_mode, fine_tuned, speed,
            seed, run_id, out_dir, teacher_cfg, max_iter, feedback_window, dry_run):
    """Run the full teacher-student iteration loop."""
    world = _load_world_file(world_path)
    tasks = _load_tasks(tasks_path)
    if dry_run:
        if not tasks:
            _fail("no tasks to preview")
        try:
            bundle = build_student_prompt(
                tasks[0], world, env_mode, EMPTY_DIRECTIVE, fine_tuned=fine_tuned
            )
        except DOMAIN_ERRORS as exc:
            _fail(str(exc))
        for msg in bundle.messages:
            click.echo(f"[{msg.role}]")
            click.echo(msg.content)
            click.echo()
        return
    student = _load_backend(student_cfg)
    teacher = _load_backend(teacher_cfg)
    config = IterationConfig(
        max_iter=max_iter, tolerance=tolerance, env_mode=env_mode, fine_tuned=fine_tuned,
        robot_speed=speed, feedback_window=feedback_window, seed=seed,
    )
    try:
        run = run_iteration_loop(config, tasks, world, teacher, student, run_id=run_id)
    except DOMAIN_ERRORS as exc:
        _fail(str(exc))
    _write_run_outputs(run, out_dir)


@main.command()
@click.option("--runlog", "runlog_path", required=True, help="runlog.jsonl to summarize")
@click.option("--out", "out_path", default=None, help="also write the report to this file")
def metrics(runlog_path, out_path):
    """Recompute the four metrics from a persisted run log."""
    try:
        run = RunLog.from_jsonl(Path(runlog_path).read_text(encoding="utf-8"))
    except DOMAIN_ERRORS as exc:
        _fail(f"cannot read run log {runlog_path}: {exc}")
    report = summarize_run(run).to_report_dict()
    text = json.dumps(report, indent=2)
    click.echo(text)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")


def _serve_options(fn):
    options = [
        click.option("--port", default=8421, show_default=True),
        click.option("--host", default="127.0.0.1", show_default=True),
        click.option("--data-dir", required=True, help="session/run state directory"),
        click.option("--worlds-dir", default=None, help="directory of world documents"),
        click.option("--generator", "generator_cfg", default=None,
                     help="backend config for candidate generation"),
        click.option("--ui-dir", default=None, help="built frontend to serve at /"),
    ]
    return _apply(options)(fn)


def _run_service(port, host, data_dir, worlds_dir, generator_cfg, ui_dir):
    config = ServiceConfig(
        data_dir=Path(data_dir),
        worlds_dir=Path(worlds_dir) if worlds_dir else None,
        generator_config=Path(generator_cfg) if generator_cfg else None,
        ui_dir=Path(ui_dir) if ui_dir else None,
    )
    try:
        serve_app(config, host=host, port=port)
    except (ServeError, BackendConfigError) as exc:
        _fail(str(exc))


@main.command()
@_serve_options
def serve(**kwargs):
    """Start the curation/run-monitoring HTTP service."""
    _run_service(**kwargs)


@main.group()
def dataset():
    """Dataset session management."""


@dataset.command("serve")
@_serve_options
def dataset_serve(**kwargs):
    """Alias of `serve` for driving curation sessions."""
    _run_service(**kwargs)


@dataset.command("export")
@click.option("--data-dir", required=True, help="session state directory")
@click.option("--session", "session_id", required=True)
@click.option("--test-fraction", default=0.25, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default=None,
              help="output directory (default: <data-dir>/exports/<session>)")
def dataset_export(data_dir, session_id, test_fraction, seed, out_dir):
    """Export train/test files from a complete session, headlessly."""
    store = SessionStore(data_dir)
    try:
        session = store.load(session_id)
    except UnknownSessionError:
        _fail(f"unknown session {session_id!r}")
    target = Path(out_dir) if out_dir else Path(data_dir) / "exports" / session_id
    try:
        train_path, test_path = export_dataset(session, test_fraction, seed, target)
    except SessionError as exc:
        _fail(str(exc))
    click.echo(f"wrote {train_path}")
    click.echo(f"wrote {test_path}")


if __name__ == "__main__":
    main()
