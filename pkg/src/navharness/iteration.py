"""Teacher-student iteration: run tasks against a student model for several
rounds, letting a teacher model rewrite hints from recorded feedback between
attempts, and judge every attempt against ground truth.

Tasks are processed strictly sequentially within a run because feedback from
one attempt feeds the next. Teacher failures never abort a run; the student
simply attempts with an empty directive. Student transport failures record a
failed attempt and the loop continues.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .backends import Backend, BackendError, CompletionRequest
from .navsim import execute_goals
from .outputs import (
    ModelOutput,
    OutputParseError,
    PositionValidationError,
    parse_model_output,
    serialize_model_output,
    validate_positions,
)
from .prompts import (
    EMPTY_DIRECTIVE,
    ENV_LANDMARKS_ONLY,
    PromptBundle,
    TeacherDirective,
    build_student_prompt,
    build_teacher_prompt,
    parse_teacher_directive,
)
from .world import Point, WorldMap

log = logging.getLogger(__name__)

BUCKET_ONE = "one"
BUCKET_TWO = "two"
BUCKET_THREE = "three"
BUCKET_FOUR_PLUS = "four_plus"
BUCKETS = (BUCKET_ONE, BUCKET_TWO, BUCKET_THREE, BUCKET_FOUR_PLUS)


def bucket_for(num_goals: int) -> str:
    if num_goals < 1:
        raise ValueError("a task needs at least one goal")
    if num_goals >= 4:
        return BUCKET_FOUR_PLUS
    return BUCKETS[num_goals - 1]


class TaskFormatError(ValueError):
    """Raised when a task record is malformed."""


class FeedbackOrderError(ValueError):
    """Raised on an iteration number regression for a task."""


@dataclass(frozen=True)
class Task:
    id: str
    text: str
    map_id: str
    goals: tuple[Point, ...]
    difficulty_bucket: str = ""

    def __post_init__(self):
        if not self.goals:
            raise TaskFormatError(f"task {self.id!r} has no goals")
        expected = bucket_for(len(self.goals))
        if not self.difficulty_bucket:
            object.__setattr__(self, "difficulty_bucket", expected)
        elif self.difficulty_bucket != expected:
            raise TaskFormatError(
                f"task {self.id!r} bucket {self.difficulty_bucket!r} does not match "
                f"{len(self.goals)} goals"
            )

    @property
    def num_goals(self) -> int:
        return len(self.goals)


def task_from_dict(doc: dict) -> Task:
    try:
        goals = tuple(Point(float(x), float(y)) for x, y in doc["goals"])
        task = Task(
            id=str(doc["id"]),
            text=str(doc["task"]),
            map_id=str(doc["map_id"]),
            goals=goals,
            difficulty_bucket=doc.get("bucket", ""),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TaskFormatError):
            raise
        raise TaskFormatError(f"malformed task record: {exc}") from exc
    declared = doc.get("num_goals")
    if declared is not None and declared != task.num_goals:
        raise TaskFormatError(
            f"task {task.id!r} declares {declared} goals but lists {task.num_goals}"
        )
    return task


def load_tasks_jsonl(path: str | Path) -> list[Task]:
    tasks = []
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines()):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TaskFormatError(f"{path}:{i + 1}: invalid JSON: {exc}") from exc
        tasks.append(task_from_dict(doc))
    return tasks


@dataclass(frozen=True)
class AttemptRecord:
    iteration: int
    task_id: str
    prompt_digest: str
    raw_output: str
    parsed: Optional[ModelOutput]
    parse_error: Optional[str]
    success: int  # 1 or 0
    ne: Optional[float]  # meters; None when undefined
    inference_duration: float
    motion_duration: float
    total_duration: float
    teacher_duration: float = 0.0
    note: Optional[str] = None  # backend/validation failures worth surfacing

    def to_dict(self) -> dict:
        return {
            "type": "attempt",
            "iteration": self.iteration,
            "task_id": self.task_id,
            "prompt_digest": self.prompt_digest,
            "raw_output": self.raw_output,
            "parsed": (
                {
                    "explanation": self.parsed.explanation,
                    "positions": [p.as_pair() for p in self.parsed.positions],
                }
                if self.parsed is not None
                else None
            ),
            "parse_error": self.parse_error,
            "success": self.success,
            "ne": self.ne,
            "inference_duration": self.inference_duration,
            "motion_duration": self.motion_duration,
            "total_duration": self.total_duration,
            "teacher_duration": self.teacher_duration,
            "note": self.note,
        }

    @staticmethod
    def from_dict(doc: dict) -> "AttemptRecord":
        parsed = None
        if doc.get("parsed") is not None:
            parsed = ModelOutput(
                explanation=doc["parsed"]["explanation"],
                positions=tuple(Point(x, y) for x, y in doc["parsed"]["positions"]),
            )
        return AttemptRecord(
            iteration=doc["iteration"],
            task_id=doc["task_id"],
            prompt_digest=doc["prompt_digest"],
            raw_output=doc["raw_output"],
            parsed=parsed,
            parse_error=doc.get("parse_error"),
            success=doc["success"],
            ne=doc.get("ne"),
            inference_duration=doc["inference_duration"],
            motion_duration=doc["motion_duration"],
            total_duration=doc["total_duration"],
            teacher_duration=doc.get("teacher_duration", 0.0),
            note=doc.get("note"),
        )


@dataclass(frozen=True)
class FeedbackWindow:
    task_id: str
    records: tuple[AttemptRecord, ...]  # oldest first


class FeedbackStore:
    """Append-only attempt history, indexed by task id."""

    def __init__(self):
        self._by_task: dict[str, list[AttemptRecord]] = {}
        self._count = 0

    def __len__(self) -> int:
        return self._count

    def records_for(self, task_id: str) -> tuple[AttemptRecord, ...]:
        return tuple(self._by_task.get(task_id, ()))

    def all_records(self) -> list[AttemptRecord]:
        return [rec for records in self._by_task.values() for rec in records]


def update_feedback(store: FeedbackStore, record: AttemptRecord) -> None:
    """Append one attempt; iteration numbers must not regress per task."""
    history = store._by_task.setdefault(record.task_id, [])
    if history and record.iteration < history[-1].iteration:
        raise FeedbackOrderError(
            f"iteration {record.iteration} after {history[-1].iteration} "
            f"for task {record.task_id!r}"
        )
    history.append(record)
    store._count += 1


def read_feedback(store: FeedbackStore, task_id: str, k: int) -> FeedbackWindow:
    """The at most k most recent attempts for a task, oldest first."""
    records = store.records_for(task_id)
    window = records[-k:] if k > 0 else ()
    return FeedbackWindow(task_id=task_id, records=tuple(window))


def judge_success(
    predicted: tuple[Point, ...] | list[Point],
    truth: tuple[Point, ...] | list[Point],
    tolerance: float,
) -> tuple[int, Optional[float]]:
    """Judge an attempt: exact goal count and order, each point within tolerance.

    The error is the mean aligned-pair distance over min(len) pairs, which is
    defined even on count mismatch; it is None only when nothing aligns.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    aligned = min(len(predicted), len(truth))
    distances = [predicted[i].distance_to(truth[i]) for i in range(aligned)]
    ne = math.fsum(distances) / aligned if aligned else None
    flag = int(
        len(predicted) == len(truth)
        and len(truth) > 0
        and all(d <= tolerance for d in distances)
    )
    return flag, ne


@dataclass(frozen=True)
class IterationConfig:
    max_iter: int = 10
    tolerance: float = 0.5  # success radius, meters
    env_mode: str = ENV_LANDMARKS_ONLY
    fine_tuned: bool = False
    robot_speed: float = 0.5  # meters/second
    feedback_window: int = 3
    max_points: int = 16
    start: Optional[Point] = None  # default: center of first free cell
    seed: int = 0

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.robot_speed <= 0:
            raise ValueError("robot_speed must be positive")

    def to_dict(self) -> dict:
        return {
            "max_iter": self.max_iter,
            "tolerance": self.tolerance,
            "env_mode": self.env_mode,
            "fine_tuned": self.fine_tuned,
            "robot_speed": self.robot_speed,
            "feedback_window": self.feedback_window,
            "max_points": self.max_points,
            "start": self.start.as_pair() if self.start else None,
            "seed": self.seed,
        }


@dataclass
class RunLog:
    run_id: str
    config: dict
    records: list[AttemptRecord] = field(default_factory=list)
    accuracy: list[tuple[int, float]] = field(default_factory=list)

    def to_jsonl(self) -> str:
        lines = [json.dumps({"type": "header", "run_id": self.run_id, "config": self.config})]
        lines.extend(json.dumps(rec.to_dict()) for rec in self.records)
        return "\n".join(lines) + "\n"

    def accuracy_csv(self) -> str:
        lines = ["iteration,sr"]
        lines.extend(f"{it},{sr!r}" for it, sr in self.accuracy)
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_jsonl(text: str) -> "RunLog":
        header: Optional[dict] = None
        records: list[AttemptRecord] = []
        for line in text.splitlines():
            if not line.strip():
                continue
            doc = json.loads(line)
            if doc.get("type") == "header":
                header = doc
            elif doc.get("type") == "attempt":
                records.append(AttemptRecord.from_dict(doc))
        if header is None:
            raise ValueError("run log has no header line")
        run = RunLog(run_id=header["run_id"], config=header.get("config", {}), records=records)
        run.accuracy = _accuracy_series(records, run.config.get("max_iter"))
        return run


def _accuracy_series(records: list[AttemptRecord], max_iter: Optional[int]) -> list[tuple[int, float]]:
    by_iter: dict[int, list[int]] = {}
    for rec in records:
        by_iter.setdefault(rec.iteration, []).append(rec.success)
    iterations = range(1, max_iter + 1) if max_iter else sorted(by_iter)
    series = []
    for it in iterations:
        flags = by_iter.get(it, [])
        series.append((it, math.fsum(flags) / len(flags) if flags else 0.0))
    return series


def prompt_digest(bundle: PromptBundle) -> str:
    payload = json.dumps([[m.role, m.content] for m in bundle.messages], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def derive_run_id(config: IterationConfig, tasks: list[Task]) -> str:
    payload = json.dumps([config.to_dict(), [t.id for t in tasks]], sort_keys=True)
    return "run-" + hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def run_iteration_loop(
    config: IterationConfig,
    tasks: list[Task],
    world: WorldMap,
    teacher: Optional[Backend],
    student: Backend,
    store: Optional[FeedbackStore] = None,
    run_id: Optional[str] = None,
) -> RunLog:
    """Execute the full teacher-student loop and return the populated run log.

    Per iteration, per task: read feedback, ask the teacher for a directive,
    query the student, validate and navigate, judge success, append feedback.
    Passing teacher=None skips the teacher path (single-model evaluation).
    """
    for task in tasks:
        if task.map_id != world.id:
            raise TaskFormatError(
                f"task {task.id!r} references map {task.map_id!r}, not {world.id!r}"
            )
    if store is None:
        store = FeedbackStore()
    if not tasks:
        log.warning("run started with zero tasks; success rate is 0 by definition")

    start = config.start or _default_start(world)
    run = RunLog(
        run_id=run_id or derive_run_id(config, tasks),
        config={
            **config.to_dict(),
            "map_id": world.id,
            "student": student.backend_id,
            "teacher": teacher.backend_id if teacher else None,
        },
    )

    for iteration in range(1, config.max_iter + 1):
        flags: list[int] = []
        for task in tasks:
            window = read_feedback(store, task.id, config.feedback_window)
            directive, teacher_time = _teacher_directive(teacher, task, window)
            record = _attempt_task(
                config, task, world, student, start, iteration, directive, teacher_time
            )
            update_feedback(store, record)
            run.records.append(record)
            flags.append(record.success)
        sr = math.fsum(flags) / len(flags) if flags else 0.0
        run.accuracy.append((iteration, sr))

    return run


def _default_start(world: WorldMap) -> Point:
    for row in range(world.n_rows):
        for col in range(world.n_cols):
            if not world.is_occupied(row, col):
                return world.cell_center(row, col)
    raise ValueError("map has no free cells")  # unreachable per map invariants


def _teacher_directive(
    teacher: Optional[Backend], task: Task, window: FeedbackWindow
) -> tuple[TeacherDirective, float]:
    if teacher is None:
        return EMPTY_DIRECTIVE, 0.0
    bundle = build_teacher_prompt(task, window)
    try:
        resp = teacher.complete(_request(bundle, teacher))
    except BackendError as exc:
        log.warning("teacher failed for task %s: %s; continuing without hints", task.id, exc)
        return EMPTY_DIRECTIVE, 0.0
    return parse_teacher_directive(resp.text), resp.inference_duration


def _attempt_task(
    config: IterationConfig,
    task: Task,
    world: WorldMap,
    student: Backend,
    start: Point,
    iteration: int,
    directive: TeacherDirective,
    teacher_time: float,
) -> AttemptRecord:
    bundle = build_student_prompt(
        task, world, config.env_mode, directive, fine_tuned=config.fine_tuned
    )
    digest = prompt_digest(bundle)

    try:
        resp = student.complete(_request(bundle, student))
    except BackendError as exc:
        return AttemptRecord(
            iteration=iteration,
            task_id=task.id,
            prompt_digest=digest,
            raw_output="",
            parsed=None,
            parse_error=None,
            success=0,
            ne=None,
            inference_duration=0.0,
            motion_duration=0.0,
            total_duration=0.0,
            teacher_duration=teacher_time,
            note=f"student backend error: {exc}",
        )

    parsed: Optional[ModelOutput] = None
    parse_error: Optional[str] = None
    note: Optional[str] = None
    success = 0
    ne: Optional[float] = None
    motion = 0.0
    try:
        parsed, _diag = parse_model_output(resp.text)
    except OutputParseError as exc:
        parse_error = str(exc)

    if parsed is not None:
        success, ne = judge_success(parsed.positions, task.goals, config.tolerance)
        try:
            goals = validate_positions(parsed, world, max_points=config.max_points)
        except PositionValidationError as exc:
            note = f"positions rejected: {exc}"
        else:
            outcome = execute_goals(world, start, goals, config.robot_speed)
            motion = outcome.motion_duration
            if not outcome.all_reached:
                note = "navigation stopped: goal unreachable"

    return AttemptRecord(
        iteration=iteration,
        task_id=task.id,
        prompt_digest=digest,
        raw_output=resp.text,
        parsed=parsed,
        parse_error=parse_error,
        success=success,
        ne=ne,
        inference_duration=resp.inference_duration,
        motion_duration=motion,
        total_duration=resp.inference_duration + motion,
        teacher_duration=teacher_time,
        note=note,
    )


def _request(bundle: PromptBundle, backend: Backend) -> CompletionRequest:
    cfg = backend.config
    return CompletionRequest(
        messages=bundle.messages,
        max_tokens=cfg.max_tokens,
        temperature=cfg.temperature,
        model_name=cfg.model_name,
    )


def ground_truth_output(task: Task, explanation: str = "") -> str:
    """Canonical assistant text for a task's ground truth, used by exports."""
    return serialize_model_output(
        ModelOutput(explanation=explanation, positions=tuple(task.goals))
    )
