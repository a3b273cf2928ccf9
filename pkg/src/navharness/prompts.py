"""Prompt construction for the student, the teacher, and feedback renderings.

Prompts are pure functions of their inputs: identical task, map, mode, and
directive/window produce byte-identical messages. Landmarks render sorted by
name and floats render with repr so nothing depends on iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from . import templates
from .backends import ChatMessage
from .outputs import OutputParseError, extract_first_object
from .world import WorldMap

if TYPE_CHECKING:
    from .iteration import FeedbackWindow, Task

ENV_FULL_MAP = "full_map"
ENV_LANDMARKS_ONLY = "landmarks_only"
ENV_OMITTED = "omitted"
ENV_MODES = (ENV_FULL_MAP, ENV_LANDMARKS_ONLY, ENV_OMITTED)


class PromptModeError(ValueError):
    """Raised when an environment mode is invalid for the run configuration."""


@dataclass(frozen=True)
class PromptBundle:
    messages: tuple[ChatMessage, ...]
    env_mode: str
    hint_count: int


@dataclass(frozen=True)
class TeacherDirective:
    hints: tuple[str, ...] = ()
    rationale: str = ""


EMPTY_DIRECTIVE = TeacherDirective()


def build_student_prompt(
    task: "Task",
    world: WorldMap,
    mode: str,
    directive: TeacherDirective = EMPTY_DIRECTIVE,
    *,
    fine_tuned: bool = False,
) -> PromptBundle:
    """Compose the student request: task text, environment per mode, hints last.

    Omitting the environment is only legal for fine-tuned runs, where map
    knowledge is assumed to live in the model weights.
    """
    if mode not in ENV_MODES:
        raise PromptModeError(f"unknown environment mode {mode!r}")
    if mode == ENV_OMITTED and not fine_tuned:
        raise PromptModeError("environment may be omitted only on fine-tuned runs")

    parts = [f"Task: {task.text}"]
    if mode != ENV_OMITTED:
        parts.append("")
        parts.append(templates.LANDMARK_HEADER)
        parts.extend(render_landmark_lines(world))
    if mode == ENV_FULL_MAP:
        parts.append("")
        parts.append(
            f"Map {world.id!r}: resolution {world.resolution!r} m/cell, "
            f"origin ({world.origin.x!r}, {world.origin.y!r})."
        )
        parts.append(templates.GRID_HEADER)
        parts.extend("".join("#" if occ else "." for occ in row) for row in world.grid)
    if directive.hints:
        parts.append("")
        parts.append(templates.HINTS_HEADER)
        parts.extend(f"- {hint}" for hint in directive.hints)

    return PromptBundle(
        messages=(
            ChatMessage("system", templates.STUDENT_SYSTEM),
            ChatMessage("user", "\n".join(parts)),
        ),
        env_mode=mode,
        hint_count=len(directive.hints),
    )


def build_teacher_prompt(task: "Task", window: "FeedbackWindow") -> PromptBundle:
    """Compose the prompt-engineer request from the task and its attempt history."""
    parts = [
        f"Task: {task.text}",
        f"Expected goals: {_positions_repr([g.as_pair() for g in task.goals])}",
        "",
        templates.HISTORY_HEADER,
    ]
    if window.records:
        parts.extend(render_attempt_line(rec) for rec in window.records)
    else:
        parts.append(templates.NO_PRIOR_ATTEMPTS)
    parts.append("")
    parts.append(templates.TEACHER_HINT_INSTRUCTION)

    return PromptBundle(
        messages=(
            ChatMessage("system", templates.TEACHER_SYSTEM),
            ChatMessage("user", "\n".join(parts)),
        ),
        env_mode=ENV_OMITTED,
        hint_count=0,
    )


def parse_teacher_directive(raw: str) -> TeacherDirective:
    """Parse the teacher's reply; degrade to one raw-text hint instead of failing.

    The iteration loop has no error branch for bad teacher output, so this is
    total: unstructured prose becomes a single hint.
    """
    try:
        obj, _method = extract_first_object(raw)
        hints = obj.get("hints")
        if not isinstance(hints, list):
            raise OutputParseError("directive lacks a hints list")
        rationale = obj.get("rationale", "")
        return TeacherDirective(
            hints=tuple(h if isinstance(h, str) else str(h) for h in hints),
            rationale=rationale if isinstance(rationale, str) else str(rationale),
        )
    except OutputParseError:
        text = raw.strip()
        if not text:
            return EMPTY_DIRECTIVE
        return TeacherDirective(hints=(text,), rationale="unstructured reply")


def render_landmark_lines(world: WorldMap) -> list[str]:
    lines = []
    for lm in sorted(world.landmarks, key=lambda l: l.name):
        attrs = " ".join(f"{k}={v}" for k, v in sorted(lm.attributes.items()))
        suffix = f" [{attrs}]" if attrs else ""
        lines.append(f"{lm.name} ({lm.position.x!r}, {lm.position.y!r}){suffix}")
    return lines


def render_attempt_line(record) -> str:
    """One feedback line per attempt; the teacher sees exactly this rendering."""
    predicted = (
        _positions_repr([p.as_pair() for p in record.parsed.positions])
        if record.parsed is not None
        else f"<unparseable: {record.parse_error}>"
    )
    ne = f"{record.ne!r}" if record.ne is not None else "n/a"
    return (
        f"task={record.task_id} iteration={record.iteration} success={record.success} "
        f"predicted={predicted} ne={ne}"
    )


def _positions_repr(pairs: list[list[float]]) -> str:
    return "[" + ", ".join(f"[{x!r}, {y!r}]" for x, y in pairs) + "]"
