"""The four run metrics: success rate, navigation error, average time, and
moving-time ratio, plus per-iteration aggregation for accuracy curves.

The moving-time ratio is the mean of per-task motion/total ratios, not
sum(motion)/sum(total); the two differ and only the former matches the
definition this harness reports against. Run-level navigation error averages
per-task errors, each itself a mean over that task's aligned goal pairs; the
nesting choice is recorded in report metadata.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .iteration import AttemptRecord, RunLog
from .world import Point

log = logging.getLogger(__name__)

NE_AGGREGATION_NOTE = "per-task mean over aligned goal pairs, then mean over tasks"

UNDEFINED = "n/a"  # rendering for undefined aggregates; never 0


@dataclass(frozen=True)
class RunMetrics:
    sr: float
    ne: Optional[float]
    at: Optional[float]
    mtr: Optional[float]
    n_tasks: int
    iteration: Optional[int] = None

    def to_report_dict(self) -> dict:
        def cell(v):
            return UNDEFINED if v is None else v

        doc = {
            "sr": self.sr,
            "ne": cell(self.ne),
            "at": cell(self.at),
            "mtr": cell(self.mtr),
            "n_tasks": self.n_tasks,
        }
        if self.iteration is not None:
            doc = {"iteration": self.iteration, **doc}
        return doc


@dataclass(frozen=True)
class RunSummary:
    run_id: str
    per_iteration: tuple[RunMetrics, ...]
    final: RunMetrics

    def to_report_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "ne_aggregation": NE_AGGREGATION_NOTE,
            "per_iteration": [m.to_report_dict() for m in self.per_iteration],
            "final": self.final.to_report_dict(),
        }


def success_rate(flags: Sequence[int]) -> float:
    """Mean of 0/1 success flags; an empty run scores 0 with a warning."""
    for f in flags:
        if f not in (0, 1):
            raise ValueError(f"success flag must be 0 or 1, got {f!r}")
    if not flags:
        log.warning("success rate over zero tasks defined as 0")
        return 0.0
    return math.fsum(flags) / len(flags)


def navigation_error(pairs: Sequence[tuple[Point, Point]]) -> Optional[float]:
    """Mean Euclidean distance between predicted and true goal points."""
    if not pairs:
        return None
    return math.fsum(p.distance_to(t) for p, t in pairs) / len(pairs)


def average_time(durations: Sequence[float]) -> Optional[float]:
    """Mean task duration in seconds."""
    for d in durations:
        if d < 0:
            raise ValueError(f"durations must be non-negative, got {d!r}")
    if not durations:
        return None
    return math.fsum(durations) / len(durations)


def moving_time_ratio(per_task: Sequence[tuple[float, float]]) -> Optional[float]:
    """Mean over tasks of motion/total time."""
    ratios = []
    for motion, total in per_task:
        if total <= 0:
            raise ValueError(f"total duration must be positive, got {total!r}")
        if motion < 0 or motion > total:
            raise ValueError(f"motion {motion!r} must lie in [0, total={total!r}]")
        ratios.append(motion / total)
    if not ratios:
        return None
    return math.fsum(ratios) / len(ratios)


def metrics_for(records: Sequence[AttemptRecord], iteration: Optional[int] = None) -> RunMetrics:
    """Aggregate one group of attempts (one iteration, or a whole run)."""
    sr = success_rate([r.success for r in records])
    defined_ne = [r.ne for r in records if r.ne is not None]
    ne = math.fsum(defined_ne) / len(defined_ne) if defined_ne else None
    at = average_time([r.total_duration for r in records])
    timed = [(r.motion_duration, r.total_duration) for r in records if r.total_duration > 0]
    mtr = moving_time_ratio(timed)
    return RunMetrics(sr=sr, ne=ne, at=at, mtr=mtr, n_tasks=len(records), iteration=iteration)


def summarize_run(run: RunLog) -> RunSummary:
    """Per-iteration metrics plus the final-iteration summary.

    The final iteration stands for the converged system; an empty log yields
    zero/undefined metrics.
    """
    by_iter: dict[int, list[AttemptRecord]] = {}
    for rec in run.records:
        by_iter.setdefault(rec.iteration, []).append(rec)
    iterations = sorted(by_iter)
    if run.accuracy:
        recorded = [it for it, _sr in run.accuracy]
        iterations = recorded if set(iterations) <= set(recorded) else iterations

    per_iteration = tuple(
        metrics_for(by_iter.get(it, []), iteration=it) for it in iterations
    )
    final = per_iteration[-1] if per_iteration else metrics_for([], iteration=None)
    return RunSummary(run_id=run.run_id, per_iteration=per_iteration, final=final)
