"""Human-in-the-loop dataset curation.

A session alternates between generation rounds (a model proposes candidate
tasks from seed examples, landmark tables, unmet difficulty-bucket needs, and
all previously scored pairs) and scoring rounds (a human grades candidates
0-10). Candidates at or above the acceptance threshold fill their difficulty
bucket; the cycle repeats until every bucket target set by the 1:3:2:1
allocation is met, after which the session exports stratified train/test
splits. Sessions persist as single JSON documents rewritten atomically, so a
restart resumes exactly where the process died.
"""

from __future__ import annotations

import json
import logging
import os
import random
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import templates
from .backends import Backend, ChatMessage, CompletionRequest
from .iteration import BUCKETS, Task, bucket_for, ground_truth_output
from .outputs import OutputParseError, extract_first_object
from .prompts import render_landmark_lines
from .world import Point, WorldMap

log = logging.getLogger(__name__)

RATIO_WEIGHTS = {"one": 1, "two": 3, "three": 2, "four_plus": 1}
RATIO_TOTAL = 7

STATUS_COLLECTING = "collecting"
STATUS_SCORING = "scoring"
STATUS_COMPLETE = "complete"

DEFAULT_THRESHOLD = 7.0
SCORE_MIN, SCORE_MAX = 0.0, 10.0
FEEDBACK_PAIR_CAP = 50  # most recent scored pairs included in generation prompts


class SessionError(ValueError):
    """Raised on invalid session operations (wrong status, bad scores, ...)."""


class SessionConflictError(SessionError):
    """Raised when an operation conflicts with already-recorded state."""


class UnknownCandidateError(KeyError):
    """Raised when a candidate id is not part of the session."""


class UnknownSessionError(KeyError):
    """Raised when a session id has no persisted document."""


def allocate_ratio(total: int) -> dict[str, int]:
    """Split a task budget across difficulty buckets in the 1:3:2:1 ratio.

    Uses largest-remainder rounding so counts sum exactly to the total and no
    bucket deviates from its real-valued quota by one or more.
    """
    if total < RATIO_TOTAL:
        raise ValueError(f"total must be at least {RATIO_TOTAL}, got {total}")
    quotas = {b: total * RATIO_WEIGHTS[b] / RATIO_TOTAL for b in BUCKETS}
    counts = {b: int(quotas[b]) for b in BUCKETS}
    remainder = total - sum(counts.values())
    by_fraction = sorted(BUCKETS, key=lambda b: quotas[b] - counts[b], reverse=True)
    for b in by_fraction[:remainder]:
        counts[b] += 1
    return counts


@dataclass(frozen=True)
class CandidateTask:
    id: str
    text: str
    map_id: str
    goals: tuple[Point, ...]
    bucket: str
    generation_round: int
    provenance: str = "generated"  # generated | seed
    explanation: str = ""
    score: Optional[float] = None

    def to_task(self) -> Task:
        return Task(id=self.id, text=self.text, map_id=self.map_id, goals=self.goals)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "task": self.text,
            "num_goals": len(self.goals),
            "map_id": self.map_id,
            "goals": [g.as_pair() for g in self.goals],
            "score": self.score,
            "round": self.generation_round,
            "bucket": self.bucket,
            "provenance": self.provenance,
            "explanation": self.explanation,
        }

    @staticmethod
    def from_dict(doc: dict) -> "CandidateTask":
        return CandidateTask(
            id=doc["id"],
            text=doc["task"],
            map_id=doc["map_id"],
            goals=tuple(Point(x, y) for x, y in doc["goals"]),
            bucket=doc["bucket"],
            generation_round=doc["round"],
            provenance=doc.get("provenance", "generated"),
            explanation=doc.get("explanation", ""),
            score=doc.get("score"),
        )


@dataclass
class CurationSession:
    session_id: str
    map_id: str
    target_total: int
    bucket_targets: dict[str, int]
    threshold: float = DEFAULT_THRESHOLD
    status: str = STATUS_COLLECTING
    round: int = 0
    candidates: dict[str, CandidateTask] = field(default_factory=dict)
    pending: list[str] = field(default_factory=list)
    accepted: list[str] = field(default_factory=list)
    spares: list[str] = field(default_factory=list)
    scored_pairs: list[tuple[str, float]] = field(default_factory=list)  # (candidate id, score)
    dropped_total: int = 0

    def accepted_by_bucket(self) -> dict[str, int]:
        counts = {b: 0 for b in BUCKETS}
        for cid in self.accepted:
            counts[self.candidates[cid].bucket] += 1
        return counts

    def unmet_buckets(self) -> dict[str, int]:
        have = self.accepted_by_bucket()
        return {
            b: self.bucket_targets[b] - have[b] for b in BUCKETS if have[b] < self.bucket_targets[b]
        }

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "map_id": self.map_id,
            "target_total": self.target_total,
            "bucket_targets": dict(self.bucket_targets),
            "threshold": self.threshold,
            "status": self.status,
            "round": self.round,
            "candidates": {cid: c.to_dict() for cid, c in self.candidates.items()},
            "pending": list(self.pending),
            "accepted": list(self.accepted),
            "spares": list(self.spares),
            "scored_pairs": [[cid, score] for cid, score in self.scored_pairs],
            "dropped_total": self.dropped_total,
        }

    @staticmethod
    def from_dict(doc: dict) -> "CurationSession":
        return CurationSession(
            session_id=doc["session_id"],
            map_id=doc["map_id"],
            target_total=doc["target_total"],
            bucket_targets=dict(doc["bucket_targets"]),
            threshold=doc.get("threshold", DEFAULT_THRESHOLD),
            status=doc["status"],
            round=doc["round"],
            candidates={cid: CandidateTask.from_dict(c) for cid, c in doc["candidates"].items()},
            pending=list(doc["pending"]),
            accepted=list(doc["accepted"]),
            spares=list(doc["spares"]),
            scored_pairs=[(cid, score) for cid, score in doc["scored_pairs"]],
            dropped_total=doc.get("dropped_total", 0),
        )


def create_session(
    session_id: str,
    world: WorldMap,
    target_total: int,
    threshold: float = DEFAULT_THRESHOLD,
    seed_tasks: Optional[list[dict]] = None,
) -> CurationSession:
    """Start a session; optional pre-scored seed tasks pass through acceptance.

    Seed entries look like generated candidates (`task`, `goals` or
    `goal_landmarks`, optional `score` defaulting to the top grade) and count
    toward bucket targets like any accepted task.
    """
    if not (SCORE_MIN <= threshold <= SCORE_MAX):
        raise SessionError(f"threshold must lie in [{SCORE_MIN}, {SCORE_MAX}]")
    session = CurationSession(
        session_id=session_id,
        map_id=world.id,
        target_total=target_total,
        bucket_targets=allocate_ratio(target_total),
        threshold=threshold,
    )
    for i, entry in enumerate(seed_tasks or []):
        candidate = _candidate_from_entry(
            entry, world, f"{session_id}-seed-{i:03d}", generation_round=0, provenance="seed"
        )
        if candidate is None:
            raise SessionError(f"seed task {i} is malformed or not landmark-consistent")
        score = float(entry.get("score", SCORE_MAX))
        _record_score(session, candidate, score)
    _refresh_status(session)
    return session


def build_generation_prompt(session: CurationSession, world: WorldMap, batch: int) -> list[ChatMessage]:
    """Prompt for the next generation round: map, unmet needs, prior scored pairs."""
    needs = session.unmet_buckets()
    need_lines = [
        f"- {bucket.replace('_', ' ')} goal point(s): {count} more task(s)"
        for bucket, count in needs.items()
    ]
    pair_lines = []
    for cid, score in session.scored_pairs[-FEEDBACK_PAIR_CAP:]:
        candidate = session.candidates[cid]
        pair_lines.append(f"- score {score:g}/10: {candidate.text}")
    parts = [
        f"Map {world.id!r} landmarks:",
        *render_landmark_lines(world),
        "",
        f"Write {batch} new navigation tasks. Unmet needs by goal count:",
        *need_lines,
    ]
    if pair_lines:
        parts += ["", "Previously scored tasks (write better ones, avoid repeats):", *pair_lines]
    parts += ["", templates.GENERATOR_INSTRUCTION]
    return [
        ChatMessage("system", templates.GENERATOR_SYSTEM),
        ChatMessage("user", "\n".join(parts)),
    ]


def generate_candidates(
    session: CurationSession, generator: Backend, world: WorldMap, batch: int
) -> tuple[list[CandidateTask], int]:
    """Run one generation round; returns (new candidates, dropped count).

    Unparseable or landmark-inconsistent entries are dropped and counted, never
    fatal. With zero parseable candidates the session stays collecting.
    """
    if session.status != STATUS_COLLECTING:
        raise SessionError(f"cannot generate in status {session.status!r}")
    if not session.unmet_buckets():
        raise SessionError("all bucket targets are met")
    if batch < 1:
        raise SessionError("batch must be >= 1")

    messages = build_generation_prompt(session, world, batch)
    resp = generator.complete(
        CompletionRequest(
            messages=tuple(messages),
            max_tokens=generator.config.max_tokens,
            temperature=generator.config.temperature,
            model_name=generator.config.model_name,
        )
    )

    round_no = session.round + 1
    candidates: list[CandidateTask] = []
    dropped = 0
    try:
        obj, _method = extract_first_object(resp.text)
        entries = obj.get("tasks")
        if not isinstance(entries, list):
            raise OutputParseError("generator reply lacks a tasks list")
    except OutputParseError as exc:
        log.warning("generation round produced nothing parseable: %s", exc)
        session.dropped_total += 1
        return [], 1

    for i, entry in enumerate(entries):
        cid = f"{session.session_id}-r{round_no}-{i:03d}"
        candidate = _candidate_from_entry(entry, world, cid, generation_round=round_no)
        if candidate is None:
            dropped += 1
            continue
        candidates.append(candidate)

    session.round = round_no
    session.dropped_total += dropped
    if candidates:
        for candidate in candidates:
            session.candidates[candidate.id] = candidate
            session.pending.append(candidate.id)
        session.status = STATUS_SCORING
    else:
        log.warning("generation round %d: no usable candidates (%d dropped)", round_no, dropped)
    return candidates, dropped


def ingest_scores(session: CurationSession, scores: list[tuple[str, float]]) -> CurationSession:
    """Apply human scores to pending candidates and advance the session.

    Scorers at or above the threshold are accepted while their bucket has
    capacity; excess high-scorers are held as spares. Every pair feeds the next
    generation prompt either way.
    """
    if session.status != STATUS_SCORING:
        raise SessionError(f"cannot score in status {session.status!r}")
    seen: set[str] = set()
    for cid, score in scores:
        if cid not in session.candidates:
            raise UnknownCandidateError(cid)
        if cid in seen:
            raise SessionConflictError(f"duplicate score for candidate {cid!r}")
        if cid not in session.pending:
            raise SessionConflictError(f"candidate {cid!r} was already scored")
        if not (SCORE_MIN <= score <= SCORE_MAX):
            raise SessionError(f"score {score!r} outside [{SCORE_MIN}, {SCORE_MAX}]")
        seen.add(cid)

    for cid, score in scores:
        candidate = replace(session.candidates[cid], score=float(score))
        session.pending.remove(cid)
        _record_score(session, candidate, float(score))

    _refresh_status(session)
    return session


def _record_score(session: CurationSession, candidate: CandidateTask, score: float) -> None:
    candidate = replace(candidate, score=score)
    session.candidates[candidate.id] = candidate
    session.scored_pairs.append((candidate.id, score))
    if score < session.threshold:
        return
    have = session.accepted_by_bucket()[candidate.bucket]
    if have < session.bucket_targets[candidate.bucket]:
        session.accepted.append(candidate.id)
    else:
        session.spares.append(candidate.id)


def _refresh_status(session: CurationSession) -> None:
    if not session.unmet_buckets():
        session.status = STATUS_COMPLETE
    elif session.pending:
        session.status = STATUS_SCORING
    else:
        session.status = STATUS_COLLECTING


def _candidate_from_entry(
    entry: object,
    world: WorldMap,
    cid: str,
    generation_round: int,
    provenance: str = "generated",
) -> Optional[CandidateTask]:
    """Validate one generated entry; None means drop it.

    Ground truth comes from the generator itself (goal landmark names, or
    coordinates that must equal a landmark position exactly); human scoring
    audits it downstream.
    """
    if not isinstance(entry, dict):
        return None
    text = entry.get("task")
    if not isinstance(text, str) or not text.strip():
        return None
    goals: list[Point] = []
    if isinstance(entry.get("goal_landmarks"), list) and entry["goal_landmarks"]:
        for name in entry["goal_landmarks"]:
            lm = next((l for l in world.landmarks if l.name == name), None)
            if lm is None:
                return None
            goals.append(lm.position)
    elif isinstance(entry.get("goals"), list) and entry["goals"]:
        positions = {(lm.position.x, lm.position.y) for lm in world.landmarks}
        for pair in entry["goals"]:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                return None
            try:
                point = Point(float(pair[0]), float(pair[1]))
            except (TypeError, ValueError):
                return None
            if (point.x, point.y) not in positions:
                return None  # goals must be landmark-consistent
            goals.append(point)
    else:
        return None
    explanation = entry.get("explanation", "")
    if not isinstance(explanation, str):
        explanation = ""
    return CandidateTask(
        id=cid,
        text=text.strip(),
        map_id=world.id,
        goals=tuple(goals),
        bucket=bucket_for(len(goals)),
        generation_round=generation_round,
        provenance=provenance,
        explanation=explanation,
    )


def export_dataset(
    session: CurationSession,
    test_fraction: float,
    seed: int,
    out_dir: str | Path,
) -> tuple[Path, Path]:
    """Write stratified train/test files for a complete session.

    Training records are chat triplets whose assistant turn is the canonical
    ground-truth serialization; test records are plain task documents. The
    split is seeded and stratified per bucket, so re-export is byte-identical.
    """
    if session.status != STATUS_COMPLETE:
        raise SessionError(f"cannot export session in status {session.status!r}")
    if not (0 < test_fraction < 1):
        raise SessionError(f"test_fraction must lie in (0, 1), got {test_fraction!r}")

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    train: list[CandidateTask] = []
    test: list[CandidateTask] = []
    for bucket in BUCKETS:
        members = sorted(
            (session.candidates[cid] for cid in session.accepted
             if session.candidates[cid].bucket == bucket),
            key=lambda c: c.id,
        )
        shuffled = rng.sample(members, len(members)) if members else []
        n_test = round(len(shuffled) * test_fraction)
        test.extend(shuffled[:n_test])
        train.extend(shuffled[n_test:])

    train_path = out / "train.jsonl"
    test_path = out / "test.jsonl"
    _write_atomic(train_path, "".join(_training_line(c) for c in train))
    _write_atomic(test_path, "".join(json.dumps(c.to_dict()) + "\n" for c in test))
    return train_path, test_path


def _training_line(candidate: CandidateTask) -> str:
    explanation = candidate.explanation or (
        f"The task requires visiting {len(candidate.goals)} point(s) in order."
    )
    record = {
        "messages": [
            {"role": "system", "content": templates.STUDENT_SYSTEM},
            {"role": "user", "content": candidate.text},
            {
                "role": "assistant",
                "content": ground_truth_output(candidate.to_task(), explanation),
            },
        ]
    }
    return json.dumps(record, ensure_ascii=False) + "\n"


class SessionStore:
    """One JSON document per session under data_dir/sessions, written atomically."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.sessions_dir = self.root / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, session_id: str) -> Path:
        if not session_id or "/" in session_id or session_id.startswith("."):
            raise SessionError(f"invalid session id {session_id!r}")
        return self.sessions_dir / f"{session_id}.json"

    def save(self, session: CurationSession) -> None:
        _write_atomic(self.path_for(session.session_id), json.dumps(session.to_dict(), indent=2))

    def load(self, session_id: str) -> CurationSession:
        path = self.path_for(session_id)
        if not path.exists():
            raise UnknownSessionError(session_id)
        return CurationSession.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def exists(self, session_id: str) -> bool:
        return self.path_for(session_id).exists()

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.sessions_dir.glob("*.json"))


def _write_atomic(path: Path, content: str) -> None:
    # Full-document write-ahead: a crash mid-write leaves the previous file intact.
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(content)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
