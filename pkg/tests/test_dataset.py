import json

import pytest

from navharness.backends import BackendConfig, make_backend
from navharness.dataset import (
    STATUS_COLLECTING,
    STATUS_COMPLETE,
    STATUS_SCORING,
    SessionConflictError,
    SessionError,
    SessionStore,
    UnknownCandidateError,
    UnknownSessionError,
    allocate_ratio,
    create_session,
    export_dataset,
    generate_candidates,
    ingest_scores,
)
from navharness.iteration import BUCKETS
from navharness import templates
from navharness.outputs import parse_model_output
from navharness.world import load_world

from conftest import lab_world_doc


LANDMARK_NAMES = ["dock", "shelf", "bench", "printer"]


def generator_backend(reply):
    return make_backend(
        BackendConfig.from_dict(
            {
                "kind": "scripted",
                "model_name": "taskgen",
                "script": {"rules": [], "fallback": reply, "synthetic_latency": 0.01},
            }
        )
    )


def entry(i, n_goals):
    return {
        "task": f"Visit {n_goals} spots, errand {i}.",
        "goal_landmarks": LANDMARK_NAMES[:n_goals],
        "explanation": f"Stops at {n_goals} landmark(s).",
    }


def seeds_for(counts):
    """Seed entries filling buckets (one, two, three, four_plus) = counts."""
    out = []
    i = 0
    for n_goals, count in zip((1, 2, 3, 4), counts):
        for _ in range(count):
            out.append(entry(i, n_goals))
            i += 1
    return out


@pytest.fixture
def world():
    return load_world(lab_world_doc())


class TestAllocateRatio:
    def test_paper_scale_total(self):
        assert allocate_ratio(1400) == {"one": 200, "two": 600, "three": 400, "four_plus": 200}

    def test_exact_ratio_total(self):
        assert allocate_ratio(7) == {"one": 1, "two": 3, "three": 2, "four_plus": 1}

    def test_largest_remainder_rounding(self):
        assert allocate_ratio(100) == {"one": 14, "two": 43, "three": 29, "four_plus": 14}

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            allocate_ratio(6)

    def test_sweep_sums_and_quota_deviation(self):
        for total in range(7, 2001):
            counts = allocate_ratio(total)
            assert sum(counts.values()) == total
            for bucket, weight in (("one", 1), ("two", 3), ("three", 2), ("four_plus", 1)):
                quota = total * weight / 7
                assert abs(counts[bucket] - quota) < 1.0


class TestSessionLifecycle:
    def test_create_session_targets(self, world):
        session = create_session("s1", world, 28)
        assert session.bucket_targets == {"one": 4, "two": 12, "three": 8, "four_plus": 4}
        assert session.status == STATUS_COLLECTING

    def test_generation_round_parses_candidates(self, world):
        session = create_session("s1", world, 28)
        reply = json.dumps({"tasks": [entry(i, 1) for i in range(3)]})
        candidates, dropped = generate_candidates(session, generator_backend(reply), world, 3)
        assert len(candidates) == 3
        assert dropped == 0
        assert session.round == 1
        assert session.status == STATUS_SCORING
        assert all(c.bucket == "one" for c in candidates)

    def test_malformed_entries_dropped_with_count(self, world):
        session = create_session("s1", world, 28)
        reply = json.dumps(
            {"tasks": [entry(0, 1), {"task": "no goals at all"}, entry(1, 2)]}
        )
        candidates, dropped = generate_candidates(session, generator_backend(reply), world, 3)
        assert len(candidates) == 2
        assert dropped == 1
        assert session.dropped_total == 1

    def test_unknown_landmark_goal_dropped(self, world):
        session = create_session("s1", world, 28)
        reply = json.dumps({"tasks": [{"task": "go", "goal_landmarks": ["atlantis"]}]})
        candidates, dropped = generate_candidates(session, generator_backend(reply), world, 1)
        assert candidates == []
        assert dropped == 1
        assert session.status == STATUS_COLLECTING  # nothing usable, keep collecting

    def test_coordinate_goals_must_match_landmarks(self, world):
        session = create_session("s1", world, 28)
        good = {"task": "go to dock", "goals": [[5.5, 1.5]]}
        bad = {"task": "go nowhere", "goals": [[4.9, 1.5]]}
        reply = json.dumps({"tasks": [good, bad]})
        candidates, dropped = generate_candidates(session, generator_backend(reply), world, 2)
        assert len(candidates) == 1
        assert dropped == 1
        assert candidates[0].goals[0].as_pair() == [5.5, 1.5]

    def test_generate_requires_collecting_status(self, world):
        session = create_session("s1", world, 28)
        generate_candidates(
            session, generator_backend(json.dumps({"tasks": [entry(0, 1)]})), world, 1
        )
        with pytest.raises(SessionError, match="status"):
            generate_candidates(session, generator_backend("{}"), world, 1)

    def test_generate_with_all_buckets_met_rejected(self, world):
        session = create_session("s1", world, 7, seed_tasks=seeds_for((1, 3, 2, 1)))
        assert session.status == STATUS_COMPLETE
        with pytest.raises(SessionError):
            generate_candidates(session, generator_backend("{}"), world, 1)

    def test_generation_prompt_carries_needs_and_feedback(self, world):
        from navharness.dataset import build_generation_prompt

        session = create_session("s1", world, 28)
        generate_candidates(
            session, generator_backend(json.dumps({"tasks": [entry(0, 1)]})), world, 1
        )
        ingest_scores(session, [(session.pending[0], 9.0)])
        messages = build_generation_prompt(session, world, 5)
        user = messages[1].content
        assert "dock (5.5, 1.5)" in user
        assert "score 9/10" in user
        assert "more task(s)" in user


class TestScoring:
    def make_scoring_session(self, world, n=3, n_goals=1):
        session = create_session("s1", world, 28)
        reply = json.dumps({"tasks": [entry(i, n_goals) for i in range(n)]})
        generate_candidates(session, generator_backend(reply), world, n)
        return session

    def test_threshold_rule(self, world):
        session = self.make_scoring_session(world)
        ids = list(session.pending)
        ingest_scores(session, list(zip(ids, (9.0, 5.0, 8.0))))
        assert len(session.accepted) == 2
        assert len(session.scored_pairs) == 3  # rejected pair retained as feedback
        assert session.status == STATUS_COLLECTING

    def test_excess_high_scorer_held_as_spare(self, world):
        session = create_session("s1", world, 7, seed_tasks=seeds_for((1, 0, 0, 0)))
        reply = json.dumps({"tasks": [entry(99, 1)]})
        generate_candidates(session, generator_backend(reply), world, 1)
        cid = session.pending[0]
        ingest_scores(session, [(cid, 10.0)])
        assert cid in session.spares
        assert cid not in session.accepted

    def test_score_out_of_range(self, world):
        session = self.make_scoring_session(world)
        with pytest.raises(SessionError, match="outside"):
            ingest_scores(session, [(session.pending[0], 11.0)])

    def test_unknown_candidate(self, world):
        session = self.make_scoring_session(world)
        with pytest.raises(UnknownCandidateError):
            ingest_scores(session, [("ghost", 5.0)])

    def test_duplicate_in_one_submission(self, world):
        session = self.make_scoring_session(world)
        cid = session.pending[0]
        with pytest.raises(SessionConflictError, match="duplicate"):
            ingest_scores(session, [(cid, 5.0), (cid, 6.0)])

    def test_rescoring_conflicts(self, world):
        session = self.make_scoring_session(world)
        cid = session.pending[0]
        ingest_scores(session, [(cid, 9.0)])
        with pytest.raises(SessionConflictError, match="already scored"):
            ingest_scores(session, [(cid, 3.0)])

    def test_completion_when_targets_met(self, world):
        session = create_session("s1", world, 7, seed_tasks=seeds_for((0, 3, 2, 1)))
        reply = json.dumps({"tasks": [entry(0, 1)]})
        generate_candidates(session, generator_backend(reply), world, 1)
        ingest_scores(session, [(session.pending[0], 8.0)])
        assert session.status == STATUS_COMPLETE

    def test_accepted_goals_are_landmark_positions(self, world):
        session = self.make_scoring_session(world, n=2, n_goals=2)
        ingest_scores(session, list(zip(list(session.pending), (9.0, 9.0))))
        landmark_positions = {(lm.position.x, lm.position.y) for lm in world.landmarks}
        for cid in session.accepted:
            for goal in session.candidates[cid].goals:
                assert (goal.x, goal.y) in landmark_positions


class TestExport:
    def complete_session(self, world):
        return create_session("s1", world, 28, seed_tasks=seeds_for((4, 12, 8, 4)))

    def test_stratified_split_counts(self, world, tmp_path):
        session = self.complete_session(world)
        assert session.status == STATUS_COMPLETE
        train_path, test_path = export_dataset(session, 0.25, seed=7, out_dir=tmp_path)
        train = [json.loads(l) for l in train_path.read_text().splitlines()]
        test = [json.loads(l) for l in test_path.read_text().splitlines()]
        assert len(train) == 21
        assert len(test) == 7
        by_bucket = {b: 0 for b in BUCKETS}
        for doc in test:
            by_bucket[doc["bucket"]] += 1
        assert by_bucket == {"one": 1, "two": 3, "three": 2, "four_plus": 1}

    def test_training_records_are_chat_triplets(self, world, tmp_path):
        session = self.complete_session(world)
        train_path, _ = export_dataset(session, 0.25, seed=7, out_dir=tmp_path)
        record = json.loads(train_path.read_text().splitlines()[0])
        roles = [m["role"] for m in record["messages"]]
        assert roles == ["system", "user", "assistant"]
        assert templates.OUTPUT_CONTRACT in record["messages"][0]["content"]
        out, _diag = parse_model_output(record["messages"][2]["content"])
        assert len(out.positions) >= 1

    def test_export_is_deterministic(self, world, tmp_path):
        session = self.complete_session(world)
        a = export_dataset(session, 0.25, seed=7, out_dir=tmp_path / "a")
        b = export_dataset(session, 0.25, seed=7, out_dir=tmp_path / "b")
        assert a[0].read_bytes() == b[0].read_bytes()
        assert a[1].read_bytes() == b[1].read_bytes()

    def test_different_seed_changes_split(self, world, tmp_path):
        session = self.complete_session(world)
        a = export_dataset(session, 0.25, seed=7, out_dir=tmp_path / "a")
        b = export_dataset(session, 0.25, seed=8, out_dir=tmp_path / "b")
        assert a[1].read_bytes() != b[1].read_bytes()

    def test_incomplete_session_rejected(self, world, tmp_path):
        session = create_session("s1", world, 28)
        with pytest.raises(SessionError, match="status"):
            export_dataset(session, 0.25, seed=7, out_dir=tmp_path)

    def test_bad_fraction_rejected(self, world, tmp_path):
        session = self.complete_session(world)
        for bad in (0.0, 1.0, -0.5):
            with pytest.raises(SessionError, match="test_fraction"):
                export_dataset(session, bad, seed=7, out_dir=tmp_path)

    def test_test_records_load_as_tasks(self, world, tmp_path):
        from navharness.iteration import load_tasks_jsonl

        session = self.complete_session(world)
        _, test_path = export_dataset(session, 0.25, seed=7, out_dir=tmp_path)
        tasks = load_tasks_jsonl(test_path)
        assert len(tasks) == 7
        assert all(t.map_id == "lab" for t in tasks)


class TestSessionStore:
    def test_round_trip(self, world, tmp_path):
        store = SessionStore(tmp_path)
        session = create_session("s1", world, 28, seed_tasks=seeds_for((1, 0, 0, 0)))
        reply = json.dumps({"tasks": [entry(0, 2)]})
        generate_candidates(session, generator_backend(reply), world, 1)
        store.save(session)
        loaded = store.load("s1")
        assert loaded.to_dict() == session.to_dict()

    def test_unknown_session(self, tmp_path):
        with pytest.raises(UnknownSessionError):
            SessionStore(tmp_path).load("nope")

    def test_list_ids(self, world, tmp_path):
        store = SessionStore(tmp_path)
        for sid in ("b", "a"):
            store.save(create_session(sid, world, 7, seed_tasks=seeds_for((1, 3, 2, 1))))
        assert store.list_ids() == ["a", "b"]

    def test_invalid_session_id_rejected(self, tmp_path):
        store = SessionStore(tmp_path)
        with pytest.raises(SessionError):
            store.path_for("../escape")
