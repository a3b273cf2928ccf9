import json
from pathlib import Path

import pytest

from navharness.backends import BackendConfig, make_backend
from navharness.iteration import Task
from navharness.outputs import ModelOutput, serialize_model_output
from navharness.world import Point, load_world

FIXTURES = Path(__file__).parent / "fixtures"


def world_doc(grid, landmarks=(), resolution=1.0, origin=(0.0, 0.0), map_id="test"):
    return json.dumps(
        {
            "id": map_id,
            "resolution_m": resolution,
            "origin": list(origin),
            "grid": list(grid),
            "landmarks": [
                {"name": n, "x": x, "y": y, "attributes": dict(attrs)}
                for n, x, y, attrs in landmarks
            ],
        }
    )


@pytest.fixture
def tiny_world():
    """5x5 all-free grid, resolution 1.0, one landmark 'desk' at (2, 2)."""
    return load_world(world_doc(["....."] * 5, [("desk", 2.0, 2.0, {})]))


@pytest.fixture
def walled_world():
    """5x5 grid with a wall column at col 2 (door at row 4)."""
    grid = [
        "..#..",
        "..#..",
        "..#..",
        "..#..",
        ".....",
    ]
    return load_world(world_doc(grid, [("desk", 0.5, 0.5, {})]))


@pytest.fixture(scope="session")
def hospital_world():
    return load_world((FIXTURES / "hospital.world").read_bytes())


@pytest.fixture
def hospital_path():
    return FIXTURES / "hospital.world"


def correct_output(goals):
    return serialize_model_output(
        ModelOutput(explanation="following hint", positions=tuple(goals))
    )


# The convergence fixture: four tasks on an open map. The student answers
# correctly only once the teacher's per-task hint marker shows up in its
# prompt, and the teacher emits that marker only after it has seen a failed
# attempt for the task. Iteration 1 fails everywhere, 2 and 3 succeed.

LAB_LANDMARKS = [
    ("dock", 5.5, 1.5, {"type": "charger"}),
    ("shelf", 1.5, 5.5, {}),
    ("bench", 6.5, 6.5, {}),
    ("printer", 2.5, 2.5, {}),
]


def lab_world_doc():
    return world_doc(["........"] * 8, LAB_LANDMARKS, map_id="lab")


def lab_tasks():
    texts = {
        "t1": ("Go to the charging dock.", Point(5.5, 1.5)),
        "t2": ("Walk over to the parts shelf.", Point(1.5, 5.5)),
        "t3": ("Move to the work bench.", Point(6.5, 6.5)),
        "t4": ("Stand next to the printer.", Point(2.5, 2.5)),
    }
    return [
        Task(id=tid, text=text, map_id="lab", goals=(goal,))
        for tid, (text, goal) in texts.items()
    ]


def unlock_student_config():
    rules = [
        {
            "match": f"hint-{task.id}",
            "response": correct_output(task.goals),
            "unlock_after": 1,
        }
        for task in lab_tasks()
    ]
    return BackendConfig.from_dict(
        {
            "kind": "scripted",
            "model_name": "unlock-student",
            "script": {
                "rules": rules,
                "fallback": '{"explanation": "guessing the lobby", "positions": [[0.5, 0.5]]}',
                "synthetic_latency": 0.05,
            },
        }
    )


def echo_teacher_config():
    rules = [
        {
            "match": rf"task={task.id} iteration=\d+ success=0",
            "regex": True,
            "response": json.dumps(
                {
                    "hints": [f"hint-{task.id}: answer with the expected goal coordinates"],
                    "rationale": f"{task.id} failed earlier",
                }
            ),
        }
        for task in lab_tasks()
    ]
    return BackendConfig.from_dict(
        {
            "kind": "scripted",
            "model_name": "echo-teacher",
            "script": {
                "rules": rules,
                "fallback": '{"hints": [], "rationale": "nothing to fix"}',
                "synthetic_latency": 0.02,
            },
        }
    )


@pytest.fixture
def lab_world():
    return load_world(lab_world_doc())


@pytest.fixture
def convergence_fixture(lab_world):
    return {
        "world": lab_world,
        "tasks": lab_tasks(),
        "student": make_backend(unlock_student_config()),
        "teacher": make_backend(echo_teacher_config()),
    }


def write_convergence_files(root: Path) -> dict[str, Path]:
    """Materialize the convergence fixture as CLI-consumable files."""
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "world": root / "lab.world",
        "tasks": root / "tasks.jsonl",
        "student": root / "student.cfg",
        "teacher": root / "teacher.cfg",
    }
    paths["world"].write_text(lab_world_doc())
    paths["tasks"].write_text(
        "\n".join(
            json.dumps(
                {
                    "id": t.id,
                    "task": t.text,
                    "num_goals": t.num_goals,
                    "map_id": t.map_id,
                    "goals": [g.as_pair() for g in t.goals],
                    "score": None,
                    "round": 0,
                }
            )
            for t in lab_tasks()
        )
        + "\n"
    )

    def dump_config(cfg: BackendConfig) -> str:
        return json.dumps(
            {
                "kind": cfg.kind,
                "model_name": cfg.model_name,
                "script": {
                    "rules": [
                        {
                            "match": r.matcher,
                            "response": r.response,
                            "unlock_after": r.unlock_after,
                            "regex": r.is_regex,
                        }
                        for r in cfg.script.rules
                    ],
                    "fallback": cfg.script.fallback,
                    "synthetic_latency": cfg.script.synthetic_latency,
                },
            }
        )

    paths["student"].write_text(dump_config(unlock_student_config()))
    paths["teacher"].write_text(dump_config(echo_teacher_config()))
    return paths
