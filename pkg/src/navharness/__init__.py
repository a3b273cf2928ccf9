"""Harness for language-guided multi-point robot navigation experiments:
world models, model-output parsing, teacher-student iteration against a grid
simulator, run metrics, and human-in-the-loop dataset curation."""

__version__ = "0.1.0"

from .backends import (
    BackendConfig,
    ChatMessage,
    CompletionRequest,
    CompletionResponse,
    make_backend,
    tokens_per_second,
)
from .dataset import CurationSession, SessionStore, allocate_ratio, create_session, export_dataset
from .iteration import (
    AttemptRecord,
    FeedbackStore,
    IterationConfig,
    RunLog,
    Task,
    judge_success,
    load_tasks_jsonl,
    read_feedback,
    run_iteration_loop,
    update_feedback,
)
from .metrics import RunMetrics, summarize_run
from .navsim import NavigationOutcome, Path, execute_goals, plan_path
from .outputs import ModelOutput, parse_model_output, serialize_model_output, validate_positions
from .prompts import PromptBundle, TeacherDirective, build_student_prompt, build_teacher_prompt
from .world import Landmark, Point, WorldMap, landmark_position, load_world, world_to_cell
