"""All prompt template text, versioned in one place.

Keep edits here reviewable: run logs record prompts by digest, so template
changes alter run fingerprints.
"""

TEMPLATE_VERSION = "v1"

# Fixed marker sentence; every student system message must contain it verbatim.
OUTPUT_CONTRACT = (
    'Respond with exactly one JSON object of the form '
    '{"explanation": "<your reasoning>", "positions": [[x, y], ...]} and nothing else.'
)

STUDENT_SYSTEM = (
    "You plan goal coordinates for a mobile robot. "
    "Given a task, reply with the ordered list of target points the robot must visit. "
    + OUTPUT_CONTRACT
)

TEACHER_SYSTEM = (
    "You are a prompt engineer coaching a smaller navigation model. "
    "Study the task and the student's attempt history, diagnose its mistakes, "
    "and write short corrective hints it should follow on the next attempt."
)

TEACHER_HINT_INSTRUCTION = (
    'Reply with exactly one JSON object of the form '
    '{"hints": ["<hint>", ...], "rationale": "<why>"}.'
)

NO_PRIOR_ATTEMPTS = "No prior attempts recorded."

LANDMARK_HEADER = "Known landmarks:"

GRID_HEADER = "Occupancy grid ('.'=free, '#'=occupied), row 0 first:"

HINTS_HEADER = "Hints from your coach:"

HISTORY_HEADER = "Attempt history (oldest first):"

GENERATOR_SYSTEM = (
    "You write navigation tasks for a mobile robot operating on the map below. "
    "Each task is a natural-language instruction that sends the robot to one or "
    "more landmarks in a specific order."
)

GENERATOR_INSTRUCTION = (
    'Reply with exactly one JSON object of the form '
    '{"tasks": [{"task": "<instruction text>", "goal_landmarks": ["<landmark name>", ...], '
    '"explanation": "<one sentence>"}, ...]}. '
    "Goals may also be given as coordinates with \"goals\": [[x, y], ...], but every goal "
    "must be the exact position of a landmark on the map."
)
