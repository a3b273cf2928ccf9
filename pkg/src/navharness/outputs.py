"""Parse the structured document a model must emit: explanation plus goal positions.

Real model replies wrap the payload in prose, markdown fences, or both, so
extraction runs a cascade: whole-string parse, fenced code blocks, then a scan
for the first balanced object literal. Only the first JSON object found is
considered; later objects are ignored so multi-object replies stay deterministic.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

from .world import Point, WorldMap, world_to_cell

EXTRACTION_DIRECT = "direct"
EXTRACTION_FENCED = "fenced-block"
EXTRACTION_SCAN = "first-object-scan"

_FENCE_RE = re.compile(r"```[a-zA-Z0-9_-]*[ \t]*\r?\n(.*?)```", re.DOTALL)
_DECODER = json.JSONDecoder()


class OutputParseError(ValueError):
    """Raised when no valid output document can be extracted from raw text."""


class PositionValidationError(ValueError):
    """Raised when parsed positions violate map bounds or caller constraints."""


@dataclass(frozen=True)
class ModelOutput:
    explanation: str
    positions: tuple[Point, ...]


@dataclass(frozen=True)
class ParseDiagnostics:
    extraction_method: str
    repairs_applied: tuple[str, ...] = field(default_factory=tuple)


def parse_model_output(raw: str) -> tuple[ModelOutput, ParseDiagnostics]:
    """Extract the first structured object from raw model text.

    Returns the parsed output plus diagnostics recording how the payload was
    located. Raises OutputParseError when no object is found, the object lacks
    `positions`, or a position entry is not a pair of finite numbers.
    """
    obj, method = extract_first_object(raw)
    repairs: list[str] = []

    if "positions" not in obj:
        raise OutputParseError("output object lacks required key 'positions'")
    positions = _coerce_positions(obj["positions"])

    explanation = obj.get("explanation")
    if explanation is None:
        explanation = ""
        repairs.append("explanation-defaulted")
    elif not isinstance(explanation, str):
        explanation = json.dumps(explanation, ensure_ascii=False)
        repairs.append("explanation-coerced")

    return (
        ModelOutput(explanation=explanation, positions=positions),
        ParseDiagnostics(extraction_method=method, repairs_applied=tuple(repairs)),
    )


def serialize_model_output(out: ModelOutput) -> str:
    """Canonical serialization, shared by run logs and training exports."""
    return json.dumps(
        {"explanation": out.explanation, "positions": [[p.x, p.y] for p in out.positions]},
        ensure_ascii=False,
    )


def validate_positions(
    out: ModelOutput,
    world: WorldMap,
    *,
    require_free_cell: bool = False,
    max_points: int = 16,
) -> list[Point]:
    """Check parsed positions against the map before they reach the controller."""
    if not out.positions:
        raise PositionValidationError("positions list is empty")
    if len(out.positions) > max_points:
        raise PositionValidationError(f"{len(out.positions)} points exceed limit of {max_points}")
    for i, p in enumerate(out.positions):
        if not world.in_bounds(p):
            raise PositionValidationError(f"position {i} ({p.x}, {p.y}) is out of bounds")
        if require_free_cell:
            row, col = world_to_cell(world, p)
            if world.is_occupied(row, col):
                raise PositionValidationError(f"position {i} ({p.x}, {p.y}) lies on an occupied cell")
    return list(out.positions)


def extract_first_object(raw: str) -> tuple[dict, str]:
    """Locate the first JSON object in raw text; shared by every model-output parser."""
    if not isinstance(raw, str):
        raise OutputParseError(f"expected text, got {type(raw).__name__}")

    try:
        whole = json.loads(raw.strip())
    except (json.JSONDecodeError, RecursionError):
        whole = None
    if isinstance(whole, dict):
        return whole, EXTRACTION_DIRECT

    for match in _FENCE_RE.finditer(raw):
        try:
            block = json.loads(match.group(1).strip())
        except (json.JSONDecodeError, RecursionError):
            continue
        if isinstance(block, dict):
            return block, EXTRACTION_FENCED

    idx = raw.find("{")
    while idx != -1:
        try:
            value, _end = _DECODER.raw_decode(raw, idx)
        except (json.JSONDecodeError, RecursionError):
            value = None
        if isinstance(value, dict):
            return value, EXTRACTION_SCAN
        idx = raw.find("{", idx + 1)

    raise OutputParseError("no structured object found in model output")


def _coerce_positions(raw: object) -> tuple[Point, ...]:
    if not isinstance(raw, list):
        raise OutputParseError("'positions' must be a list of [x, y] pairs")
    points: list[Point] = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise OutputParseError(f"position entry {i} is not a 2-element pair")
        coords = []
        for v in entry:
            # bool is an int subclass; JSON true/false are not coordinates
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise OutputParseError(f"position entry {i} is not a pair of finite numbers")
            coords.append(float(v))
        points.append(Point(coords[0], coords[1]))
    return tuple(points)
