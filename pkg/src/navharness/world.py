"""Static world representation: occupancy grid plus named landmarks.

A world document is JSON with an ASCII grid ('.' free, '#' occupied),
a resolution in meters per cell, the world coordinates of cell (0, 0),
and a landmark table. Maps are immutable after loading and safe to share
across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


class WorldFormatError(ValueError):
    """Raised when a world document is malformed or violates map invariants."""


class UnknownLandmarkError(KeyError):
    """Raised when a landmark name is not present on the map."""


class OutOfBoundsError(ValueError):
    """Raised when a point lies outside the grid."""


@dataclass(frozen=True)
class Point:
    x: float
    y: float

    def distance_to(self, other: "Point") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_pair(self) -> list[float]:
        return [self.x, self.y]


@dataclass(frozen=True)
class Landmark:
    name: str
    position: Point
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class WorldMap:
    id: str
    resolution: float  # meters per cell, > 0
    origin: Point  # world coordinates of cell (0, 0)
    grid: tuple[tuple[bool, ...], ...]  # grid[row][col], True = occupied
    landmarks: tuple[Landmark, ...]

    @property
    def n_rows(self) -> int:
        return len(self.grid)

    @property
    def n_cols(self) -> int:
        return len(self.grid[0]) if self.grid else 0

    def in_bounds(self, p: Point) -> bool:
        dx = (p.x - self.origin.x) / self.resolution
        dy = (p.y - self.origin.y) / self.resolution
        return 0 <= dx < self.n_cols and 0 <= dy < self.n_rows

    def is_occupied(self, row: int, col: int) -> bool:
        return self.grid[row][col]

    def free_cell_count(self) -> int:
        return sum(1 for row in self.grid for occ in row if not occ)

    def cell_center(self, row: int, col: int) -> Point:
        return Point(
            self.origin.x + (col + 0.5) * self.resolution,
            self.origin.y + (row + 0.5) * self.resolution,
        )

    def landmark(self, name: str) -> Landmark:
        # Landmark tables are small (tens of entries); a scan keeps WorldMap trivially immutable.
        for lm in self.landmarks:
            if lm.name == name:
                return lm
        raise UnknownLandmarkError(name)


def load_world(source: bytes | str) -> WorldMap:
    """Parse and validate a world document.

    Raises WorldFormatError on malformed documents, duplicate landmark
    names, landmarks off the grid or on occupied cells, or a non-positive
    resolution.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise WorldFormatError(f"invalid world document: {exc}") from exc
    if not isinstance(doc, dict):
        raise WorldFormatError("world document must be a JSON object")

    try:
        map_id = doc["id"]
        resolution = doc["resolution_m"]
        origin_raw = doc["origin"]
        grid_rows = doc["grid"]
        landmarks_raw = doc.get("landmarks", [])
    except KeyError as exc:
        raise WorldFormatError(f"world document missing key {exc}") from exc

    if not isinstance(map_id, str) or not map_id:
        raise WorldFormatError("map id must be a non-empty string")
    if not isinstance(resolution, (int, float)) or isinstance(resolution, bool) or resolution <= 0:
        raise WorldFormatError("resolution_m must be a positive number")
    origin = _parse_point(origin_raw, "origin")

    if not isinstance(grid_rows, list) or not grid_rows:
        raise WorldFormatError("grid must be a non-empty list of rows")
    width = len(grid_rows[0]) if isinstance(grid_rows[0], str) else -1
    grid: list[tuple[bool, ...]] = []
    for i, row in enumerate(grid_rows):
        if not isinstance(row, str) or len(row) != width or width == 0:
            raise WorldFormatError(f"grid row {i} is not a string of uniform non-zero length")
        cells = []
        for ch in row:
            if ch == ".":
                cells.append(False)
            elif ch == "#":
                cells.append(True)
            else:
                raise WorldFormatError(f"grid row {i} contains invalid cell character {ch!r}")
        grid.append(tuple(cells))
    if not any(not occ for row in grid for occ in row):
        raise WorldFormatError("grid has no free cells")

    world = WorldMap(
        id=map_id,
        resolution=float(resolution),
        origin=origin,
        grid=tuple(grid),
        landmarks=(),
    )

    landmarks: list[Landmark] = []
    seen: set[str] = set()
    for entry in landmarks_raw:
        if not isinstance(entry, dict):
            raise WorldFormatError("landmark entries must be objects")
        name = entry.get("name")
        if not isinstance(name, str) or not name:
            raise WorldFormatError("landmark name must be a non-empty string")
        if name in seen:
            raise WorldFormatError(f"duplicate landmark name {name!r}")
        seen.add(name)
        position = _parse_point([entry.get("x"), entry.get("y")], f"landmark {name!r}")
        attributes = entry.get("attributes", {})
        if not isinstance(attributes, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in attributes.items()
        ):
            raise WorldFormatError(f"landmark {name!r} attributes must map strings to strings")
        if not world.in_bounds(position):
            raise WorldFormatError(f"landmark {name!r} lies outside the grid")
        row, col = world_to_cell(world, position)
        if world.is_occupied(row, col):
            raise WorldFormatError(f"landmark {name!r} lies on an occupied cell")
        landmarks.append(Landmark(name=name, position=position, attributes=dict(attributes)))

    return WorldMap(
        id=world.id,
        resolution=world.resolution,
        origin=world.origin,
        grid=world.grid,
        landmarks=tuple(landmarks),
    )


def _parse_point(raw: object, what: str) -> Point:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise WorldFormatError(f"{what} must be a pair of numbers")
    x, y = raw
    for v in (x, y):
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            raise WorldFormatError(f"{what} must be a pair of finite numbers")
    return Point(float(x), float(y))


def landmark_position(world: WorldMap, name: str) -> Point:
    """Position of a landmark; exact, case-sensitive name match."""
    return world.landmark(name).position


def world_to_cell(world: WorldMap, p: Point) -> tuple[int, int]:
    """Integer (row, col) of the cell containing p, via floor((p - origin) / resolution)."""
    if not world.in_bounds(p):
        raise OutOfBoundsError(f"point ({p.x}, {p.y}) is outside map {world.id!r}")
    col = math.floor((p.x - world.origin.x) / world.resolution)
    row = math.floor((p.y - world.origin.y) / world.resolution)
    return row, col
