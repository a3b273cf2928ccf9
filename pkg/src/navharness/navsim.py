"""Deterministic occupancy-grid navigation stand-in for a real controller stack.

Plans 8-connected shortest paths between cell centers and turns an ordered goal
list into per-leg reachability and motion time. The robot is a point: no
footprint inflation and no rotation cost, which is enough for time-ratio
metrics. Planning is pure given an immutable map, so concurrent use is fine.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

from .world import OutOfBoundsError, Point, WorldMap, world_to_cell

SQRT2 = math.sqrt(2.0)


class PlanningError(ValueError):
    """Raised when a plan cannot be produced for the given endpoints."""


class NoPathError(PlanningError):
    """Raised when start and goal are not connected on the grid."""


@dataclass(frozen=True)
class Path:
    waypoints: tuple[Point, ...]  # consecutive cell centers, 8-connected
    length: float  # meters

    @property
    def steps(self) -> int:
        return len(self.waypoints) - 1


@dataclass(frozen=True)
class Leg:
    goal: Point
    reached: bool
    path_length: float
    leg_time: float
    waypoints: Optional[tuple[Point, ...]] = None


@dataclass(frozen=True)
class NavigationOutcome:
    legs: tuple[Leg, ...]
    motion_duration: float
    all_reached: bool


def plan_path(
    world: WorldMap,
    start: Point,
    goal: Point,
    blocked_cells: Iterable[tuple[int, int]] = (),
    inflation_radius: float = 0.0,
) -> Path:
    """Shortest 8-connected grid path between the cells containing start and goal.

    Straight moves cost one cell resolution, diagonal moves resolution*sqrt(2);
    a diagonal move is allowed only when both adjacent cardinal cells are free
    (no corner cutting). Ties in the A* frontier break on smaller heuristic,
    then smaller (row, col) of the expanded cell. `blocked_cells` marks cells
    temporarily occupied for this plan only (small dynamic obstacles);
    `inflation_radius` (meters) additionally treats cells whose centers lie
    within that distance of an occupied cell as occupied, standing in for a
    robot footprint.
    """
    try:
        start_cell = world_to_cell(world, start)
        goal_cell = world_to_cell(world, goal)
    except OutOfBoundsError as exc:
        raise PlanningError(str(exc)) from exc

    blocked = set(blocked_cells)
    if inflation_radius > 0:
        blocked |= _inflate(world, blocked, inflation_radius)

    def occupied(cell: tuple[int, int]) -> bool:
        return world.is_occupied(*cell) or cell in blocked

    if occupied(start_cell):
        raise PlanningError(f"start cell {start_cell} is occupied")
    if occupied(goal_cell):
        raise PlanningError(f"goal cell {goal_cell} is occupied")

    res = world.resolution
    diag = res * SQRT2
    n_rows, n_cols = world.n_rows, world.n_cols

    def heuristic(cell: tuple[int, int]) -> float:
        dr = abs(cell[0] - goal_cell[0])
        dc = abs(cell[1] - goal_cell[1])
        lo, hi = (dr, dc) if dr < dc else (dc, dr)
        return (hi - lo) * res + lo * diag

    g_score: dict[tuple[int, int], float] = {start_cell: 0.0}
    came_from: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    open_heap: list[tuple[float, float, int, int]] = [
        (heuristic(start_cell), heuristic(start_cell), *start_cell)
    ]

    while open_heap:
        _f, _h, row, col = heapq.heappop(open_heap)
        current = (row, col)
        if current in closed:
            continue
        closed.add(current)
        if current == goal_cell:
            break
        base = g_score[current]
        for nr, nc, cost in _neighbors(row, col, n_rows, n_cols, occupied, res, diag):
            neighbor = (nr, nc)
            if neighbor in closed:
                continue
            tentative = base + cost
            if tentative < g_score.get(neighbor, math.inf):
                g_score[neighbor] = tentative
                came_from[neighbor] = current
                h = heuristic(neighbor)
                heapq.heappush(open_heap, (tentative + h, h, nr, nc))
    else:
        raise NoPathError(f"no path from cell {start_cell} to cell {goal_cell}")

    cells = [goal_cell]
    while cells[-1] != start_cell:
        cells.append(came_from[cells[-1]])
    cells.reverse()

    straight = diagonal = 0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 != r1 and c0 != c1:
            diagonal += 1
        else:
            straight += 1
    # Canonical length from step counts keeps equal-cost paths byte-equal.
    length = straight * res + diagonal * diag
    waypoints = tuple(world.cell_center(r, c) for r, c in cells)
    return Path(waypoints=waypoints, length=length)


def _inflate(world: WorldMap, extra_blocked: set, radius: float) -> set:
    reach = int(radius / world.resolution)
    if reach < 1:
        return set()
    offsets = [
        (dr, dc)
        for dr in range(-reach, reach + 1)
        for dc in range(-reach, reach + 1)
        if (dr or dc) and math.hypot(dr * world.resolution, dc * world.resolution) <= radius
    ]
    sources = set(extra_blocked)
    for r in range(world.n_rows):
        for c in range(world.n_cols):
            if world.is_occupied(r, c):
                sources.add((r, c))
    inflated = set()
    for r, c in sources:
        for dr, dc in offsets:
            nr, nc = r + dr, c + dc
            if 0 <= nr < world.n_rows and 0 <= nc < world.n_cols:
                inflated.add((nr, nc))
    return inflated


def _neighbors(row, col, n_rows, n_cols, occupied, res, diag):
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nr, nc = row + dr, col + dc
        if 0 <= nr < n_rows and 0 <= nc < n_cols and not occupied((nr, nc)):
            yield nr, nc, res
    for dr, dc in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
        nr, nc = row + dr, col + dc
        if not (0 <= nr < n_rows and 0 <= nc < n_cols) or occupied((nr, nc)):
            continue
        if occupied((row + dr, col)) or occupied((row, col + dc)):
            continue  # no corner cutting past an occupied cardinal cell
        yield nr, nc, diag


def execute_goals(
    world: WorldMap,
    start: Point,
    goals: list[Point],
    speed: float,
    blocked_cells: Iterable[tuple[int, int]] = (),
    inflation_radius: float = 0.0,
    keep_paths: bool = False,
) -> NavigationOutcome:
    """Drive through the goal list in order, each leg starting where the last ended.

    An unreachable goal marks its leg and every later leg as not reached with
    zero time; motion stops there. Unreachability never raises.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    blocked = tuple(blocked_cells)
    legs: list[Leg] = []
    current = start
    failed = False
    motion = 0.0
    for goal in goals:
        if failed:
            legs.append(Leg(goal=goal, reached=False, path_length=0.0, leg_time=0.0))
            continue
        try:
            path = plan_path(
                world, current, goal, blocked_cells=blocked, inflation_radius=inflation_radius
            )
        except PlanningError:
            failed = True
            legs.append(Leg(goal=goal, reached=False, path_length=0.0, leg_time=0.0))
            continue
        leg_time = path.length / speed
        motion += leg_time
        legs.append(
            Leg(
                goal=goal,
                reached=True,
                path_length=path.length,
                leg_time=leg_time,
                waypoints=path.waypoints if keep_paths else None,
            )
        )
        current = goal
    return NavigationOutcome(
        legs=tuple(legs),
        motion_duration=motion,
        all_reached=all(leg.reached for leg in legs),
    )


def path_dump_lines(outcome: NavigationOutcome) -> list[str]:
    """Line-delimited leg records for external visualization."""
    lines = []
    for leg in outcome.legs:
        lines.append(
            json.dumps(
                {
                    "goal": leg.goal.as_pair(),
                    "reached": leg.reached,
                    "path_length": leg.path_length,
                    "waypoints": [p.as_pair() for p in leg.waypoints] if leg.waypoints else None,
                }
            )
        )
    return lines


def goals_payload(goals: list[Point]) -> str:
    """Goal-list export, identical in shape to parsed output positions."""
    return json.dumps([[p.x, p.y] for p in goals])
