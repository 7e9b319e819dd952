"""Grid maps, movement geometry and precomputed shortest-path costs.

Coordinates are (x, y) with x the column and y the row; row 0 is the top,
so NORTH decreases y. Movement is 4-connected plus an explicit STAY.
Direction order is fixed as N, E, S, W everywhere ties need breaking.
"""

from __future__ import annotations

import random
from collections import deque
from enum import IntEnum
from importlib import resources
from typing import Iterable, NamedTuple


class Position(NamedTuple):
    x: int
    y: int


class Action(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3
    STAY = 4


# dx, dy per Action value, in N, E, S, W, STAY order
ACTION_DELTAS = ((0, -1), (1, 0), (0, 1), (-1, 0), (0, 0))
MOVE_ACTIONS = (Action.NORTH, Action.EAST, Action.SOUTH, Action.WEST)

UNREACHABLE = float("inf")


class GridMap:
    """Static world description: passable cells, start and target candidates.

    Instances are immutable after construction and safe to share across
    workers. Construction validates that all candidates are passable,
    distinct, and connected to the drone start.
    """

    def __init__(
        self,
        width: int,
        height: int,
        blocked: Iterable[Position],
        drone_start: Position,
        responder_start_candidates: Iterable[Position],
        target_candidates: Iterable[Position],
    ):
        self.width = int(width)
        self.height = int(height)
        self.blocked = frozenset(Position(*p) for p in blocked)
        self.drone_start = Position(*drone_start)
        self.responder_start_candidates = tuple(Position(*p) for p in responder_start_candidates)
        self.target_candidates = tuple(Position(*p) for p in target_candidates)
        self._validate()
        # Precomputed movement tables for the Monte-Carlo hot path.
        self.neighbor_table: dict[Position, tuple[Position, ...]] = {}
        self.move_table: dict[Position, tuple[Position, ...]] = {}
        for p in self.passable_cells():
            nbrs = []
            moves = []
            for dx, dy in ACTION_DELTAS[:4]:
                q = Position(p.x + dx, p.y + dy)
                if self.passable(q):
                    nbrs.append(q)
                    moves.append(q)
                else:
                    moves.append(p)  # blocked moves become Stay
            moves.append(p)
            self.neighbor_table[p] = tuple(nbrs)
            self.move_table[p] = tuple(moves)

    def _validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("map dimensions must be positive")
        for p in self.blocked:
            if not self.in_bounds(p):
                raise ValueError(f"blocked cell out of bounds: {p}")
        if not self.responder_start_candidates:
            raise ValueError("map needs at least one responder start candidate")
        if not self.target_candidates:
            raise ValueError("map needs at least one target candidate")
        if len(set(self.target_candidates)) != len(self.target_candidates):
            raise ValueError("target candidates must be distinct")
        if len(set(self.responder_start_candidates)) != len(self.responder_start_candidates):
            raise ValueError("responder start candidates must be distinct")
        special = [self.drone_start, *self.responder_start_candidates, *self.target_candidates]
        for p in special:
            if not self.in_bounds(p) or p in self.blocked:
                raise ValueError(f"start/candidate cell not passable: {p}")
        reachable = self._flood_from(self.drone_start)
        for p in special:
            if p not in reachable:
                raise ValueError(f"cell {p} not connected to drone start")

    def in_bounds(self, p: Position) -> bool:
        return 0 <= p.x < self.width and 0 <= p.y < self.height

    def passable(self, p: Position) -> bool:
        return self.in_bounds(p) and p not in self.blocked

    def passable_cells(self) -> list[Position]:
        return [
            Position(x, y)
            for y in range(self.height)
            for x in range(self.width)
            if Position(x, y) not in self.blocked
        ]

    def neighbors(self, p: Position) -> list[Position]:
        """Passable 4-connected cells adjacent to p, in N, E, S, W order.

        Raises ValueError if p itself is blocked or out of bounds.
        """
        p = Position(*p)
        if not self.passable(p):
            raise ValueError(f"invalid position: {p}")
        return list(self.neighbor_table[p])

    def move(self, p: Position, action: int) -> Position:
        """Apply a move action; blocked moves leave the position unchanged."""
        return self.move_table[p][action]

    def _flood_from(self, start: Position) -> set[Position]:
        seen = {start}
        queue = deque([start])
        while queue:
            p = queue.popleft()
            for dx, dy in ACTION_DELTAS[:4]:
                q = Position(p.x + dx, p.y + dy)
                if self.passable(q) and q not in seen:
                    seen.add(q)
                    queue.append(q)
        return seen

    def to_ascii(self) -> str:
        rows = []
        rset = set(self.responder_start_candidates)
        tset = set(self.target_candidates)
        for y in range(self.height):
            row = []
            for x in range(self.width):
                p = Position(x, y)
                if p in self.blocked:
                    row.append("#")
                elif p == self.drone_start:
                    row.append("D")
                elif p in rset:
                    row.append("R")
                elif p in tset:
                    row.append("T")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join(rows) + "\n"


def parse_map(text: str) -> GridMap:
    """Parse the ASCII map format.

    One row per line: '#' blocked, '.' passable, 'D' drone start,
    'R' responder start candidate, 'T' target candidate. D/R/T cells are
    passable. Rejects ragged rows and maps without exactly one 'D'.
    """
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty map")
    width = len(lines[0])
    blocked = []
    drone = None
    responders = []
    targets = []
    for y, line in enumerate(lines):
        if len(line) != width:
            raise ValueError(f"ragged row {y}: expected width {width}, got {len(line)}")
        for x, ch in enumerate(line):
            p = Position(x, y)
            if ch == "#":
                blocked.append(p)
            elif ch == "D":
                if drone is not None:
                    raise ValueError("multiple drone start cells")
                drone = p
            elif ch == "R":
                responders.append(p)
            elif ch == "T":
                targets.append(p)
            elif ch != ".":
                raise ValueError(f"unknown map character {ch!r} at {p}")
    if drone is None:
        raise ValueError("map has no drone start cell")
    return GridMap(width, len(lines), blocked, drone, responders, targets)


def load_map_file(path) -> GridMap:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_map(fh.read())


class CostTable:
    """All-pairs shortest-path step counts and first-move policies.

    Distances come from breadth-first search over passable cells; BFS trees
    are computed per source on first use and cached (sources for every
    target candidate are precomputed up front since rollouts and responder
    dynamics hit them constantly). Unreachable pairs cost UNREACHABLE.
    """

    def __init__(self, grid: GridMap):
        self.grid = grid
        self._dist: dict[Position, dict[Position, int]] = {}
        self._best_step: dict[Position, dict[Position, Position]] = {}
        for t in grid.target_candidates:
            self.distances_from(t)

    def distances_from(self, source: Position) -> dict[Position, int]:
        cached = self._dist.get(source)
        if cached is not None:
            return cached
        dist = {source: 0}
        queue = deque([source])
        table = self.grid.neighbor_table
        while queue:
            p = queue.popleft()
            d = dist[p] + 1
            for q in table[p]:
                if q not in dist:
                    dist[q] = d
                    queue.append(q)
        self._dist[source] = dist
        return dist

    def cost(self, a: Position, b: Position) -> float:
        # grid moves are undirected, so any cached endpoint serves both ways
        for src, dst in ((b, a), (a, b)):
            table = self._dist.get(src)
            if table is not None:
                return table.get(dst, UNREACHABLE)
        return self.distances_from(a).get(b, UNREACHABLE)

    def best_step(self, p: Position, target: Position) -> Position:
        """Next cell on a shortest path p -> target (ties: N, E, S, W)."""
        per_target = self._best_step.setdefault(target, {})
        step = per_target.get(p)
        if step is None:
            dist = self.distances_from(target)
            here = dist.get(p)
            if here is None:
                raise ValueError(f"{target} unreachable from {p}")
            if here == 0:
                step = p
            else:
                for q in self.grid.neighbor_table[p]:
                    if dist.get(q, UNREACHABLE) == here - 1:
                        step = q
                        break
            per_target[p] = step
        return step

    def best_action(self, p: Position, target: Position) -> Action:
        """First move of a shortest path p -> target; STAY when p == target."""
        if p == target:
            return Action.STAY
        q = self.best_step(p, target)
        return Action((ACTION_DELTAS[:4]).index((q.x - p.x, q.y - p.y)))


def compute_costs(grid: GridMap) -> CostTable:
    return CostTable(grid)


# --- environment families -------------------------------------------------

FAMILIES = ("SE", "LE", "CE", "BUILDING", "RANDOM")


def _open_grid(n: int, responder_count: int, targets: list[Position]) -> GridMap:
    center = Position(n // 2, n // 2)
    adjacent = [Position(center.x + dx, center.y + dy) for dx, dy in ACTION_DELTAS[:4]]
    return GridMap(n, n, [], center, adjacent[:responder_count], targets)


def _make_se() -> GridMap:
    corners = [Position(0, 0), Position(4, 0), Position(0, 4), Position(4, 4)]
    return _open_grid(5, 2, corners)


def _make_le() -> GridMap:
    targets = []
    for bx in (0, 9):
        for by in (0, 9):
            for dx in (0, 1):
                for dy in (0, 1):
                    targets.append(Position(bx + dx, by + dy))
    return _open_grid(11, 4, targets)


def _packaged_map(name: str) -> GridMap:
    text = resources.files("rescue_pomcp.maps").joinpath(name).read_text(encoding="utf-8")
    return parse_map(text)


def _make_random(seed: int, rooms: int = 6, size: int = 64, max_tries: int = 20) -> GridMap:
    """Rooms connected by L-shaped corridors; pure function of seed."""
    for attempt in range(max_tries):
        rng = random.Random(seed * 1000003 + attempt)
        placed: list[tuple[int, int, int, int]] = []  # x0, y0, w, h
        tries = 0
        while len(placed) < rooms and tries < 500:
            tries += 1
            w = rng.randint(6, 12)
            h = rng.randint(6, 12)
            x0 = rng.randint(1, size - w - 2)
            y0 = rng.randint(1, size - h - 2)
            if any(
                x0 - 1 <= px + pw and px - 1 <= x0 + w and y0 - 1 <= py + ph and py - 1 <= y0 + h
                for px, py, pw, ph in placed
            ):
                continue
            placed.append((x0, y0, w, h))
        if len(placed) < rooms:
            continue
        open_cells: set[Position] = set()
        for x0, y0, w, h in placed:
            for y in range(y0, y0 + h):
                for x in range(x0, x0 + w):
                    open_cells.add(Position(x, y))
        centers = [Position(x0 + w // 2, y0 + h // 2) for x0, y0, w, h in placed]
        for a, b in zip(centers, centers[1:]):
            for x in range(min(a.x, b.x), max(a.x, b.x) + 1):
                open_cells.add(Position(x, a.y))
            for y in range(min(a.y, b.y), max(a.y, b.y) + 1):
                open_cells.add(Position(b.x, y))
        blocked = [
            Position(x, y)
            for y in range(size)
            for x in range(size)
            if Position(x, y) not in open_cells
        ]
        targets = []
        for x0, y0, w, h in placed:
            targets.append(Position(rng.randrange(x0, x0 + w), rng.randrange(y0, y0 + h)))
        drone = centers[0]
        responder_starts = []
        for dx, dy in ACTION_DELTAS[:4]:
            q = Position(drone.x + dx, drone.y + dy)
            if q in open_cells and len(responder_starts) < 2:
                responder_starts.append(q)
        if len(set(targets)) < rooms or drone in targets:
            continue
        try:
            return GridMap(size, size, blocked, drone, responder_starts, targets)
        except ValueError:
            continue
    raise ValueError(f"could not generate a connected random map for seed {seed}")


def make_environment(family: str, seed: int = 0) -> GridMap:
    """Build one of the five environment families; only RANDOM uses the seed."""
    family = family.upper()
    if family == "SE":
        return _make_se()
    if family == "LE":
        return _make_le()
    if family == "CE":
        return _packaged_map("cross.txt")
    if family == "BUILDING":
        return _packaged_map("building.txt")
    if family == "RANDOM":
        return _make_random(seed)
    raise ValueError(f"unknown environment family: {family}")
