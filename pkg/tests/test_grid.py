import math
from collections import deque

import pytest

from rescue_pomcp import (
    Action,
    GridMap,
    Position,
    UNREACHABLE,
    compute_costs,
    make_environment,
    parse_map,
)


def bfs_distance(grid, start, goal):
    """Independent BFS oracle over the parsed map, no CostTable involved."""
    if start == goal:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        p, d = queue.popleft()
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            q = Position(p.x + dx, p.y + dy)
            if grid.passable(q) and q not in seen:
                if q == goal:
                    return d + 1
                seen.add(q)
                queue.append((q, d + 1))
    return math.inf


def test_neighbors_interior_cell():
    se = make_environment("SE")
    assert se.neighbors(Position(2, 2)) == [
        Position(2, 1),
        Position(3, 2),
        Position(2, 3),
        Position(1, 2),
    ]


def test_neighbors_corner_cell():
    se = make_environment("SE")
    assert se.neighbors(Position(0, 0)) == [Position(1, 0), Position(0, 1)]


def test_neighbors_rejects_invalid_positions():
    se = make_environment("SE")
    with pytest.raises(ValueError):
        se.neighbors(Position(-1, 0))
    building = make_environment("BUILDING")
    blocked = next(iter(building.blocked))
    with pytest.raises(ValueError):
        building.neighbors(blocked)


def test_building_neighbors_exclude_walls():
    building = make_environment("BUILDING")
    for p in building.passable_cells():
        expected = []
        for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0)):
            q = Position(p.x + dx, p.y + dy)
            if building.in_bounds(q) and q not in building.blocked:
                expected.append(q)
        assert building.neighbors(p) == expected


def test_costs_open_grid_manhattan():
    se = make_environment("SE")
    costs = compute_costs(se)
    assert costs.cost(Position(2, 2), Position(0, 0)) == 4
    assert costs.cost(Position(1, 3), Position(1, 3)) == 0
    assert costs.best_action(Position(2, 2), Position(2, 2)) == Action.STAY


def test_costs_building_match_bfs_oracle():
    building = make_environment("BUILDING")
    costs = compute_costs(building)
    targets = building.target_candidates
    for a in targets:
        for b in targets:
            assert costs.cost(a, b) == bfs_distance(building, a, b)
    # rooms force door detours: straight-line distance is an underestimate
    same_room, other_room = Position(1, 1), Position(13, 13)
    manhattan = abs(same_room.x - other_room.x) + abs(same_room.y - other_room.y)
    assert costs.cost(same_room, other_room) > manhattan


def test_best_action_ties_break_north_first():
    se = make_environment("SE")
    costs = compute_costs(se)
    # from the center both NORTH and WEST start a shortest path to (0,0)
    assert costs.best_action(Position(2, 2), Position(0, 0)) == Action.NORTH
    assert costs.best_action(Position(2, 2), Position(0, 2)) == Action.WEST


@pytest.mark.parametrize("family", ["SE", "BUILDING", "CE"])
def test_best_action_walks_exactly_cost_steps(family):
    grid = make_environment(family)
    costs = compute_costs(grid)
    for target in grid.target_candidates:
        for p in grid.passable_cells():
            steps = 0
            cur = p
            while cur != target:
                cur = costs.best_step(cur, target)
                steps += 1
                assert steps <= costs.cost(p, target)
            assert steps == costs.cost(p, target)


def test_unreachable_pair_costs_infinity():
    # the lone cell at (4,4) is passable but walled off; it is not a
    # candidate so map validation accepts it
    grid = parse_map("D.R..\n.....\n..T..\n#####\n####.\n")
    isolated = Position(4, 4)
    assert grid.passable(isolated)
    costs = compute_costs(grid)
    assert costs.cost(grid.drone_start, isolated) == UNREACHABLE


def test_environment_initial_condition_counts():
    se = make_environment("SE")
    assert len(se.responder_start_candidates) * len(se.target_candidates) == 8
    le = make_environment("LE")
    assert len(le.responder_start_candidates) * len(le.target_candidates) == 64
    assert le.drone_start == Position(5, 5)


def test_cross_environment_layout():
    ce = make_environment("CE")
    assert (ce.width, ce.height) == (11, 11)
    assert len(ce.target_candidates) == 8
    # arms are 5 wide: the corner blocks are walls
    assert not ce.passable(Position(0, 0))
    assert not ce.passable(Position(10, 10))
    assert ce.passable(Position(5, 0))


def test_building_environment_layout():
    b = make_environment("BUILDING")
    assert (b.width, b.height) == (15, 15)
    assert len(b.target_candidates) == 8


def test_random_environment_is_seed_deterministic():
    for seed in (0, 3, 11):
        a = make_environment("RANDOM", seed)
        b = make_environment("RANDOM", seed)
        assert a.to_ascii() == b.to_ascii()
    assert make_environment("RANDOM", 1).to_ascii() != make_environment("RANDOM", 2).to_ascii()


def test_random_environment_connectivity():
    grid = make_environment("RANDOM", 5)
    costs = compute_costs(grid)
    assert len(grid.target_candidates) == 6
    for t in grid.target_candidates:
        assert costs.cost(grid.drone_start, t) != UNREACHABLE


def test_ascii_round_trip():
    for family in ("SE", "LE", "CE", "BUILDING"):
        grid = make_environment(family)
        again = parse_map(grid.to_ascii())
        assert again.blocked == grid.blocked
        assert again.drone_start == grid.drone_start
        assert again.target_candidates == grid.target_candidates
        assert again.responder_start_candidates == grid.responder_start_candidates


def test_parse_map_rejects_bad_input():
    with pytest.raises(ValueError):
        parse_map("D.R\n..\nT..\n")  # ragged
    with pytest.raises(ValueError):
        parse_map("DDR\n...\nT..\n")  # two drones
    with pytest.raises(ValueError):
        parse_map("D?R\n...\nT..\n")  # unknown char
    with pytest.raises(ValueError):
        parse_map("D#R\n###\nT..\n")  # R/T cut off from D


def test_map_validation_rejects_duplicates():
    with pytest.raises(ValueError):
        GridMap(3, 3, [], Position(1, 1), [Position(0, 0), Position(0, 0)], [Position(2, 2)])
    with pytest.raises(ValueError):
        GridMap(3, 3, [], Position(1, 1), [Position(0, 0)], [])
