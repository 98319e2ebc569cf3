from __future__ import annotations

import math

import numpy as np
import pytest

from multinav.mapping import OccupancyMap, FREE_SPACE, OCCUPIED, UNEXPLORED
from multinav.planning import (PLAN_BLOCKED, PLAN_FREE, PLAN_UNKNOWN, DStarLite,
                               PlanGrid, dijkstra_nearest)
from oracles import dijkstra_grid_cost


def _grid(states):
    return PlanGrid(states=np.array(states, dtype=np.uint8))


def _random_states(rng, shape, p_block, p_unknown=0.0):
    u = rng.random(shape)
    states = np.full(shape, PLAN_FREE, dtype=np.uint8)
    states[u < p_block] = PLAN_BLOCKED
    states[(u >= p_block) & (u < p_block + p_unknown)] = PLAN_UNKNOWN
    return states


def test_start_equals_goal():
    grid = _grid(np.zeros((5, 5)))
    p = DStarLite(grid, (2, 2), (2, 2))
    assert p.plan() == [(2, 2)]
    assert grid.path_cost(p.plan()) == 0.0


def test_straight_line_cost():
    grid = _grid(np.zeros((10, 10)))
    p = DStarLite(grid, (0, 0), (0, 9))
    path = p.plan()
    assert path[0] == (0, 0) and path[-1] == (0, 9)
    assert grid.path_cost(path) == pytest.approx(9.0, abs=1e-12)


def test_goal_snapping_and_nopath():
    states = np.zeros((9, 9), dtype=np.uint8)
    states[4:7, 4:7] = PLAN_BLOCKED
    grid = PlanGrid(states)
    p = DStarLite(grid, (0, 0), (5, 5), snap_radius=4)
    path = p.plan()
    assert path is not None
    assert p.goal_cell is not None
    assert grid.states[path[-1]] != PLAN_BLOCKED
    # Snap radius too small: NoPath.
    p2 = DStarLite(PlanGrid(states.copy()), (0, 0), (5, 5), snap_radius=0)
    assert p2.plan() is None


def test_start_not_traversable_raises():
    states = np.zeros((5, 5), dtype=np.uint8)
    states[1, 1] = PLAN_BLOCKED
    with pytest.raises(ValueError):
        DStarLite(PlanGrid(states), (1, 1), (4, 4))


def test_matches_dijkstra_on_random_grids():
    rng = np.random.default_rng(40)
    for trial in range(60):
        states = _random_states(rng, (30, 30), 0.3)
        states[0, 0] = states[29, 29] = PLAN_FREE
        planner = DStarLite(PlanGrid(states.copy()), (0, 0), (29, 29),
                            snap_radius=0)
        path = planner.plan()
        oracle = dijkstra_grid_cost(states, (0, 0), (29, 29))
        if path is None:
            assert math.isinf(oracle), trial
        else:
            cost = planner.grid.path_cost(path)
            assert cost == pytest.approx(oracle, abs=1e-9), trial


def test_matches_dijkstra_with_unknown_penalty():
    rng = np.random.default_rng(41)
    for trial in range(30):
        states = _random_states(rng, (25, 25), 0.2, 0.3)
        states[0, 0] = states[24, 24] = PLAN_FREE
        grid = PlanGrid(states.copy(), unknown_penalty=2.0)
        planner = DStarLite(grid, (0, 0), (24, 24), snap_radius=0)
        path = planner.plan()
        oracle = dijkstra_grid_cost(states, (0, 0), (24, 24), unknown_penalty=2.0)
        if path is None:
            assert math.isinf(oracle)
        else:
            assert grid.path_cost(path) == pytest.approx(oracle, abs=1e-9)


def test_update_cells_noop_keeps_path():
    rng = np.random.default_rng(42)
    states = _random_states(rng, (20, 20), 0.2)
    states[0, 0] = states[19, 19] = PLAN_FREE
    planner = DStarLite(PlanGrid(states.copy()), (0, 0), (19, 19), snap_radius=0)
    before = planner.plan()
    planner.update_cells([])
    assert planner.plan() == before


def test_update_cells_irrelevant_edit_keeps_cost():
    states = np.zeros((12, 12), dtype=np.uint8)
    planner = DStarLite(PlanGrid(states.copy()), (0, 0), (0, 11), snap_radius=0)
    base = planner.grid.path_cost(planner.plan())
    # Block a far-away cell that the straight path never touches.
    planner.update_cells([((11, 5), PLAN_FREE, PLAN_BLOCKED)])
    assert planner.grid.path_cost(planner.plan()) == pytest.approx(base, abs=1e-12)


def test_update_cells_blocking_path_matches_fresh_dijkstra():
    rng = np.random.default_rng(43)
    for trial in range(25):
        states = _random_states(rng, (20, 20), 0.15)
        states[0, 0] = states[19, 19] = PLAN_FREE
        planner = DStarLite(PlanGrid(states.copy()), (0, 0), (19, 19),
                            snap_radius=0)
        path = planner.plan()
        if path is None or len(path) < 3:
            continue
        victim = path[len(path) // 2]
        planner.update_cells([(victim, int(planner.grid.states[victim]),
                               PLAN_BLOCKED)])
        new_path = planner.plan()
        oracle = dijkstra_grid_cost(planner.grid.states, (0, 0), (19, 19))
        if new_path is None:
            assert math.isinf(oracle)
        else:
            assert planner.grid.path_cost(new_path) == pytest.approx(oracle,
                                                                     abs=1e-9)


def test_inconsistent_old_state_falls_back_to_full_replan():
    states = np.zeros((10, 10), dtype=np.uint8)
    planner = DStarLite(PlanGrid(states.copy()), (0, 0), (9, 9), snap_radius=0)
    planner.plan()
    # Report a bogus old state; planner must stay correct via full reset.
    planner.update_cells([((5, 5), PLAN_BLOCKED, PLAN_BLOCKED + 0)])
    path = planner.plan()
    oracle = dijkstra_grid_cost(planner.grid.states, (0, 0), (9, 9))
    assert planner.grid.path_cost(path) == pytest.approx(oracle, abs=1e-9)


def test_interleaved_updates_and_moving_start():
    rng = np.random.default_rng(44)
    states = _random_states(rng, (25, 25), 0.2)
    start, goal = (0, 0), (24, 24)
    states[start] = states[goal] = PLAN_FREE
    planner = DStarLite(PlanGrid(states.copy()), start, goal, snap_radius=0)
    cur = start
    for _ in range(40):
        path = planner.plan()
        oracle = dijkstra_grid_cost(planner.grid.states, cur, goal)
        if path is None:
            assert math.isinf(oracle)
            break
        assert planner.grid.path_cost(path) == pytest.approx(oracle, abs=1e-9)
        if len(path) < 2:
            break
        cur = path[1]
        planner.set_start(cur)
        r, c = int(rng.integers(25)), int(rng.integers(25))
        if (r, c) not in (cur, goal):
            old = int(planner.grid.states[r, c])
            new = int(rng.integers(3))
            planner.update_cells([((r, c), old, new)])


def test_paths_respect_inflation_clearance():
    # Geometric safety: no returned path point within agent_radius of an
    # occupied cell rectangle.
    rng = np.random.default_rng(45)
    res, radius = 0.1, 0.1
    for _ in range(10):
        occ = OccupancyMap.create(40, res, center=(2.0, 2.0))
        occ.grid[:] = FREE_SPACE
        blocked = rng.random((40, 40)) < 0.1
        occ.grid[blocked] = OCCUPIED
        grid = PlanGrid.from_occupancy(occ, agent_radius=radius)
        free = np.argwhere(grid.states == PLAN_FREE)
        if len(free) < 2:
            continue
        start = tuple(free[0])
        goal = tuple(free[-1])
        planner = DStarLite(grid, start, goal, snap_radius=0)
        path = planner.plan()
        if path is None:
            continue
        occ_cells = np.argwhere(occ.grid == OCCUPIED)
        for (r, c) in path:
            px, py = (c + 0.5) * res, (r + 0.5) * res
            for (orr, occ_c) in occ_cells:
                nx = min(max(px, occ_c * res), (occ_c + 1) * res)
                ny = min(max(py, orr * res), (orr + 1) * res)
                assert math.hypot(px - nx, py - ny) > radius


def test_plan_grid_from_occupancy_inflation():
    occ = OccupancyMap.create(11, 0.1, center=(0.55, 0.55))
    occ.grid[:] = FREE_SPACE
    occ.grid[5, 5] = OCCUPIED
    grid = PlanGrid.from_occupancy(occ, agent_radius=0.1)
    blocked = np.argwhere(grid.states == PLAN_BLOCKED)
    assert {(r, c) for r, c in blocked} == {
        (r, c) for r in range(4, 7) for c in range(4, 7)}
    occ.grid[0, 0] = UNEXPLORED
    grid2 = PlanGrid.from_occupancy(occ, agent_radius=0.1)
    assert grid2.states[0, 0] == PLAN_UNKNOWN


def test_dijkstra_nearest_reaches_closest_reachable():
    states = np.zeros((10, 10), dtype=np.uint8)
    states[:, 5] = PLAN_BLOCKED        # wall splits the grid
    grid = PlanGrid(states)
    path = dijkstra_nearest(grid, (0, 0), (9, 9))
    assert path is not None
    assert path[0] == (0, 0)
    assert path[-1][1] == 4            # right up against the wall
