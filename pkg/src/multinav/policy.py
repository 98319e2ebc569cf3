"""Per-step decision making: update maps, localize goals, then either
navigate to the current goal or explore the nearest-known frontier.

Every step runs the full perception pipeline first (mapping, then goal
localization over all palette colors), so goals encountered while exploring
for an earlier goal are cached immediately. The current goal's channel being
non-empty switches the agent into goal navigation in the same step; the
Found action is only ever emitted inside the success radius minus a safety
margin, measured against the channel's mean-cell estimate.

Planning runs on a window of the occupancy map around the agent and target
(growing to the full map when a route needs it), with incremental repairs
fed from the cells each observation actually changed.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .frontier import find_frontiers, select_frontier
from .geometry import TAU, angle_diff, bearing_to
from .goals import (DetectorConfig, GoalMap, detect_goals, estimate_goal_position,
                    filter_components, project_goals)
from .gridops import inflation_radius_cells
from .mapping import (OCCUPIED, UNEXPLORED, OccupancyMap, ego_to_allo, fuse_into,
                      project_depth_to_ego)
from .planning import (PLAN_BLOCKED, PLAN_FREE, PLAN_UNKNOWN, DStarLite, PlanGrid,
                       dijkstra_nearest)
from .world import Action, CameraConfig, Observation, Pose


class Mode(Enum):
    EXPLORE = "explore"
    NAVIGATE_TO_GOAL = "navigate"


@dataclass
class PolicyConfig:
    map_size: int = 550
    ego_size: int = 550
    map_resolution: float = 0.1
    epsilon: float = 0.001
    delta: int = 50
    found_margin: float = 0.3
    unexplored_penalty: float = 2.0
    forward_step: float = 0.25
    turn_angle: float = math.radians(30.0)
    lookahead: int = 4
    refresh_period: int = 10
    loop_limit: int = 3
    snap_radius: int = 10
    crop_margin: int = 60
    arrive_cells: int = 3
    frontier_attempts: int = 8
    visit_coarse: float = 1.0      # meters per coverage-tracking cell
    waypoint_patience: int = 12    # steps before a committed waypoint expires
    escape_steps: int = 40         # forced-displacement window after repeat livelock


def path_to_action(pose: Pose, path: list[tuple[int, int]],
                   occupancy: OccupancyMap, turn_angle: float,
                   lookahead: int = 4) -> Action:
    """Steer toward the first waypoint at least `lookahead` cells ahead:
    move forward when the bearing error is within half a turn, else turn
    toward the waypoint. Single-cell paths are an arrival, not an action."""
    if len(path) < 2:
        raise ValueError("single-cell path is an arrival; caller handles it")
    idx = min(lookahead, len(path) - 1)
    wx, wy = occupancy.cell_center(*path[idx])
    beta = bearing_to(pose.x, pose.y, wx, wy)
    err = angle_diff(beta, pose.theta)
    if abs(err) <= turn_angle / 2.0:
        return Action.MOVE_FORWARD
    return Action.TURN_LEFT if err > 0.0 else Action.TURN_RIGHT


def should_call_found(pose: Pose, target_xy: tuple[float, float],
                      found_distance: float) -> bool:
    """True when the agent is within found_distance of the goal estimate."""
    return math.hypot(pose.x - target_xy[0], pose.y - target_xy[1]) <= found_distance


@dataclass
class _PlannerBundle:
    planner: DStarLite
    target: tuple[int, int]            # global map cell the plan routes to
    bbox: tuple[int, int, int, int]    # window of the map the grid covers
    full: bool                         # True when the grid spans the map


class AgentState:
    """Single-owner mutable state for one episode's agent."""

    def __init__(self, start: Pose, palette: np.ndarray,
                 goal_sequence: tuple[int, ...], cam: CameraConfig,
                 success_radius: float = 1.5, agent_radius: float = 0.1,
                 config: PolicyConfig | None = None):
        self.cfg = config if config is not None else PolicyConfig()
        self.cam = cam
        self.goal_sequence = goal_sequence
        self.agent_radius = agent_radius
        self.found_distance = max(success_radius - self.cfg.found_margin, 0.0)
        self.occupancy = OccupancyMap.create(
            self.cfg.map_size, self.cfg.map_resolution, center=(start.x, start.y))
        self.detector = DetectorConfig(epsilon=self.cfg.epsilon,
                                       delta=self.cfg.delta, palette=palette)
        self.goal_map = GoalMap.create(len(palette), self.occupancy)
        self.mode = Mode.EXPLORE
        self.current_goal_index = 0
        self.active_target: tuple[int, int] | None = None
        self.step_index = 0
        self.dropped_cells = 0
        self.last_collided = False
        self._collisions = 0
        self._bundle: _PlannerBundle | None = None
        self._pending: list[np.ndarray] = []     # occupancy cells changed
        self._bbox = None                        # explored-region bounds
        self._frontier_target: tuple[int, int] | None = None
        self._target_step = -10_000
        self._recovery: deque[Action] = deque()
        self._visited: dict[tuple[int, int], int] = {}
        self._loop_counts: dict = {}
        self._loop_mark = -1
        self._last_guard_fire = -10_000
        self._escape_until = -1
        self._waypoint: tuple[int, int] | None = None
        self._waypoint_step = -10_000
        self._fallback_cache: tuple | None = None
        self._radius_cells = inflation_radius_cells(
            agent_radius, self.cfg.map_resolution)

    @property
    def planner(self) -> DStarLite | None:
        return self._bundle.planner if self._bundle else None

    def current_color(self) -> int:
        return self.goal_sequence[min(self.current_goal_index,
                                      len(self.goal_sequence) - 1)]

    def note_outcome(self, collided: bool, goals_found: int) -> None:
        """Sync with the simulator after each step."""
        if goals_found != self.current_goal_index:
            self.current_goal_index = goals_found
            self._bundle = None                  # next goal, fresh target
            self.active_target = None
            self._waypoint = None
            self._recovery.clear()
        self.last_collided = collided
        self._collisions = self._collisions + 1 if collided else 0
        if collided:
            self._waypoint = None                # re-aim off the latest path
        if self._collisions >= 3:
            self._bundle = None
            self._start_spin()
            self._collisions = 0

    # -- perception --------------------------------------------------------

    def _update_maps(self, obs: Observation) -> None:
        ego = project_depth_to_ego(obs, self.cam, self.cfg.map_resolution,
                                   self.cfg.ego_size)
        overlay = ego_to_allo(ego, obs.pose, self.occupancy)
        self.dropped_cells += overlay.dropped
        changed = fuse_into(self.occupancy, overlay)
        if changed.size:
            self._pending.append(changed)
            m = self.occupancy.size
            rs, cs = changed // m, changed % m
            lo_r, hi_r = int(rs.min()), int(rs.max())
            lo_c, hi_c = int(cs.min()), int(cs.max())
            if self._bbox is None:
                self._bbox = [lo_r, hi_r, lo_c, hi_c]
            else:
                b = self._bbox
                b[0], b[1] = min(b[0], lo_r), max(b[1], hi_r)
                b[2], b[3] = min(b[2], lo_c), max(b[3], hi_c)
        masks = detect_goals(obs.rgb, self.detector)
        for i in range(len(masks)):
            if masks[i].any():
                masks[i] = filter_components(masks[i], self.detector.delta)
        project_goals(masks, obs.depth, obs.pose, self.cam, self.goal_map)

    def _mark_visited(self, pose: Pose) -> None:
        coarse = (int(pose.x // self.cfg.visit_coarse),
                  int(pose.y // self.cfg.visit_coarse))
        self._visited[coarse] = self.step_index

    # -- planning plumbing --------------------------------------------------

    def _sync_planner(self, agent_cell: tuple[int, int]) -> bool:
        """Feed pending occupancy deltas to the live planner; False when the
        planner must be rebuilt (agent cell blocked or left the window)."""
        bundle = self._bundle
        r0, _, c0, _ = bundle.bbox
        grid = bundle.planner.grid
        if self._pending:
            changed = np.unique(np.concatenate(self._pending))
            m = self.occupancy.size
            k = self._radius_cells
            rs, cs = changed // m, changed % m
            # Bounding box of everything the deltas can influence, clipped to
            # the planner window; re-derive plan states over that box in bulk.
            lo_r = max(int(rs.min()) - k, r0)
            hi_r = min(int(rs.max()) + k, bundle.bbox[1])
            lo_c = max(int(cs.min()) - k, c0)
            hi_c = min(int(cs.max()) + k, bundle.bbox[3])
            if lo_r <= hi_r and lo_c <= hi_c:
                sub = PlanGrid.from_occupancy(
                    self.occupancy, self.agent_radius,
                    self.cfg.unexplored_penalty,
                    bbox=(lo_r, hi_r, lo_c, hi_c)).states
                window = grid.states[lo_r - r0:hi_r - r0 + 1,
                                     lo_c - c0:hi_c - c0 + 1]
                diff_r, diff_c = np.nonzero(window != sub)
                skip = (agent_cell[0] - r0, agent_cell[1] - c0)  # stays pinned free
                changes = []
                for rr, cc in zip(diff_r, diff_c):
                    cell = (int(rr) + lo_r - r0, int(cc) + lo_c - c0)
                    if cell != skip:
                        changes.append((cell, int(window[rr, cc]), int(sub[rr, cc])))
                if changes:
                    bundle.planner.update_cells(changes)
        la = (agent_cell[0] - r0, agent_cell[1] - c0)
        if not grid.contains(*la) or grid.states[la] == PLAN_BLOCKED:
            return False
        bundle.planner.set_start(la)
        return True

    def _build_planner(self, agent_cell, target_cell, full: bool) -> _PlannerBundle:
        """Planner over a window around agent and target; `full` widens the
        window to the whole explored region plus margin, which is search-
        equivalent to the entire map: beyond the explored bounding box all
        cells are uniformly unknown, so any route outside the window has an
        equal-cost counterpart along the window's unknown margin ring."""
        m = self.occupancy.size
        margin = self.cfg.crop_margin
        anchors = [agent_cell, target_cell]
        if full and self._bbox is not None:
            anchors += [(self._bbox[0], self._bbox[2]),
                        (self._bbox[1], self._bbox[3])]
        r0 = min(a[0] for a in anchors) - margin
        r1 = max(a[0] for a in anchors) + margin
        c0 = min(a[1] for a in anchors) - margin
        c1 = max(a[1] for a in anchors) + margin
        bbox = (max(r0, 0), min(r1, m - 1), max(c0, 0), min(c1, m - 1))
        grid = PlanGrid.from_occupancy(
            self.occupancy, self.agent_radius, self.cfg.unexplored_penalty,
            force_free=(agent_cell,), bbox=bbox)
        local_start = (agent_cell[0] - bbox[0], agent_cell[1] - bbox[2])
        local_goal = (target_cell[0] - bbox[0], target_cell[1] - bbox[2])
        planner = DStarLite(grid, local_start, local_goal,
                            snap_radius=self.cfg.snap_radius)
        return _PlannerBundle(planner=planner, target=target_cell, bbox=bbox,
                              full=self._is_wide(bbox))

    def _is_wide(self, bbox) -> bool:
        """True while the window still covers the explored region plus a
        two-cell ring, keeping the window-equivalence argument valid."""
        if self._bbox is None:
            return True
        m = self.occupancy.size
        return (bbox[0] <= max(self._bbox[0] - 2, 0)
                and bbox[1] >= min(self._bbox[1] + 2, m - 1)
                and bbox[2] <= max(self._bbox[2] - 2, 0)
                and bbox[3] >= min(self._bbox[3] + 2, m - 1))

    def _plan_path(self, agent_cell, target_cell) -> list[tuple[int, int]] | None:
        """Path in global map cells, reusing the incremental planner while
        the target is stable; None when no route exists on the full map."""
        bundle = self._bundle
        reuse = (bundle is not None
                 and max(abs(bundle.target[0] - target_cell[0]),
                         abs(bundle.target[1] - target_cell[1])) <= 2)
        if reuse and self._sync_planner(agent_cell):
            self._pending.clear()
            path = bundle.planner.plan()
            if path is not None or (bundle.full and self._is_wide(bundle.bbox)):
                return self._translate(path, bundle)
            # Window exhausted; retry over the explored-wide window.
            bundle = self._build_planner(agent_cell, bundle.target, full=True)
            self._bundle = bundle
            return self._translate(bundle.planner.plan(), bundle)
        self._pending.clear()
        bundle = self._build_planner(agent_cell, target_cell, full=False)
        path = bundle.planner.plan()
        if path is None and not (bundle.full and self._is_wide(bundle.bbox)):
            bundle = self._build_planner(agent_cell, target_cell, full=True)
            path = bundle.planner.plan()
        self._bundle = bundle
        return self._translate(path, bundle)

    @staticmethod
    def _translate(path, bundle) -> list[tuple[int, int]] | None:
        if path is None:
            return None
        r0, _, c0, _ = bundle.bbox
        return [(r + r0, c + c0) for r, c in path]

    def _fallback_path(self, agent_cell, target_cell):
        """Approach the nearest reachable cell to an unreachable target.

        The exhaustive search is expensive, so its result is cached and
        re-served (trimmed to the agent's position) for a handful of steps;
        re-observation usually clears the blockage well within that window.
        """
        cached = self._fallback_cache
        if (cached is not None
                and cached[0] == target_cell
                and self.step_index - cached[2] <= self.cfg.waypoint_patience):
            path = cached[1]
            near = [i for i, cell in enumerate(path)
                    if max(abs(cell[0] - agent_cell[0]),
                           abs(cell[1] - agent_cell[1])) <= 1]
            if near:
                trimmed = path[near[-1]:]
                if len(trimmed) >= 2:
                    return trimmed
        # The exhaustive search runs on its own local window so it stays
        # bounded no matter how wide the live planner's window is.
        m = self.occupancy.size
        margin = self.cfg.crop_margin
        bbox = (max(min(agent_cell[0], target_cell[0]) - margin, 0),
                min(max(agent_cell[0], target_cell[0]) + margin, m - 1),
                max(min(agent_cell[1], target_cell[1]) - margin, 0),
                min(max(agent_cell[1], target_cell[1]) + margin, m - 1))
        grid = PlanGrid.from_occupancy(
            self.occupancy, self.agent_radius, self.cfg.unexplored_penalty,
            force_free=(agent_cell,), bbox=bbox)
        local = (agent_cell[0] - bbox[0], agent_cell[1] - bbox[2])
        goal = (target_cell[0] - bbox[0], target_cell[1] - bbox[2])
        path = dijkstra_nearest(grid, local, goal)
        if path is not None:
            path = [(r + bbox[0], c + bbox[2]) for r, c in path]
            self._fallback_cache = (target_cell, path, self.step_index)
        return path

    # -- behaviors ----------------------------------------------------------

    def _agent_cell(self, pose: Pose) -> tuple[int, int]:
        return self.occupancy.world_to_cell(pose.x, pose.y)

    def _start_spin(self) -> None:
        turns = int(round(TAU / self.cfg.turn_angle))
        self._recovery.extend([Action.TURN_LEFT] * turns)

    def _frontier_refresh_due(self, agent_cell) -> bool:
        t = self._frontier_target
        if t is None:
            return True
        if self.step_index - self._target_step >= self.cfg.refresh_period:
            return True
        if max(abs(agent_cell[0] - t[0]), abs(agent_cell[1] - t[1])) \
                <= self.cfg.arrive_cells:
            return True
        grid = self.occupancy.grid
        if grid[t] != 1:          # target no longer known-free
            return True
        return False

    def _frontier_bbox(self):
        if self._bbox is None:
            return None
        b = self._bbox
        return (b[0] - 1, b[1] + 1, b[2] - 1, b[3] + 1)

    def _explore_action(self, pose: Pose) -> Action | None:
        agent_cell = self._agent_cell(pose)
        if self._frontier_refresh_due(agent_cell):
            clusters = find_frontiers(self.occupancy, bbox=self._frontier_bbox())
            clusters.sort(key=lambda cl: (-cl.size, cl.representative))
            for cluster in clusters[:self.cfg.frontier_attempts]:
                rep = cluster.representative
                if max(abs(agent_cell[0] - rep[0]),
                       abs(agent_cell[1] - rep[1])) <= self.cfg.arrive_cells:
                    continue
                path = self._plan_path(agent_cell, rep)
                if path is not None and len(path) >= 2:
                    self._frontier_target = rep
                    self._target_step = self.step_index
                    self.active_target = rep
                    return self._steer(pose, path)
            self._frontier_target = None
            self.active_target = None
            return None
        path = self._plan_path(agent_cell, self._frontier_target)
        if path is None or len(path) < 2:
            self._frontier_target = None
            return None
        self.active_target = self._frontier_target
        return self._steer(pose, path)

    def _coverage_action(self, pose: Pose) -> Action | None:
        """Walk to the least-recently-visited known-free region."""
        agent_cell = self._agent_cell(pose)
        grid = self.occupancy.grid
        rs, cs = np.nonzero(grid == 1)
        if rs.size == 0:
            return None
        coarse = self.cfg.visit_coarse
        res = self.occupancy.resolution
        best_key, best_cell = None, None
        stride = max(1, rs.size // 4000)      # subsample for speed
        for r, c in zip(rs[::stride].tolist(), cs[::stride].tolist()):
            x, y = self.occupancy.cell_center(r, c)
            key = (self._visited.get((int(x // coarse), int(y // coarse)), -1),
                   r * grid.shape[1] + c)
            if best_key is None or key < best_key:
                best_key, best_cell = key, (r, c)
        if best_cell is None:
            return None
        path = self._plan_path(agent_cell, best_cell)
        if path is None or len(path) < 2:
            return None
        self.active_target = best_cell
        return self._steer(pose, path)

    def _steer(self, pose: Pose, path) -> Action:
        """Steer along the path with waypoint commitment: keep walking to the
        previously chosen waypoint until it is reached, expires, or turns out
        occupied. This damps oscillation when the replanned path's shape
        flutters under freshly fused observations."""
        wp = self._waypoint
        if wp is not None:
            wx, wy = self.occupancy.cell_center(*wp)
            if (math.hypot(pose.x - wx, pose.y - wy) <= self.cfg.forward_step
                    or self.step_index - self._waypoint_step > self.cfg.waypoint_patience
                    or self.occupancy.grid[wp] == OCCUPIED):
                wp = None
        if wp is None:
            lookahead = 1 if self.last_collided else self.cfg.lookahead
            wp = path[min(lookahead, len(path) - 1)]
            self._waypoint = wp
            self._waypoint_step = self.step_index
        wx, wy = self.occupancy.cell_center(*wp)
        err = angle_diff(bearing_to(pose.x, pose.y, wx, wy), pose.theta)
        if abs(err) <= self.cfg.turn_angle / 2.0:
            return Action.MOVE_FORWARD
        return Action.TURN_LEFT if err > 0.0 else Action.TURN_RIGHT

    def _livelock_guard(self, pose: Pose, action: Action) -> Action:
        explored = self.occupancy.explored_count()
        if explored != self._loop_mark:
            self._loop_mark = explored
            self._loop_counts.clear()
        key = (round(pose.x * 100), round(pose.y * 100),
               round(pose.theta * 1000), self.mode.value, self.active_target)
        n = self._loop_counts.get(key, 0) + 1
        self._loop_counts[key] = n
        if n > self.cfg.loop_limit:
            self._loop_counts.clear()
            self._bundle = None
            self._frontier_target = None
            self._waypoint = None
            if self.step_index - self._last_guard_fire < 3 * self.cfg.escape_steps:
                # A spin alone did not unstick us; force displacement by
                # suppressing goal navigation for a window of steps.
                self._escape_until = self.step_index + self.cfg.escape_steps
            self._last_guard_fire = self.step_index
            self._start_spin()
            return self._recovery.popleft()
        return action


def decide(state: AgentState, obs: Observation) -> Action:
    """One full policy step; mutates the agent state and returns the action."""
    state.step_index += 1
    state._update_maps(obs)
    state._mark_visited(obs.pose)

    est = estimate_goal_position(state.goal_map, state.current_color())
    state.mode = Mode.NAVIGATE_TO_GOAL if est is not None else Mode.EXPLORE

    if est is not None:
        state.active_target = est
        target_xy = state.goal_map.cell_center(*est)
        if should_call_found(obs.pose, target_xy, state.found_distance):
            return Action.FOUND

    if state._recovery:
        return state._recovery.popleft()

    if est is not None and state.step_index >= state._escape_until:
        agent_cell = state._agent_cell(obs.pose)
        path = state._plan_path(agent_cell, est)
        if path is None:
            path = state._fallback_path(agent_cell, est)
        if path is not None and len(path) >= 2:
            return state._livelock_guard(obs.pose, state._steer(obs.pose, path))
        # Estimate kept but unreachable for now; explore to open a route.

    action = state._explore_action(obs.pose)
    if action is not None:
        return state._livelock_guard(obs.pose, action)

    action = state._coverage_action(obs.pose)
    if action is not None:
        return state._livelock_guard(obs.pose, action)

    state._start_spin()
    return state._recovery.popleft()
