"""Incremental shortest-path planning on the evolving occupancy map.

The planner is the D* Lite formulation of incremental heuristic search: it
keeps a cost-to-goal estimate g and a one-step lookahead rhs per cell plus a
priority queue keyed lexicographically, and repairs only the affected region
when cells change or the start moves. After every repair the extracted path
cost equals the optimal static shortest-path cost on the current grid.

Cost model (shared with the geodesic metric): 8-connected moves, straight
steps cost 1 and diagonals sqrt(2), scaled by the destination cell's
multiplier: free cells 1, unexplored cells a configurable penalty >= 1,
blocked cells impassable. Diagonal moves additionally require both adjacent
orthogonal cells to be unblocked so paths never cut corners. Ties everywhere
break on the smaller row-major index for reproducibility.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .gridops import inflate, inflation_radius_cells, snap_to_traversable
from .mapping import OCCUPIED, UNEXPLORED, OccupancyMap

PLAN_FREE = 0
PLAN_UNKNOWN = 1
PLAN_BLOCKED = 2

INF = math.inf
SQRT2 = math.sqrt(2.0)
_SQRT2_M1 = SQRT2 - 1.0
# Keys that are mathematically equal can differ by a few ulp because g values
# and heuristic sums round differently; processing within this slack keeps the
# repair loop from terminating one expansion early. Far below any real cost
# difference on the 1/sqrt(2) cost lattice, far above accumulated noise.
_KEY_EPS = 1e-6

# Fixed row-major neighbor order: (dr, dc, base step cost).
_NEIGHBORS = (
    (-1, -1, SQRT2), (-1, 0, 1.0), (-1, 1, SQRT2),
    (0, -1, 1.0), (0, 1, 1.0),
    (1, -1, SQRT2), (1, 0, 1.0), (1, 1, SQRT2),
)


@dataclass(eq=False)
class PlanGrid:
    """Traversability grid derived from an OccupancyMap (or built directly)."""
    states: np.ndarray                    # (rows, cols) uint8 of PLAN_* codes
    unknown_penalty: float = 2.0
    offset: tuple[int, int] = (0, 0)      # position within the parent map

    def __post_init__(self):
        self.states = np.ascontiguousarray(self.states, dtype=np.uint8)
        if self.unknown_penalty < 1.0:
            raise ValueError("unknown_penalty must be at least 1")

    @classmethod
    def from_occupancy(cls, occ: OccupancyMap, agent_radius: float,
                       unknown_penalty: float = 2.0,
                       force_free: tuple = (),
                       bbox: tuple[int, int, int, int] | None = None
                       ) -> "PlanGrid":
        """Derive traversability: occupied cells inflated by the agent radius
        are blocked, unexplored cells are passable at a penalty.

        bbox (r0, r1, c0, c1) restricts the grid to a window of the map;
        inflation is computed on a grown slice so window edges stay exact.
        force_free lists map cells (e.g. the agent's) pinned traversable.
        """
        radius = inflation_radius_cells(agent_radius, occ.resolution)
        m = occ.size
        if bbox is None:
            r0, r1, c0, c1 = 0, m - 1, 0, m - 1
        else:
            r0, r1, c0, c1 = bbox
            r0, c0 = max(r0, 0), max(c0, 0)
            r1, c1 = min(r1, m - 1), min(c1, m - 1)
        gr0, gc0 = max(r0 - radius, 0), max(c0 - radius, 0)
        gr1, gc1 = min(r1 + radius, m - 1), min(c1 + radius, m - 1)
        sub = occ.grid[gr0:gr1 + 1, gc0:gc1 + 1]
        blocked = inflate(sub == OCCUPIED, radius)
        tr, tc = r0 - gr0, c0 - gc0
        blocked = blocked[tr:tr + (r1 - r0 + 1), tc:tc + (c1 - c0 + 1)]
        window = occ.grid[r0:r1 + 1, c0:c1 + 1]
        states = np.where(blocked, PLAN_BLOCKED,
                          np.where(window == UNEXPLORED, PLAN_UNKNOWN,
                                   PLAN_FREE)).astype(np.uint8)
        for fr, fc in force_free:
            lr, lc = fr - r0, fc - c0
            if 0 <= lr < states.shape[0] and 0 <= lc < states.shape[1]:
                states[lr, lc] = PLAN_FREE
        return cls(states=states, unknown_penalty=unknown_penalty,
                   offset=(r0, c0))

    @property
    def rows(self) -> int:
        return self.states.shape[0]

    @property
    def cols(self) -> int:
        return self.states.shape[1]

    def contains(self, r: int, c: int) -> bool:
        return 0 <= r < self.rows and 0 <= c < self.cols

    def multiplier(self, state: int) -> float:
        if state == PLAN_FREE:
            return 1.0
        if state == PLAN_UNKNOWN:
            return self.unknown_penalty
        return INF

    def multipliers(self) -> list[float]:
        lut = [1.0, self.unknown_penalty, INF]
        return [lut[s] for s in self.states.ravel().tolist()]

    def snap(self, cell: tuple[int, int], radius: int) -> tuple[int, int] | None:
        """Nearest traversable cell within radius, or None."""
        return snap_to_traversable(self.states != PLAN_BLOCKED, cell, radius)

    def step_cost(self, a: tuple[int, int], b: tuple[int, int]) -> float:
        """Cost of the single move a -> b (inf when illegal)."""
        dr, dc = b[0] - a[0], b[1] - a[1]
        if max(abs(dr), abs(dc)) != 1:
            return INF
        if not (self.contains(*a) and self.contains(*b)):
            return INF
        ma = self.multiplier(self.states[a])
        mb = self.multiplier(self.states[b])
        if not math.isfinite(ma) or not math.isfinite(mb):
            return INF
        if dr != 0 and dc != 0:
            if (self.states[a[0], b[1]] == PLAN_BLOCKED
                    or self.states[b[0], a[1]] == PLAN_BLOCKED):
                return INF
            return SQRT2 * mb
        return 1.0 * mb

    def path_cost(self, path: list[tuple[int, int]]) -> float:
        total = 0.0
        for a, b in zip(path, path[1:]):
            c = self.step_cost(a, b)
            if not math.isfinite(c):
                return INF
            total += c
        return total


class InconsistentUpdateError(RuntimeError):
    """Reported old cell state did not match the planner's grid."""


class DStarLite:
    """Single-owner incremental planner; one instance per (grid, goal)."""

    def __init__(self, grid: PlanGrid, start: tuple[int, int],
                 goal: tuple[int, int], snap_radius: int = 10):
        self.grid = grid
        self._rows, self._cols = grid.rows, grid.cols
        self._n = self._rows * self._cols
        self._mult = grid.multipliers()
        if not grid.contains(*start):
            raise ValueError("start outside the plan grid")
        self.start = start[0] * self._cols + start[1]
        if not math.isfinite(self._mult[self.start]):
            raise ValueError("start cell is not traversable")
        snapped = grid.snap(goal, snap_radius)
        self.goal: int | None = (snapped[0] * self._cols + snapped[1]
                                 if snapped is not None else None)
        self._g = [INF] * self._n
        self._rhs = [INF] * self._n
        self._heap: list[tuple[tuple[float, float], int]] = []
        self._key_of: dict[int, tuple[float, float]] = {}
        self._km = 0.0
        if self.goal is not None:
            self._rhs[self.goal] = 0.0
            self._push(self.goal)

    # -- internals ---------------------------------------------------------

    def _h(self, s: int) -> float:
        # Octile distance to the start: admissible because every edge costs
        # at least its base step.
        dr = abs(s // self._cols - self.start // self._cols)
        dc = abs(s % self._cols - self.start % self._cols)
        return (dr + _SQRT2_M1 * dc) if dr > dc else (dc + _SQRT2_M1 * dr)

    def _key(self, s: int) -> tuple[float, float]:
        m = min(self._g[s], self._rhs[s])
        return (m + self._h(s) + self._km, m)

    def _push(self, s: int) -> None:
        k = self._key(s)
        self._key_of[s] = k
        heapq.heappush(self._heap, (k, s))

    def _succ_costs(self, u: int):
        """Yield (v, cost) over traversable successor moves of u."""
        mult = self._mult
        if not math.isfinite(mult[u]):
            return
        cols = self._cols
        r, c = divmod(u, cols)
        last_r, last_c = self._rows - 1, cols - 1
        for dr, dc, base in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if rr < 0 or rr > last_r or cc < 0 or cc > last_c:
                continue
            v = rr * cols + cc
            mv = mult[v]
            if not math.isfinite(mv):
                continue
            if dr != 0 and dc != 0:
                if not (math.isfinite(mult[u + dc])
                        and math.isfinite(mult[u + dr * cols])):
                    continue
            yield v, base * mv

    def _preds(self, u: int):
        """Cells with a finite-cost edge into u (same geometry as succs)."""
        mult = self._mult
        if not math.isfinite(mult[u]):
            return
        cols = self._cols
        r, c = divmod(u, cols)
        last_r, last_c = self._rows - 1, cols - 1
        for dr, dc, _ in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if rr < 0 or rr > last_r or cc < 0 or cc > last_c:
                continue
            w = rr * cols + cc
            if not math.isfinite(mult[w]):
                continue
            if dr != 0 and dc != 0:
                if not (math.isfinite(mult[u + dc])
                        and math.isfinite(mult[u + dr * cols])):
                    continue
            yield w

    def _update_vertex(self, u: int) -> None:
        if u != self.goal:
            # Inlined rhs recompute over successors; this is the planner's
            # hottest loop, so it avoids the generator and works on locals.
            mult = self._mult
            g = self._g
            best = INF
            if mult[u] != INF:
                cols = self._cols
                r, c = divmod(u, cols)
                last_r, last_c = self._rows - 1, cols - 1
                for dr, dc, base in _NEIGHBORS:
                    rr = r + dr
                    cc = c + dc
                    if rr < 0 or rr > last_r or cc < 0 or cc > last_c:
                        continue
                    v = u + dr * cols + dc
                    gv = g[v]
                    if gv == INF:       # candidate cost is infinite either way
                        continue
                    mv = mult[v]
                    if mv == INF:
                        continue
                    if dr != 0 and dc != 0 and (mult[u + dc] == INF
                                                or mult[u + dr * cols] == INF):
                        continue
                    cand = base * mv + gv
                    if cand < best:
                        best = cand
            self._rhs[u] = best
        if self._g[u] != self._rhs[u]:
            self._push(u)
        else:
            self._key_of.pop(u, None)

    def _compute(self) -> None:
        heap, key_of = self._heap, self._key_of
        g, rhs = self._g, self._rhs
        guard = 64 * self._n + 10_000
        while True:
            while heap and key_of.get(heap[0][1]) != heap[0][0]:
                heapq.heappop(heap)
            if not heap:
                break
            top_key = heap[0][0]
            start_key = self._key(self.start)
            slack = (start_key[0] + _KEY_EPS, start_key[1] + _KEY_EPS)
            if not (top_key < slack or rhs[self.start] != g[self.start]):
                break
            guard -= 1
            if guard <= 0:
                raise RuntimeError("planner repair failed to converge")
            k_old, u = heapq.heappop(heap)
            del key_of[u]
            k_new = self._key(u)
            if k_old < k_new:
                self._push(u)
            elif g[u] > rhs[u]:
                g[u] = rhs[u]
                for p in self._preds(u):
                    self._update_vertex(p)
            else:
                g[u] = INF
                self._update_vertex(u)
                for p in self._preds(u):
                    self._update_vertex(p)

    def _full_reset(self) -> None:
        self._g = [INF] * self._n
        self._rhs = [INF] * self._n
        self._heap.clear()
        self._key_of.clear()
        self._km = 0.0
        if self.goal is not None:
            self._rhs[self.goal] = 0.0
            self._push(self.goal)

    # -- public API ----------------------------------------------------------

    @property
    def start_cell(self) -> tuple[int, int]:
        return divmod(self.start, self._cols)

    @property
    def goal_cell(self) -> tuple[int, int] | None:
        return divmod(self.goal, self._cols) if self.goal is not None else None

    def set_start(self, cell: tuple[int, int]) -> None:
        """Move the search root; keys stay valid via the km offset."""
        if not self.grid.contains(*cell):
            raise ValueError("start outside the plan grid")
        flat = cell[0] * self._cols + cell[1]
        if flat == self.start:
            return
        old = self.start
        self.start = flat
        dr = abs(flat // self._cols - old // self._cols)
        dc = abs(flat % self._cols - old % self._cols)
        self._km += (dr + _SQRT2_M1 * dc) if dr > dc else (dc + _SQRT2_M1 * dr)

    def update_cells(self, changes) -> None:
        """Apply (cell, old_state, new_state) deltas and repair lazily.

        A mismatched old_state falls back to a full reinitialization, which
        preserves correctness at the cost of one fresh search.
        """
        states = self.grid.states
        consistent = all(states[r, c] == old for (r, c), old, _ in changes)
        for (r, c), _, new in changes:
            states[r, c] = new
            self._mult[r * self._cols + c] = self.grid.multiplier(new)
        if not consistent:
            self._full_reset()
            return
        touched = set()
        for (r, c), old, new in changes:
            if old == new:
                continue
            u = r * self._cols + c
            touched.add(u)
            rr, cc = divmod(u, self._cols)
            for dr, dc, _ in _NEIGHBORS:
                nr, nc = rr + dr, cc + dc
                if 0 <= nr < self._rows and 0 <= nc < self._cols:
                    touched.add(nr * self._cols + nc)
        for u in sorted(touched):
            if u != self.goal:
                self._update_vertex(u)

    def plan(self) -> list[tuple[int, int]] | None:
        """Optimal start-to-goal path on the current grid, or None (NoPath)."""
        if self.goal is None:
            return None
        if not math.isfinite(self._mult[self.start]):
            raise ValueError("start cell is not traversable")
        self._compute()
        if not math.isfinite(self._g[self.start]):
            return None
        path = [self.start]
        u = self.start
        g = self._g
        while u != self.goal:
            best_v, best_val = -1, INF
            for v, cost in self._succ_costs(u):
                cand = cost + g[v]
                if cand < best_val:
                    best_val, best_v = cand, v
            if best_v < 0 or not math.isfinite(best_val):
                return None
            u = best_v
            path.append(u)
            if len(path) > self._n:
                raise RuntimeError("path extraction cycled")
        cols = self._cols
        return [(p // cols, p % cols) for p in path]


def dijkstra_nearest(grid: PlanGrid, start: tuple[int, int],
                     target: tuple[int, int]) -> list[tuple[int, int]] | None:
    """Exhaustive search from start; path to the reachable cell closest to
    target by squared Euclidean cell distance (ties on row-major index).

    Fallback used when no full path to a target region exists yet.
    """
    rows, cols = grid.rows, grid.cols
    n = rows * cols
    mult = grid.multipliers()
    s = start[0] * cols + start[1]
    if mult[s] == INF:
        return None
    dist = [INF] * n
    parent = [-1] * n
    dist[s] = 0.0
    heap = [(0.0, s)]
    last_r, last_c = rows - 1, cols - 1
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        r, c = divmod(u, cols)
        for dr, dc, base in _NEIGHBORS:
            rr = r + dr
            cc = c + dc
            if rr < 0 or rr > last_r or cc < 0 or cc > last_c:
                continue
            v = u + dr * cols + dc
            mv = mult[v]
            if mv == INF:
                continue
            if dr != 0 and dc != 0 and (mult[u + dc] == INF
                                        or mult[u + dr * cols] == INF):
                continue
            nd = d + base * mv
            if nd < dist[v]:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
    tr, tc = target
    best, best_key = -1, None
    for u in range(n):
        if dist[u] != INF:
            r, c = divmod(u, cols)
            key = ((r - tr) ** 2 + (c - tc) ** 2, u)
            if best_key is None or key < best_key:
                best, best_key = u, key
    if best < 0:
        return None
    path = [best]
    while path[-1] != s:
        path.append(parent[path[-1]])
    path.reverse()
    return [(p // cols, p % cols) for p in path]
