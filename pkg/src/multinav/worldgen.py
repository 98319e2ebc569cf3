"""Procedural episode generation: seeded room-and-door layouts plus start and
goal placement with geodesic separation guarantees.

Layouts come from recursive division: a region splits along its longer axis
with a one-cell wall carrying a door gap, recursing while a density draw
keeps passing, so density 0 yields a single open room and density 1 divides
every room down to the minimum size. Walls only butt against wall cells, so
doors never get blocked and the free space stays connected.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .geometry import TAU
from .gridops import (default_snap_radius, distance_field, snap_to_traversable,
                      traversable_mask)
from .world import CYLINDER_BASE, FREE, PALETTE, WALL, EpisodeSpec, Pose, WorldGrid


class GenerationError(RuntimeError):
    """Episode generation could not satisfy the placement constraints."""


@dataclass
class WorldParams:
    size: float = 40.0            # meters per side
    resolution: float = 0.1
    density: float = 0.4          # chance of subdividing each divisible room
    min_sep: float = 10.0         # pairwise geodesic separation in meters
    goals: int = 3                # goals per episode (k)
    palette_size: int = 8         # colors available for sampling (n)
    cylinder_radius: float = 0.15
    cylinder_height: float = 1.5
    agent_radius: float = 0.1
    agent_height: float = 1.5
    max_steps: int = 2500
    success_radius: float = 1.5
    min_room: float = 5.0         # meters
    door_width: float = 1.4       # meters

    def __post_init__(self):
        if not 1 <= self.goals <= self.palette_size <= len(PALETTE):
            raise ValueError("need 1 <= goals <= palette_size <= 8")
        if self.size < 4 * self.resolution:
            raise ValueError("world too small")
        if not 0.0 <= self.density <= 1.0:
            raise ValueError("density must be in [0, 1]")


def _footprint_offsets(radius: float, resolution: float) -> list[tuple[int, int]]:
    """Cell offsets whose rectangle a circle of the given radius touches."""
    m = int(math.ceil(radius / resolution)) + 1
    offsets = []
    for dr in range(-m, m + 1):
        for dc in range(-m, m + 1):
            # Nearest point of the offset cell's rectangle to the center point.
            nx = max(abs(dc) - 0.5, 0.0) * resolution
            ny = max(abs(dr) - 0.5, 0.0) * resolution
            if math.hypot(nx, ny) <= radius:
                offsets.append((dr, dc))
    return offsets


def _footprint_structure(offsets: list[tuple[int, int]]) -> np.ndarray:
    m = max(max(abs(r), abs(c)) for r, c in offsets)
    s = np.zeros((2 * m + 1, 2 * m + 1), dtype=bool)
    for r, c in offsets:
        s[r + m, c + m] = True
    return s


def _divide(cells: np.ndarray, rng: np.random.Generator,
            r0: int, c0: int, r1: int, c1: int,
            density: float, min_room: int, door: int) -> None:
    h, w = r1 - r0 + 1, c1 - c0 + 1
    if max(h, w) < 2 * min_room + 1 or min(h, w) < door:
        return
    if rng.random() >= density:
        return
    split_cols = w > h or (w == h and rng.random() < 0.5)
    if split_cols:
        candidates = [c for c in range(c0 + min_room, c1 - min_room + 1)
                      if cells[r0 - 1, c] == WALL and cells[r1 + 1, c] == WALL]
        if not candidates:
            return
        s = candidates[int(rng.integers(len(candidates)))]
        d0 = r0 + int(rng.integers(h - door + 1))
        cells[r0:r1 + 1, s] = WALL
        cells[d0:d0 + door, s] = FREE
        _divide(cells, rng, r0, c0, r1, s - 1, density, min_room, door)
        _divide(cells, rng, r0, s + 1, r1, c1, density, min_room, door)
    else:
        candidates = [r for r in range(r0 + min_room, r1 - min_room + 1)
                      if cells[r, c0 - 1] == WALL and cells[r, c1 + 1] == WALL]
        if not candidates:
            return
        s = candidates[int(rng.integers(len(candidates)))]
        d0 = c0 + int(rng.integers(w - door + 1))
        cells[s, c0:c1 + 1] = WALL
        cells[s, d0:d0 + door] = FREE
        _divide(cells, rng, r0, c0, s - 1, c1, density, min_room, door)
        _divide(cells, rng, s + 1, c0, r1, c1, density, min_room, door)


def _layout(rng: np.random.Generator, params: WorldParams) -> np.ndarray:
    n = int(round(params.size / params.resolution))
    cells = np.full((n, n), FREE, dtype=np.uint8)
    cells[0, :] = cells[-1, :] = WALL
    cells[:, 0] = cells[:, -1] = WALL
    min_room = max(2, int(round(params.min_room / params.resolution)))
    door = max(3, int(round(params.door_width / params.resolution)))
    _divide(cells, rng, 1, 1, n - 2, n - 2, params.density, min_room, door)
    return cells


def _sample_cell(rng: np.random.Generator, eligible: np.ndarray) -> tuple[int, int] | None:
    flat = np.flatnonzero(eligible)
    if flat.size == 0:
        return None
    pick = int(flat[int(rng.integers(flat.size))])
    return pick // eligible.shape[1], pick % eligible.shape[1]


def generate_episode(seed: int, params: WorldParams | None = None) -> EpisodeSpec:
    """Deterministically build a world plus start/goals for the given seed."""
    params = params if params is not None else WorldParams()
    rng = np.random.default_rng(seed)
    res = params.resolution
    offsets = _footprint_offsets(params.cylinder_radius, res)
    structure = _footprint_structure(offsets)

    for _layout_attempt in range(10):
        cells = _layout(rng, params)
        base = WorldGrid(cells.copy(), res,
                         cylinder_radius=params.cylinder_radius,
                         cylinder_height=params.cylinder_height,
                         agent_height=params.agent_height,
                         agent_radius=params.agent_radius)
        trav = traversable_mask(base)
        foot_ok = ~binary_dilation(cells != FREE, structure=structure)

        for _place_attempt in range(20):
            spots: list[tuple[int, int]] = []
            fields: list[np.ndarray] = []
            start = _sample_cell(rng, trav)
            if start is None:
                break
            spots.append(start)
            fields.append(distance_field(trav, res, start))
            ok = True
            for _ in range(params.goals):
                eligible = trav & foot_ok
                for f in fields:
                    eligible &= f >= params.min_sep
                spot = _sample_cell(rng, eligible)
                if spot is None:
                    ok = False
                    break
                spots.append(spot)
                fields.append(distance_field(trav, res, spot))
            if not ok:
                continue

            colors = [int(c) for c in
                      rng.choice(params.palette_size, size=params.goals,
                                 replace=False)]
            carved = cells.copy()
            for (gr, gc), color in zip(spots[1:], colors):
                for dr, dc in offsets:
                    carved[gr + dr, gc + dc] = CYLINDER_BASE + color
            world = WorldGrid(carved, res,
                              cylinder_radius=params.cylinder_radius,
                              cylinder_height=params.cylinder_height,
                              agent_height=params.agent_height,
                              agent_radius=params.agent_radius)
            if not _validate_episode(world, spots[0], spots[1:], params):
                continue
            sx, sy = world.cell_center(*spots[0])
            start_pose = Pose(sx, sy, float(rng.uniform(0.0, TAU)))
            return EpisodeSpec(
                world=world,
                start=start_pose,
                goal_sequence=tuple(colors),
                palette=PALETTE[:params.palette_size].copy(),
                max_steps=params.max_steps,
                success_radius=params.success_radius,
            )
    raise GenerationError(
        f"could not place {params.goals} goals with min_sep={params.min_sep} "
        f"in a {params.size}x{params.size} world (seed {seed})")


def _validate_episode(world: WorldGrid, start: tuple[int, int],
                      goal_cells: list[tuple[int, int]],
                      params: WorldParams) -> bool:
    """Flood-fill check: every goal approachable from the start within a
    comfortable fraction of the success radius."""
    trav = traversable_mask(world)
    if not trav[start]:
        return False
    dist = distance_field(trav, world.resolution, start)
    for gr, gc in goal_cells:
        snapped = snap_to_traversable(trav, (gr, gc), default_snap_radius(world))
        if snapped is None or not math.isfinite(dist[snapped]):
            return False
        sx, sy = world.cell_center(*snapped)
        gx, gy = world.cell_center(gr, gc)
        if math.hypot(sx - gx, sy - gy) > params.success_radius * 0.6:
            return False
    return True
