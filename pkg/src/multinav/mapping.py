"""Depth-to-map pipeline: egocentric projection, allocentric transform, and
fusion into the persistent global occupancy map.

Maps are trinary (unexplored / free / occupied). The egocentric map anchors
the agent at the center of cell (0, N//2) facing along +row; ego cell (r, c)
has its center at right-offset (c - N//2) * res and forward-offset r * res
meters. The global map is axis-aligned to the world with its origin at the
lower-left corner of cell (0, 0) and the episode start pinned to the center
cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import column_bearings
from .world import CameraConfig, Observation, Pose

UNEXPLORED = 0
FREE_SPACE = 1
OCCUPIED = 2


@dataclass(eq=False)
class EgoMap:
    grid: np.ndarray        # (N, N) uint8
    resolution: float

    @property
    def size(self) -> int:
        return self.grid.shape[0]


@dataclass(eq=False)
class OccupancyMap:
    grid: np.ndarray        # (M, M) uint8
    resolution: float
    origin: tuple[float, float]   # world coords of cell (0, 0) lower-left corner

    @classmethod
    def create(cls, size: int = 550, resolution: float = 0.1,
               center: tuple[float, float] = (0.0, 0.0)) -> "OccupancyMap":
        """Blank map whose center cell (size//2, size//2) contains `center`."""
        half = size // 2
        origin = (center[0] - (half + 0.5) * resolution,
                  center[1] - (half + 0.5) * resolution)
        return cls(grid=np.zeros((size, size), dtype=np.uint8),
                   resolution=resolution, origin=origin)

    @property
    def size(self) -> int:
        return self.grid.shape[0]

    def geometry(self) -> tuple:
        return (self.grid.shape, self.resolution, self.origin)

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((y - self.origin[1]) / self.resolution)),
                int(math.floor((x - self.origin[0]) / self.resolution)))

    def cell_center(self, r: int, c: int) -> tuple[float, float]:
        return (self.origin[0] + (c + 0.5) * self.resolution,
                self.origin[1] + (r + 0.5) * self.resolution)

    def explored_count(self) -> int:
        return int(np.count_nonzero(self.grid))

    def copy(self) -> "OccupancyMap":
        return OccupancyMap(self.grid.copy(), self.resolution, self.origin)


@dataclass
class MapOverlay:
    """Sparse set of determined cells in global-map coordinates. Occupied
    entries take precedence over free ones from the same observation."""
    free: np.ndarray       # flat indices into the target grid
    occupied: np.ndarray
    dropped: int           # cells that transformed outside the map bounds
    geometry: tuple

    def cells(self) -> list[tuple[tuple[int, int], int]]:
        cols = self.geometry[0][1]
        out = {}
        for idx in self.free.tolist():
            out[idx] = FREE_SPACE
        for idx in self.occupied.tolist():
            out[idx] = OCCUPIED
        return [((idx // cols, idx % cols), state)
                for idx, state in sorted(out.items())]


def _round_half_up(x: np.ndarray) -> np.ndarray:
    return np.floor(x + 0.5).astype(np.int64)


def project_depth_to_ego(obs: Observation, cam: CameraConfig,
                         resolution: float = 0.1, size: int = 550) -> EgoMap:
    """Convert one depth frame into an egocentric trinary map.

    Each column's surface depth is perpendicular-corrected, so the Euclidean
    ray distance is recovered before back-projection; the endpoint cell is
    marked occupied for real hits and the discrete ray from the agent to the
    endpoint (exclusive for hits, inclusive at max range) is marked free.
    """
    depth = obs.depth
    if np.any(depth <= 0.0):
        raise ValueError("depth values must be positive")
    d = depth.min(axis=0)                      # column surface depth
    alpha = column_bearings(cam.width, cam.hfov)
    sin_a, cos_a = np.sin(alpha), np.cos(alpha)
    hit = d < cam.max_range
    t = np.where(hit, d / cos_a, cam.max_range)
    ex = t * sin_a
    ey = t * cos_a

    n2 = size // 2
    end_r = _round_half_up(ey / resolution)
    end_c = _round_half_up(ex / resolution) + n2

    grid = np.zeros((size, size), dtype=np.uint8)
    steps = np.maximum(np.abs(end_r), np.abs(end_c - n2))
    max_steps = int(steps.max()) if steps.size else 0
    if max_steps > 0:
        i = np.arange(max_steps + 1, dtype=np.float64)[:, None]
        frac = np.where(steps > 0, i / np.maximum(steps, 1), 0.0)
        rr = _round_half_up(frac * end_r[None, :])
        cc = _round_half_up(frac * (end_c - n2)[None, :]) + n2
        # Free pass: traversed cells before the endpoint; rays that hit a
        # surface stop marking half a cell short of it so that cells whose
        # center straddles the surface are left to the occupied pass rather
        # than flip-flopping between observations. Max-range rays include
        # their endpoint (nothing was hit there).
        with np.errstate(invalid="ignore"):
            trim = steps * (1.0 - resolution / (2.0 * np.maximum(t, 1e-12)))
        free_mask = np.where(hit[None, :], i <= trim[None, :], i <= steps[None, :])
        free_mask &= (rr >= 0) & (rr < size) & (cc >= 0) & (cc < size)
        grid[rr[free_mask], cc[free_mask]] = FREE_SPACE
    occ_ok = hit & (end_r >= 0) & (end_r < size) & (end_c >= 0) & (end_c < size)
    grid[end_r[occ_ok], end_c[occ_ok]] = OCCUPIED
    return EgoMap(grid=grid, resolution=resolution)


def ego_to_allo(ego: EgoMap, pose: Pose, target: OccupancyMap) -> MapOverlay:
    """Rigidly transform determined ego cells into global-map cells.

    Each ego cell center is rotated by the heading and translated by the
    position, then snapped to the containing global cell; out-of-bounds cells
    are dropped and tallied.
    """
    idx = np.flatnonzero(ego.grid)
    states = ego.grid.flat[idx]
    n = ego.size
    n2 = n // 2
    r = idx // n
    c = idx % n
    ex = (c - n2) * ego.resolution
    ey = r * ego.resolution
    cos_t, sin_t = math.cos(pose.theta), math.sin(pose.theta)
    wx = pose.x + cos_t * ex - sin_t * ey
    wy = pose.y + sin_t * ex + cos_t * ey

    m = target.size
    ar = np.floor((wy - target.origin[1]) / target.resolution).astype(np.int64)
    ac = np.floor((wx - target.origin[0]) / target.resolution).astype(np.int64)
    in_bounds = (ar >= 0) & (ar < m) & (ac >= 0) & (ac < m)
    dropped = int(np.count_nonzero(~in_bounds))
    flat = ar * m + ac
    free = flat[in_bounds & (states == FREE_SPACE)]
    occupied = flat[in_bounds & (states == OCCUPIED)]
    return MapOverlay(free=free, occupied=occupied, dropped=dropped,
                      geometry=target.geometry())


def fuse(occupancy: OccupancyMap, overlay: MapOverlay) -> OccupancyMap:
    """Overwrite global cells with the overlay (latest observation wins);
    unexplored never overwrites because overlays only carry determined cells."""
    if overlay.geometry != occupancy.geometry():
        raise ValueError("overlay geometry does not match the occupancy map")
    fused = occupancy.copy()
    fused.grid.flat[overlay.free] = FREE_SPACE
    fused.grid.flat[overlay.occupied] = OCCUPIED
    return fused


def fuse_into(occupancy: OccupancyMap, overlay: MapOverlay) -> np.ndarray:
    """In-place fuse; returns the flat indices whose state actually changed."""
    if overlay.geometry != occupancy.geometry():
        raise ValueError("overlay geometry does not match the occupancy map")
    idx = np.concatenate([overlay.free, overlay.occupied])
    if idx.size == 0:
        return idx
    before = occupancy.grid.flat[idx].copy()
    occupancy.grid.flat[overlay.free] = FREE_SPACE
    occupancy.grid.flat[overlay.occupied] = OCCUPIED
    after = occupancy.grid.flat[idx]
    return np.unique(idx[before != after])


def to_pgm(occupancy: OccupancyMap, path) -> None:
    """Binary PGM snapshot: unexplored 127, free 255, occupied 0."""
    lut = np.array([127, 255, 0], dtype=np.uint8)
    img = lut[occupancy.grid]
    header = f"P5\n{occupancy.size} {occupancy.size}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + img.tobytes())
