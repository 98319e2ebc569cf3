"""Column raycast RGB-D renderer over a WorldGrid.

One ray per image column. Walls are resolved with an exact grid traversal
(Amanatides-Woo), cylinders with exact ray-circle intersection against their
physical center and radius, and the nearest hit wins the column. The depth
image stores perpendicular-corrected distance (hit distance times the cosine
of the column bearing), so a flat wall facing the camera reads a constant
depth across every column that sees it. Columns with no hit inside max_range
carry depth exactly max_range.

The visible band of a hit fills rows whose centers lie within
f * (cylinder_height / 2) / depth pixels of the image horizon; walls use the
same object height. Remaining rows show flat floor/ceiling grays that are
far from every palette color.
"""
from __future__ import annotations

import numpy as np

from .geometry import column_bearings, focal_length_px
from .world import (CEILING_GRAY, FLOOR_GRAY, FREE, PALETTE, WALL, WALL_GRAY,
                    CameraConfig, Observation, Pose, WorldGrid)

try:
    from numba import njit as _njit
except ImportError:                     # pragma: no cover - numba is optional
    _njit = None


def _raycast_walls_numpy(cells: np.ndarray, resolution: float, ox: float,
                         oy: float, dirx: np.ndarray, diry: np.ndarray,
                         max_range: float) -> np.ndarray:
    """Euclidean distance to the first wall cell per ray (inf if none)."""
    n = dirx.size
    height, width = cells.shape
    cr = np.full(n, int(np.floor(oy / resolution)), dtype=np.int64)
    cc = np.full(n, int(np.floor(ox / resolution)), dtype=np.int64)

    step_c = np.where(dirx > 0.0, 1, -1)
    step_r = np.where(diry > 0.0, 1, -1)
    # Distance to the first vertical/horizontal cell boundary along each ray;
    # arithmetic kept identical (direct division) to the scalar traversal so
    # both backends produce bit-equal depth images.
    next_x = np.where(dirx > 0.0, (cc + 1) * resolution, cc * resolution)
    next_y = np.where(diry > 0.0, (cr + 1) * resolution, cr * resolution)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_max_x = np.where(dirx != 0.0, (next_x - ox) / dirx, np.inf)
        t_max_y = np.where(diry != 0.0, (next_y - oy) / diry, np.inf)
        t_delta_x = np.where(dirx != 0.0, resolution / np.abs(dirx), np.inf)
        t_delta_y = np.where(diry != 0.0, resolution / np.abs(diry), np.inf)

    hit_t = np.full(n, np.inf)
    active = np.ones(n, dtype=bool)
    max_iter = 4 * (int(max_range / resolution) + height + width)
    for _ in range(max_iter):
        if not active.any():
            break
        take_x = active & (t_max_x <= t_max_y)
        take_y = active & ~take_x
        t_entry = np.where(take_x, t_max_x, t_max_y)
        cc[take_x] += step_c[take_x]
        cr[take_y] += step_r[take_y]
        t_max_x[take_x] += t_delta_x[take_x]
        t_max_y[take_y] += t_delta_y[take_y]
        # Rays leaving range or bounds are done (borders are walls, so bounds
        # exits only happen after the range cutoff).
        in_bounds = (cr >= 0) & (cr < height) & (cc >= 0) & (cc < width)
        active &= (t_entry <= max_range) & in_bounds
        probe = active.copy()
        hit = np.zeros(n, dtype=bool)
        hit[probe] = cells[cr[probe], cc[probe]] == WALL
        hit_t[hit] = t_entry[hit]
        active &= ~hit
    return hit_t


def _raycast_walls_scalar(cells, resolution, ox, oy, dirx, diry, max_range):
    """Per-ray grid marching; numba-compiled when available. Identical cell
    traversal and boundary arithmetic to the numpy version."""
    n = dirx.shape[0]
    height, width = cells.shape
    out = np.full(n, np.inf)
    for k in range(n):
        dx, dy = dirx[k], diry[k]
        cr = int(np.floor(oy / resolution))
        cc = int(np.floor(ox / resolution))
        if dx > 0.0:
            step_c, t_max_x = 1, ((cc + 1) * resolution - ox) / dx
            t_delta_x = resolution / dx
        elif dx < 0.0:
            step_c, t_max_x = -1, (cc * resolution - ox) / dx
            t_delta_x = -resolution / dx
        else:
            step_c, t_max_x, t_delta_x = 0, np.inf, np.inf
        if dy > 0.0:
            step_r, t_max_y = 1, ((cr + 1) * resolution - oy) / dy
            t_delta_y = resolution / dy
        elif dy < 0.0:
            step_r, t_max_y = -1, (cr * resolution - oy) / dy
            t_delta_y = -resolution / dy
        else:
            step_r, t_max_y, t_delta_y = 0, np.inf, np.inf
        while True:
            if t_max_x <= t_max_y:
                t_entry = t_max_x
                cc += step_c
                t_max_x += t_delta_x
            else:
                t_entry = t_max_y
                cr += step_r
                t_max_y += t_delta_y
            if t_entry > max_range:
                break
            if cr < 0 or cr >= height or cc < 0 or cc >= width:
                break
            if cells[cr, cc] == 1:      # WALL
                out[k] = t_entry
                break
    return out


if _njit is not None:
    _raycast_walls_compiled = _njit(cache=True)(_raycast_walls_scalar)

    def _raycast_walls(cells, resolution, ox, oy, dirx, diry, max_range):
        return _raycast_walls_compiled(cells, resolution, ox, oy,
                                       dirx, diry, max_range)
else:                                   # pragma: no cover - numba is optional
    _raycast_walls = _raycast_walls_numpy


def _raycast_cylinders(world: WorldGrid, ox: float, oy: float,
                       dirx: np.ndarray, diry: np.ndarray,
                       max_range: float) -> tuple[np.ndarray, np.ndarray]:
    """Nearest cylinder hit distance and color id per ray (-1 when none)."""
    n = dirx.size
    centers = world.cylinder_centers()
    t_best = np.full(n, np.inf)
    color = np.full(n, -1, dtype=np.int64)
    for cid in sorted(centers):
        cx, cy = centers[cid]
        fx, fy = ox - cx, oy - cy
        b = fx * dirx + fy * diry
        disc = b * b - (fx * fx + fy * fy - world.cylinder_radius ** 2)
        with np.errstate(invalid="ignore"):
            t = -b - np.sqrt(disc)
        valid = (disc >= 0.0) & (t > 1e-12) & (t <= max_range) & (t < t_best)
        t_best[valid] = t[valid]
        color[valid] = cid
    return t_best, color


def render(world: WorldGrid, pose: Pose, cam: CameraConfig) -> Observation:
    """Render the RGB-D observation from pose; pose must be in free space."""
    if world.cell_at_point(pose.x, pose.y) != FREE:
        raise ValueError("cannot render from inside a wall or cylinder cell")

    alpha = column_bearings(cam.width, cam.hfov)
    sin_a, cos_a = np.sin(alpha), np.cos(alpha)
    cos_t, sin_t = np.cos(pose.theta), np.sin(pose.theta)
    dirx = cos_t * sin_a - sin_t * cos_a
    diry = sin_t * sin_a + cos_t * cos_a

    t_wall = _raycast_walls(world.cells, world.resolution, pose.x, pose.y,
                            dirx, diry, cam.max_range)
    t_cyl, cyl_color = _raycast_cylinders(world, pose.x, pose.y,
                                          dirx, diry, cam.max_range)

    t_hit = np.minimum(t_wall, t_cyl)
    hit = np.isfinite(t_hit)
    depth_col = np.where(hit, t_hit * cos_a, cam.max_range)

    colors = np.tile(WALL_GRAY, (cam.width, 1))
    cyl_hit = t_cyl < t_wall
    if cyl_hit.any():
        colors[cyl_hit] = PALETTE[cyl_color[cyl_hit]]

    f = focal_length_px(cam.width, cam.hfov)
    with np.errstate(divide="ignore"):
        half_px = f * (world.cylinder_height / 2.0) / depth_col
    row_center = np.arange(cam.height, dtype=np.float64) + 0.5 - cam.height / 2.0
    band = (np.abs(row_center)[:, None] <= half_px[None, :]) & hit[None, :]

    rgb = np.empty((cam.height, cam.width, 3))
    upper = row_center < 0.0
    rgb[upper, :, :] = CEILING_GRAY
    rgb[~upper, :, :] = FLOOR_GRAY
    rgb[band] = np.broadcast_to(colors[None, :, :],
                                (cam.height, cam.width, 3))[band]
    depth = np.where(band, depth_col[None, :], cam.max_range)
    return Observation(rgb=rgb, depth=depth, pose=Pose(pose.x, pose.y, pose.theta))
