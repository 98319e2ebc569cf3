from __future__ import annotations

import math

import numpy as np
import pytest

from multinav.geometry import column_bearings
from multinav.mapping import (FREE_SPACE, OCCUPIED, UNEXPLORED, EgoMap,
                              OccupancyMap, ego_to_allo, fuse, fuse_into,
                              project_depth_to_ego, to_pgm)
from multinav.raycast import render
from multinav.world import WALL, CameraConfig, Observation, Pose
from conftest import make_room


def _flat_wall_obs(cam, distance):
    """Synthetic observation of an infinite wall `distance` ahead."""
    depth = np.full((cam.height, cam.width), cam.max_range)
    band = 4
    depth[cam.height // 2 - band:cam.height // 2 + band, :] = distance
    rgb = np.zeros((cam.height, cam.width, 3))
    return Observation(rgb=rgb, depth=depth, pose=Pose(0, 0, 0))


def test_empty_scene_free_wedge(camera):
    depth = np.full((camera.height, camera.width), camera.max_range)
    obs = Observation(rgb=np.zeros((camera.height, camera.width, 3)),
                      depth=depth, pose=Pose(0, 0, 0))
    ego = project_depth_to_ego(obs, camera, 0.1, 200)
    assert not np.any(ego.grid == OCCUPIED)
    free_cells = np.count_nonzero(ego.grid == FREE_SPACE)
    # Wedge of half-angle hfov/2 out to max_range, in cells.
    expected = (camera.hfov / 2.0) * (camera.max_range / 0.1) ** 2
    assert free_cells > 0.8 * expected
    # Nothing marked outside max_range plus one cell of quantization.
    n2 = 100
    rs, cs = np.nonzero(ego.grid)
    dist = np.hypot(rs * 0.1, (cs - n2) * 0.1)
    assert dist.max() <= camera.max_range + 0.1 * math.sqrt(2.0)


def test_wall_dead_ahead_occupied_cell(camera):
    obs = _flat_wall_obs(camera, 1.0)
    ego = project_depth_to_ego(obs, camera, 0.1, 200)
    n2 = 100
    # Endpoint 10 cells forward of the agent anchor.
    assert ego.grid[10, n2] == OCCUPIED
    for r in range(1, 10):
        assert ego.grid[r, n2] == FREE_SPACE
    assert np.count_nonzero(ego.grid[1:10, n2] == FREE_SPACE) == 9


def test_rejects_nonpositive_depth(camera):
    depth = np.full((camera.height, camera.width), camera.max_range)
    depth[0, 0] = 0.0
    obs = Observation(rgb=np.zeros((camera.height, camera.width, 3)),
                      depth=depth, pose=Pose(0, 0, 0))
    with pytest.raises(ValueError):
        project_depth_to_ego(obs, camera, 0.1, 200)


def test_occupied_cells_match_continuous_backprojection():
    # DERIVED oracle: every occupied ego cell within one cell of the exact
    # continuous ray endpoint (Euclidean distance recovered from the
    # perpendicular-corrected column depth).
    rng = np.random.default_rng(3)
    cam = CameraConfig(width=64, height=24)
    alpha = column_bearings(cam.width, cam.hfov)
    for _ in range(20):
        depth_cols = rng.uniform(0.4, cam.max_range - 0.2, cam.width)
        depth = np.tile(depth_cols, (cam.height, 1))
        obs = Observation(rgb=np.zeros((cam.height, cam.width, 3)),
                          depth=depth, pose=Pose(0, 0, 0))
        ego = project_depth_to_ego(obs, cam, 0.1, 250)
        n2 = 125
        occ = set(zip(*np.nonzero(ego.grid == OCCUPIED)))
        for u in range(cam.width):
            t = depth_cols[u] / math.cos(alpha[u])
            ex, ey = t * math.sin(alpha[u]), t * math.cos(alpha[u])
            exact = (math.floor(ey / 0.1 + 0.5), math.floor(ex / 0.1 + 0.5) + n2)
            assert any(max(abs(exact[0] - r), abs(exact[1] - c)) <= 1
                       for r, c in occ), f"column {u} endpoint unmatched"


def test_ego_to_allo_identity(camera):
    obs = _flat_wall_obs(camera, 1.5)
    ego = project_depth_to_ego(obs, camera, 0.1, 200)
    target = OccupancyMap.create(200, 0.1, center=(0.0, 0.0))
    overlay = ego_to_allo(ego, Pose(0.0, 0.0, 0.0), target)
    fused = fuse(target, overlay)
    er, ec = np.nonzero(ego.grid)
    n2 = 100
    m2 = 100
    for r, c in zip(er, ec):
        # Ego (0, n2) center sits at the world origin = map center cell.
        ar, ac = m2 + r, m2 + (c - n2)
        assert fused.grid[ar, ac] == ego.grid[r, c]


def test_ego_to_allo_quarter_turn(camera):
    # theta = pi/2: ego (right r, forward f) lands at offset (-f, r), up to
    # one cell of rounding.
    obs = _flat_wall_obs(camera, 1.5)
    ego = project_depth_to_ego(obs, camera, 0.1, 200)
    target = OccupancyMap.create(200, 0.1, center=(0.0, 0.0))
    overlay = ego_to_allo(ego, Pose(0.0, 0.0, math.pi / 2.0), target)
    got = {cell for cell, _ in overlay.cells()}
    n2 = 100
    for r, c in zip(*np.nonzero(ego.grid)):
        right, fwd = (c - n2), r
        expect = (100 + right, 100 - fwd)   # (row=y, col=x) with offset (-f, r)
        assert any(max(abs(expect[0] - gr), abs(expect[1] - gc)) <= 1
                   for gr, gc in got)


def test_ego_to_allo_continuous_oracle(camera):
    # DERIVED: every overlay cell within one cell of the continuous rigid
    # transform of its ego cell center.
    rng = np.random.default_rng(9)
    obs = _flat_wall_obs(camera, 2.0)
    ego = project_depth_to_ego(obs, camera, 0.1, 200)
    n2 = 100
    for _ in range(6):
        pose = Pose(rng.uniform(-1, 1), rng.uniform(-1, 1),
                    rng.uniform(0, 2 * math.pi))
        target = OccupancyMap.create(220, 0.1, center=(0.0, 0.0))
        overlay = ego_to_allo(ego, pose, target)
        got = {cell for cell, _ in overlay.cells()}
        ct, st = math.cos(pose.theta), math.sin(pose.theta)
        for r, c in zip(*np.nonzero(ego.grid)):
            ex, ey = (c - n2) * 0.1, r * 0.1
            wx = pose.x + ct * ex - st * ey
            wy = pose.y + st * ex + ct * ey
            cell = target.world_to_cell(wx, wy)
            assert any(max(abs(cell[0] - gr), abs(cell[1] - gc)) <= 1
                       for gr, gc in got)


def test_ego_to_allo_drops_and_counts_out_of_bounds(camera):
    obs = _flat_wall_obs(camera, 2.0)
    ego = project_depth_to_ego(obs, camera, 0.1, 200)
    tiny = OccupancyMap.create(11, 0.1, center=(0.0, 0.0))
    overlay = ego_to_allo(ego, Pose(0.0, 0.0, 0.0), tiny)
    assert overlay.dropped > 0


def test_fuse_rules():
    target = OccupancyMap.create(10, 0.1, center=(0.5, 0.5))
    ego = EgoMap(grid=np.zeros((4, 4), dtype=np.uint8), resolution=0.1)
    ego.grid[1, 2] = FREE_SPACE
    ego.grid[2, 2] = OCCUPIED
    overlay = ego_to_allo(ego, Pose(0.5, 0.5, 0.0), target)
    # Empty prior: global contains exactly the overlay.
    fused = fuse(target, overlay)
    expect = {cell: state for cell, state in overlay.cells()}
    for (r, c), state in expect.items():
        assert fused.grid[r, c] == state
    assert fused.explored_count() == len(expect)
    # Idempotence.
    again = fuse(fused, overlay)
    assert np.array_equal(again.grid, fused.grid)
    # Latest observation wins: occupied prior overwritten by free overlay.
    cell = next(cell for cell, state in overlay.cells() if state == FREE_SPACE)
    prior = fused.copy()
    prior.grid[cell] = OCCUPIED
    refused = fuse(prior, overlay)
    assert refused.grid[cell] == FREE_SPACE


def test_fuse_geometry_mismatch():
    a = OccupancyMap.create(10, 0.1, center=(0.0, 0.0))
    b = OccupancyMap.create(12, 0.1, center=(0.0, 0.0))
    ego = EgoMap(grid=np.zeros((4, 4), dtype=np.uint8), resolution=0.1)
    overlay = ego_to_allo(ego, Pose(0, 0, 0), a)
    with pytest.raises(ValueError):
        fuse(b, overlay)


def test_explored_count_monotone_under_fusion(room, camera):
    occ = OccupancyMap.create(150, 0.1, center=(4.1, 4.1))
    prev = 0
    pose = Pose(4.1, 4.1, 0.0)
    for k in range(12):
        obs = render(room, Pose(4.1, 4.1, k * math.pi / 6.0), camera)
        ego = project_depth_to_ego(obs, camera, 0.1, 200)
        occ = fuse(occ, ego_to_allo(ego, obs.pose, occ))
        count = occ.explored_count()
        assert count >= prev
        prev = count
    assert set(np.unique(occ.grid)) <= {UNEXPLORED, FREE_SPACE, OCCUPIED}


def test_pgm_export(tmp_path):
    occ = OccupancyMap.create(8, 0.1, center=(0.0, 0.0))
    occ.grid[0, 0] = FREE_SPACE
    occ.grid[1, 1] = OCCUPIED
    path = tmp_path / "snap.pgm"
    to_pgm(occ, path)
    data = path.read_bytes()
    assert data.startswith(b"P5\n8 8\n255\n")
    pixels = np.frombuffer(data.split(b"255\n", 1)[1], dtype=np.uint8)
    assert pixels[0] == 255 and pixels[9] == 0
    assert np.count_nonzero(pixels == 127) == 62
