from __future__ import annotations

import math

import numpy as np
import pytest

from multinav.geometry import column_bearings
from multinav.raycast import render
from multinav.world import (FREE, PALETTE, WALL, CameraConfig, Pose, WorldGrid,
                            WALL_GRAY)
from conftest import add_cylinder, make_room
from oracles import nearest_wall_hit, ray_circle_hit


def _ray_dirs(pose, cam):
    alpha = column_bearings(cam.width, cam.hfov)
    ct, st = math.cos(pose.theta), math.sin(pose.theta)
    return (ct * np.sin(alpha) - st * np.cos(alpha),
            st * np.sin(alpha) + ct * np.cos(alpha), alpha)


def test_perpendicular_wall_center_depth(camera):
    # Wall 2.0 m ahead of the agent, facing +y (theta = 0).
    world = make_room(6.0)
    pose = Pose(3.1, 1.0, 0.0)
    wall_row = world.point_to_cell(3.1, 3.0)[0]
    world.cells[wall_row, 1:-1] = WALL
    obs = render(world, pose, camera)
    h, w = camera.height, camera.width
    for u in (w // 2 - 1, w // 2):
        assert obs.depth[h // 2, u] == pytest.approx(2.0, abs=1e-9)


def test_flat_wall_constant_depth_across_columns(camera):
    # Perpendicular-corrected depth: every column seeing the wall plane reads
    # the same value even 30+ degrees off the optical axis.
    world = make_room(12.0, 0.1)
    pose = Pose(6.1, 1.0, 0.0)
    wall_row = world.point_to_cell(6.1, 3.0)[0]
    world.cells[wall_row, 1:-1] = WALL
    obs = render(world, pose, camera)
    h = camera.height
    center_rows = obs.depth[h // 2]
    hit = center_rows < camera.max_range
    assert hit.sum() > camera.width * 0.9
    assert np.allclose(center_rows[hit], 2.0, atol=1e-9)


def test_cylinder_centered_palette_color(room, camera):
    add_cylinder(room, 61, 41, 0)   # red, 2 m ahead of the pose below
    pose = Pose(4.15, 4.15, 0.0)
    obs = render(room, pose, camera)
    h, w = camera.height, camera.width
    assert np.array_equal(obs.rgb[h // 2, w // 2], PALETTE[0])
    # Exact ray-circle distance, perpendicular corrected.
    alpha = column_bearings(w, camera.hfov)[w // 2]
    expected = ray_circle_hit(4.15, 4.15, -math.sin(alpha) * 0 + math.sin(alpha),
                              math.cos(alpha), 4.15, 6.15, room.cylinder_radius)
    assert obs.depth[h // 2, w // 2] == pytest.approx(expected * math.cos(alpha),
                                                      abs=1e-9)


def test_object_outside_fov_invisible(room, camera):
    # Cylinder at bearing ~90 degrees right of the heading: no pixel may
    # carry its color.
    add_cylinder(room, 41, 61, 2)   # at +x from center, agent faces +y
    pose = Pose(4.15, 4.15, 0.0)
    obs = render(room, pose, camera)
    assert not np.any(np.all(obs.rgb == PALETTE[2], axis=-1))


def test_depth_oracle_random_scenes():
    # Wall depths must match an independent slab-method intersection over
    # every wall cell, ray by ray, before perpendicular correction.
    rng = np.random.default_rng(11)
    cam = CameraConfig(width=48, height=16)
    for _ in range(12):
        world = make_room(6.0)
        mask = rng.random(world.cells.shape) < 0.06
        world.cells[mask] = WALL
        world.cells[0, :] = world.cells[-1, :] = WALL
        world.cells[:, 0] = world.cells[:, -1] = WALL
        while True:
            x, y = rng.uniform(0.5, 5.5, 2)
            if world.cells[world.point_to_cell(x, y)] == FREE:
                break
        pose = Pose(x, y, rng.uniform(0, 2 * math.pi))
        obs = render(world, pose, cam)
        dirx, diry, alpha = _ray_dirs(pose, cam)
        col_depth = obs.depth.min(axis=0)
        for u in range(cam.width):
            t = nearest_wall_hit(world, pose.x, pose.y, dirx[u], diry[u],
                                 cam.max_range)
            if math.isinf(t):
                assert col_depth[u] == cam.max_range
            else:
                assert col_depth[u] == pytest.approx(t * math.cos(alpha[u]),
                                                     abs=1e-9)


def test_no_phantom_cylinder_pixels():
    # Every pixel carrying a palette color corresponds to a cylinder that is
    # genuinely hit by that column's ray within range (soundness of colors).
    rng = np.random.default_rng(5)
    cam = CameraConfig(width=64, height=24)
    for _ in range(10):
        world = make_room(8.0)
        spots = []
        for color in (0, 3, 7):
            r, c = rng.integers(10, 70), rng.integers(10, 70)
            add_cylinder(world, int(r), int(c), color)
            spots.append((color, world.cylinder_centers()[color]))
        while True:
            x, y = rng.uniform(1.0, 7.0, 2)
            if world.cells[world.point_to_cell(x, y)] == FREE \
                    and not world.point_collides(x, y):
                break
        pose = Pose(x, y, rng.uniform(0, 2 * math.pi))
        obs = render(world, pose, cam)
        dirx, diry, _ = _ray_dirs(pose, cam)
        for color, (cx, cy) in spots:
            cols = np.nonzero(np.any(np.all(obs.rgb == PALETTE[color], axis=-1),
                                     axis=0))[0]
            for u in cols:
                t_cyl = ray_circle_hit(pose.x, pose.y, dirx[u], diry[u],
                                       cx, cy, world.cylinder_radius)
                t_wall = nearest_wall_hit(world, pose.x, pose.y,
                                          dirx[u], diry[u], cam.max_range)
                assert t_cyl <= cam.max_range + 1e-12
                assert t_cyl < t_wall


def test_render_from_inside_obstacle_rejected(room, camera):
    with pytest.raises(ValueError):
        render(room, Pose(0.05, 0.05, 0.0), camera)


def test_rgb_values_are_flat_surface_or_palette(room, camera):
    add_cylinder(room, 61, 41, 4)
    obs = render(room, Pose(4.15, 4.15, 0.0), camera)
    flat = obs.rgb.reshape(-1, 3)
    allowed = np.vstack([PALETTE, WALL_GRAY,
                         np.array([0.45] * 3), np.array([0.6] * 3)])
    dists = np.linalg.norm(flat[:, None, :] - allowed[None, :, :], axis=-1)
    assert np.all(dists.min(axis=1) == 0.0)
