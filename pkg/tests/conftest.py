from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multinav.world import FREE, WALL, CYLINDER_BASE, CameraConfig, Pose, WorldGrid
from multinav.worldgen import _footprint_offsets


def make_room(size_m: float = 8.0, resolution: float = 0.1) -> WorldGrid:
    """Open square room of the given interior size with a one-cell wall ring."""
    n = int(round(size_m / resolution)) + 2
    cells = np.full((n, n), FREE, dtype=np.uint8)
    cells[0, :] = cells[-1, :] = WALL
    cells[:, 0] = cells[:, -1] = WALL
    return WorldGrid(cells, resolution)


def add_cylinder(world: WorldGrid, r: int, c: int, color: int) -> None:
    """Stamp a cylinder footprint centered on cell (r, c)."""
    for dr, dc in _footprint_offsets(world.cylinder_radius, world.resolution):
        world.cells[r + dr, c + dc] = CYLINDER_BASE + color
    world._centers = None


@pytest.fixture
def room():
    return make_room()


@pytest.fixture
def camera():
    return CameraConfig()


@pytest.fixture
def center_pose(room):
    mid = (room.width * room.resolution) / 2.0
    return Pose(mid, mid, 0.0)
