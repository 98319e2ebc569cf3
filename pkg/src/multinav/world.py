"""Ground-truth grid world: domain types, goal color palette, and file IO.

World cells live on a regular grid with resolution meters per cell; cell
(r, c) spans y in [r*res, (r+1)*res) and x in [c*res, (c+1)*res), so row
indexes y and column indexes x. Goal cylinders occupy every cell their
footprint circle touches; the physical center is recovered from the cell
centroid, which is exact because footprints are symmetric around the
placement cell.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import normalize_angle

# Cell codes for WorldGrid.cells (uint8). Cylinder of color i is CYLINDER_BASE + i.
FREE = 0
WALL = 1
CYLINDER_BASE = 2

# The eight goal colors: red, green, blue, cyan, magenta, yellow, black, white.
PALETTE = np.array([
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0],
], dtype=np.float64)
COLOR_NAMES = ("red", "green", "blue", "cyan", "magenta", "yellow", "black", "white")

# Flat surface colors for non-goal geometry; every gray here is more than 0.5
# away from every palette entry so detection thresholds can never fire on them.
WALL_GRAY = np.array([0.35, 0.35, 0.35])
FLOOR_GRAY = np.array([0.45, 0.45, 0.45])
CEILING_GRAY = np.array([0.60, 0.60, 0.60])


class Action(Enum):
    MOVE_FORWARD = "MoveForward"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    FOUND = "Found"


@dataclass
class Pose:
    x: float
    y: float
    theta: float

    def __post_init__(self):
        self.theta = normalize_angle(self.theta)


@dataclass
class CameraConfig:
    width: int = 128
    height: int = 64
    hfov: float = math.radians(79.0)
    max_range: float = 8.0

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError("camera needs at least 3x3 pixels")
        if not 0.0 < self.hfov < math.pi:
            raise ValueError("hfov must be in (0, pi)")
        if self.max_range <= 0.0:
            raise ValueError("max_range must be positive")


@dataclass
class Observation:
    """Per-step sensor frame: rgb in [0,1], depth in meters, and the pose."""
    rgb: np.ndarray    # (H, W, 3)
    depth: np.ndarray  # (H, W); max_range where nothing was hit
    pose: Pose


@dataclass(eq=False)
class WorldGrid:
    cells: np.ndarray  # (height, width) uint8
    resolution: float
    cylinder_radius: float = 0.15
    cylinder_height: float = 1.5
    agent_height: float = 1.5
    agent_radius: float = 0.1

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if self.cells.ndim != 2:
            raise ValueError("cells must be a 2D grid")
        if self.resolution <= 0.0:
            raise ValueError("resolution must be positive")
        border = np.concatenate([
            self.cells[0], self.cells[-1], self.cells[:, 0], self.cells[:, -1]])
        if not np.all(border == WALL):
            raise ValueError("border cells must all be walls")
        self._centers: dict[int, tuple[float, float]] | None = None

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, WorldGrid):
            return NotImplemented
        return (np.array_equal(self.cells, other.cells)
                and self.resolution == other.resolution
                and self.cylinder_radius == other.cylinder_radius
                and self.cylinder_height == other.cylinder_height
                and self.agent_height == other.agent_height
                and self.agent_radius == other.agent_radius)

    def point_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor(y / self.resolution)),
                int(math.floor(x / self.resolution)))

    def cell_center(self, r: int, c: int) -> tuple[float, float]:
        return ((c + 0.5) * self.resolution, (r + 0.5) * self.resolution)

    def in_bounds(self, r: int, c: int) -> bool:
        return 0 <= r < self.height and 0 <= c < self.width

    def cell_at_point(self, x: float, y: float) -> int:
        r, c = self.point_to_cell(x, y)
        if not self.in_bounds(r, c):
            raise ValueError(f"point ({x}, {y}) is outside the world")
        return int(self.cells[r, c])

    def obstacle_mask(self) -> np.ndarray:
        """Boolean grid of non-free (wall or cylinder) cells."""
        return self.cells != FREE

    def cylinder_centers(self) -> dict[int, tuple[float, float]]:
        """Color id -> world center, from the centroid of that color's cells."""
        if self._centers is None:
            centers = {}
            for code in np.unique(self.cells):
                if code < CYLINDER_BASE:
                    continue
                rs, cs = np.nonzero(self.cells == code)
                r = float(rs.mean())
                c = float(cs.mean())
                centers[int(code) - CYLINDER_BASE] = (
                    (c + 0.5) * self.resolution, (r + 0.5) * self.resolution)
            self._centers = centers
        return self._centers

    def point_collides(self, x: float, y: float) -> bool:
        """True when a disc of agent_radius centered at (x, y) overlaps any
        obstacle cell rectangle (exact disc-vs-cell test on a local window)."""
        res = self.resolution
        rad = self.agent_radius
        r_lo = int(math.floor((y - rad) / res))
        r_hi = int(math.floor((y + rad) / res))
        c_lo = int(math.floor((x - rad) / res))
        c_hi = int(math.floor((x + rad) / res))
        for r in range(max(r_lo, 0), min(r_hi, self.height - 1) + 1):
            for c in range(max(c_lo, 0), min(c_hi, self.width - 1) + 1):
                if self.cells[r, c] == FREE:
                    continue
                nx = min(max(x, c * res), (c + 1) * res)
                ny = min(max(y, r * res), (r + 1) * res)
                if (x - nx) ** 2 + (y - ny) ** 2 <= rad * rad:
                    return True
        return False


@dataclass(eq=False)
class EpisodeSpec:
    world: WorldGrid
    start: Pose
    goal_sequence: tuple[int, ...]
    palette: np.ndarray = field(default_factory=lambda: PALETTE.copy())
    max_steps: int = 2500
    success_radius: float = 1.5

    def __post_init__(self):
        self.goal_sequence = tuple(int(g) for g in self.goal_sequence)
        self.palette = np.asarray(self.palette, dtype=np.float64)
        if len(set(self.goal_sequence)) != len(self.goal_sequence):
            raise ValueError("goal colors must be distinct")
        if any(not 0 <= g < len(self.palette) for g in self.goal_sequence):
            raise ValueError("goal color id outside the palette")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")

    def __eq__(self, other) -> bool:
        if not isinstance(other, EpisodeSpec):
            return NotImplemented
        return (self.world == other.world
                and self.start == other.start
                and self.goal_sequence == other.goal_sequence
                and np.array_equal(self.palette, other.palette)
                and self.max_steps == other.max_steps
                and self.success_radius == other.success_radius)


# ---------------------------------------------------------------------------
# World and episode files.
#
# World file: "key value" header lines, a blank line, then one ASCII row per
# grid row (row 0 first): '#' wall, '.' free, '0'-'7' cylinder color index.
# The header carries every scalar field so load(save(w)) == w exactly.
# Episode sidecar: JSON with the start pose, goal sequence, palette, limits,
# and the generation seed.
# ---------------------------------------------------------------------------

_HEADER_FIELDS = ("width", "height", "resolution", "cylinder_radius",
                  "cylinder_height", "agent_height", "agent_radius")


def _cell_to_char(code: int) -> str:
    if code == FREE:
        return "."
    if code == WALL:
        return "#"
    return str(code - CYLINDER_BASE)


def _char_to_cell(ch: str) -> int:
    if ch == ".":
        return FREE
    if ch == "#":
        return WALL
    if ch.isdigit():
        return CYLINDER_BASE + int(ch)
    raise ValueError(f"unknown grid character {ch!r}")


def save_world(world: WorldGrid, path: str | Path) -> None:
    lines = [
        f"width {world.width}",
        f"height {world.height}",
        f"resolution {world.resolution!r}",
        f"cylinder_radius {world.cylinder_radius!r}",
        f"cylinder_height {world.cylinder_height!r}",
        f"agent_height {world.agent_height!r}",
        f"agent_radius {world.agent_radius!r}",
        "",
    ]
    for r in range(world.height):
        lines.append("".join(_cell_to_char(int(v)) for v in world.cells[r]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_world(path: str | Path) -> WorldGrid:
    text = Path(path).read_text().splitlines()
    header: dict[str, str] = {}
    i = 0
    while i < len(text) and text[i].strip():
        key, _, value = text[i].partition(" ")
        if key not in _HEADER_FIELDS:
            raise ValueError(f"unknown world header field {key!r}")
        header[key] = value
        i += 1
    missing = [k for k in _HEADER_FIELDS if k not in header]
    if missing:
        raise ValueError(f"world header missing fields: {missing}")
    width, height = int(header["width"]), int(header["height"])
    rows = [row for row in text[i + 1:] if row]
    if len(rows) != height or any(len(row) != width for row in rows):
        raise ValueError("grid block does not match declared dimensions")
    cells = np.array([[_char_to_cell(ch) for ch in row] for row in rows],
                     dtype=np.uint8)
    return WorldGrid(
        cells=cells,
        resolution=float(header["resolution"]),
        cylinder_radius=float(header["cylinder_radius"]),
        cylinder_height=float(header["cylinder_height"]),
        agent_height=float(header["agent_height"]),
        agent_radius=float(header["agent_radius"]),
    )


def save_episode(spec: EpisodeSpec, directory: str | Path, stem: str,
                 seed: int | None = None) -> tuple[Path, Path]:
    """Write the world file plus its episode sidecar; returns both paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    world_path = directory / f"{stem}.world.txt"
    episode_path = directory / f"{stem}.episode.json"
    save_world(spec.world, world_path)
    payload = {
        "world_file": world_path.name,
        "seed": seed,
        "start": [spec.start.x, spec.start.y, spec.start.theta],
        "goal_sequence": list(spec.goal_sequence),
        "palette": spec.palette.tolist(),
        "max_steps": spec.max_steps,
        "success_radius": spec.success_radius,
    }
    episode_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return world_path, episode_path


def load_episode(episode_path: str | Path) -> EpisodeSpec:
    episode_path = Path(episode_path)
    payload = json.loads(episode_path.read_text())
    world = load_world(episode_path.parent / payload["world_file"])
    x, y, theta = payload["start"]
    return EpisodeSpec(
        world=world,
        start=Pose(x, y, theta),
        goal_sequence=tuple(payload["goal_sequence"]),
        palette=np.array(payload["palette"], dtype=np.float64),
        max_steps=int(payload["max_steps"]),
        success_radius=float(payload["success_radius"]),
    )
