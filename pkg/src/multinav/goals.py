"""Goal localization: color thresholding, blob-size filtering, and projection
of detections into the persistent per-color goal map.

Every palette color is scanned on every frame regardless of which goal is
current, so later goals are cached while the agent is still chasing earlier
ones. Goal cells accumulate with set-union semantics; goals are static, so
writes are never retracted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import label

from .geometry import column_bearings
from .mapping import OccupancyMap
from .world import PALETTE, CameraConfig, Pose

_EIGHT = np.ones((3, 3), dtype=int)


@dataclass
class DetectorConfig:
    epsilon: float = 0.001
    delta: int = 50
    palette: np.ndarray = field(default_factory=lambda: PALETTE.copy())

    def __post_init__(self):
        self.palette = np.asarray(self.palette, dtype=np.float64)
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.delta < 1:
            raise ValueError("delta must be at least 1")
        n = len(self.palette)
        for i in range(n):
            for j in range(i + 1, n):
                d = float(np.linalg.norm(self.palette[i] - self.palette[j]))
                if d <= 2.0 * self.epsilon:
                    raise ValueError(
                        f"palette colors {i} and {j} are within 2*epsilon")


@dataclass(eq=False)
class GoalMap:
    """Per-color boolean channels sharing the occupancy map geometry."""
    channels: np.ndarray          # (n, M, M) bool
    resolution: float
    origin: tuple[float, float]
    _counts: np.ndarray = field(default=None, repr=False)
    _sums: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self._counts is None:
            self._counts = np.zeros(self.channels.shape[0], dtype=np.int64)
            self._sums = np.zeros((self.channels.shape[0], 2), dtype=np.int64)

    @classmethod
    def create(cls, n_colors: int, occupancy: OccupancyMap) -> "GoalMap":
        return cls(channels=np.zeros((n_colors, occupancy.size, occupancy.size),
                                     dtype=bool),
                   resolution=occupancy.resolution,
                   origin=occupancy.origin)

    @property
    def size(self) -> int:
        return self.channels.shape[1]

    @property
    def n_colors(self) -> int:
        return self.channels.shape[0]

    def count(self, color_id: int) -> int:
        return int(self._counts[color_id])

    def add_cells(self, color_id: int, rs: np.ndarray, cs: np.ndarray) -> None:
        """Union new cells into a channel, keeping count/sum caches exact."""
        if len(rs) == 0:
            return
        chan = self.channels[color_id]
        fresh = ~chan[rs, cs]
        if fresh.any():
            rs, cs = rs[fresh], cs[fresh]
            # The same cell can appear several times in one batch; dedupe.
            flat = np.unique(rs.astype(np.int64) * self.size + cs)
            rs, cs = flat // self.size, flat % self.size
            chan[rs, cs] = True
            self._counts[color_id] += rs.size
            self._sums[color_id, 0] += int(rs.sum())
            self._sums[color_id, 1] += int(cs.sum())

    def cell_center(self, r: int, c: int) -> tuple[float, float]:
        return (self.origin[0] + (c + 0.5) * self.resolution,
                self.origin[1] + (r + 0.5) * self.resolution)


def detect_goals(rgb: np.ndarray, cfg: DetectorConfig) -> np.ndarray:
    """Boolean masks (n, H, W): pixel color strictly within epsilon of each
    palette color (Euclidean distance in [0,1]^3 RGB).

    Compared in squared form; a pixel at exactly epsilon distance still
    fails the strict threshold since both sides round identically."""
    eps2 = cfg.epsilon * cfg.epsilon
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    masks = np.empty((len(cfg.palette),) + rgb.shape[:2], dtype=bool)
    for i, (cr, cg, cb) in enumerate(cfg.palette):
        d2 = (r - cr) ** 2 + (g - cg) ** 2 + (b - cb) ** 2
        masks[i] = d2 < eps2
    return masks


def filter_components(mask: np.ndarray, delta: int) -> np.ndarray:
    """Zero out 8-connected components with fewer than delta pixels."""
    labels, n = label(mask, structure=_EIGHT)
    if n == 0:
        return np.zeros_like(mask, dtype=bool)
    counts = np.bincount(labels.ravel(), minlength=n + 1)
    keep = counts >= delta
    keep[0] = False
    return keep[labels]


def project_goals(masks: np.ndarray, depth: np.ndarray, pose: Pose,
                  cam: CameraConfig, goal_map: GoalMap) -> GoalMap:
    """Back-project filtered detection pixels into goal-map cells.

    Pixels at exactly max_range carry no range and are skipped. Uses the same
    column-ray geometry as the mapper: depth is perpendicular-corrected, so
    the Euclidean distance along the pixel's column ray is depth / cos(alpha).
    """
    alpha = column_bearings(cam.width, cam.hfov)
    sin_a, cos_a = np.sin(alpha), np.cos(alpha)
    cos_t, sin_t = math.cos(pose.theta), math.sin(pose.theta)
    m = goal_map.size
    for color_id in range(goal_map.n_colors):
        mask = masks[color_id]
        if not mask.any():
            continue
        rows, cols = np.nonzero(mask)
        d = depth[rows, cols]
        ranged = d < cam.max_range
        if not ranged.any():
            continue
        cols = cols[ranged]
        t = d[ranged] / cos_a[cols]
        ex = t * sin_a[cols]
        ey = t * cos_a[cols]
        wx = pose.x + cos_t * ex - sin_t * ey
        wy = pose.y + sin_t * ex + cos_t * ey
        rr = np.floor((wy - goal_map.origin[1]) / goal_map.resolution).astype(np.int64)
        cc = np.floor((wx - goal_map.origin[0]) / goal_map.resolution).astype(np.int64)
        ok = (rr >= 0) & (rr < m) & (cc >= 0) & (cc < m)
        goal_map.add_cells(color_id, rr[ok], cc[ok])
    return goal_map


def estimate_goal_position(goal_map: GoalMap, color_id: int) -> tuple[int, int] | None:
    """Rounded mean cell of a channel's set cells, or None when empty."""
    count = goal_map.count(color_id)
    if count == 0:
        return None
    r = int(round(goal_map._sums[color_id, 0] / count))
    c = int(round(goal_map._sums[color_id, 1] / count))
    return (r, c)


def to_ppm(goal_map: GoalMap, path, palette: np.ndarray | None = None) -> None:
    """Binary PPM snapshot compositing all channels over a dark background."""
    palette = PALETTE if palette is None else palette
    m = goal_map.size
    img = np.full((m, m, 3), 40, dtype=np.uint8)
    for color_id in range(goal_map.n_colors):
        rs, cs = np.nonzero(goal_map.channels[color_id])
        img[rs, cs] = np.clip(palette[color_id] * 255.0, 0, 255).astype(np.uint8)
    header = f"P6\n{m} {m}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header + img.tobytes())
