"""Shared 2D geometry: angle arithmetic, camera ray fans, and grid lines.

Frame conventions used across the package:

* World frame: x right, y up, both in meters. A heading ``theta`` of zero
  points along +y and increases counter-clockwise, so the heading vector is
  ``(-sin(theta), cos(theta))`` and the agent's right-hand side is
  ``(cos(theta), sin(theta))``.
* Egocentric frame: x to the agent's right, y forward, meters. A point at
  ego ``(ex, ey)`` sits at world ``pose + R(theta) @ (ex, ey)`` with the
  standard counter-clockwise rotation matrix.
* Camera columns index left-to-right; column ``u`` looks along the bearing
  offset ``atan((u + 0.5 - W/2) / f)`` to the right of the heading, with
  focal length ``f = (W/2) / tan(hfov/2)`` in pixels. Pixel centers keep
  every column bearing strictly inside the field of view.
"""
from __future__ import annotations

import math

import numpy as np

TAU = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to [0, tau)."""
    return theta % TAU


def angle_diff(a: float, b: float) -> float:
    """Signed difference a - b wrapped to (-pi, pi]."""
    d = (a - b) % TAU
    if d > math.pi:
        d -= TAU
    return d


def heading_vector(theta: float) -> tuple[float, float]:
    """Unit vector the agent is facing (theta=0 points along +y)."""
    return (-math.sin(theta), math.cos(theta))


def rotate_ego_to_world(theta: float, ex, ey):
    """Rotate egocentric (right, forward) offsets into world offsets."""
    c, s = math.cos(theta), math.sin(theta)
    return c * ex - s * ey, s * ex + c * ey


def bearing_to(x0: float, y0: float, x1: float, y1: float) -> float:
    """Heading angle that points from (x0, y0) toward (x1, y1)."""
    return math.atan2(-(x1 - x0), y1 - y0) % TAU


def focal_length_px(width: int, hfov: float) -> float:
    return (width / 2.0) / math.tan(hfov / 2.0)


def column_bearings(width: int, hfov: float) -> np.ndarray:
    """Per-column bearing offsets (radians, positive to the right)."""
    f = focal_length_px(width, hfov)
    u = np.arange(width, dtype=np.float64) + 0.5 - width / 2.0
    return np.arctan(u / f)


def bresenham_line(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Cells of the discrete line from (r0, c0) to (r1, c1), inclusive.

    One cell per major-axis step, minor coordinate chosen by round-half-up;
    matches the vectorized traversal used by the mapper.
    """
    dr, dc = r1 - r0, c1 - c0
    n = max(abs(dr), abs(dc))
    if n == 0:
        return [(r0, c0)]
    cells = []
    for i in range(n + 1):
        t = i / n
        cells.append((r0 + math.floor(t * dr + 0.5), c0 + math.floor(t * dc + 0.5)))
    return cells


def ray_circle_distance(ox: float, oy: float, dx: float, dy: float,
                        cx: float, cy: float, radius: float) -> float:
    """Distance along the unit ray to the first circle intersection, or inf."""
    fx, fy = ox - cx, oy - cy
    b = fx * dx + fy * dy
    disc = b * b - (fx * fx + fy * fy - radius * radius)
    if disc < 0.0:
        return math.inf
    t = -b - math.sqrt(disc)
    return t if t > 1e-12 else math.inf


def octile_distance(r0: int, c0: int, r1: int, c1: int) -> float:
    """8-connected lower-bound distance in cell units (unit straight steps)."""
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    lo, hi = (dr, dc) if dr < dc else (dc, dr)
    return hi + (math.sqrt(2.0) - 1.0) * lo
