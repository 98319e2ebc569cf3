"""Grid-level navigation primitives shared by the simulator, generator, and
metrics: obstacle inflation, shortest-path distance fields, and geodesic
distance between world points.

All shortest paths here are 8-connected with straight steps costing one
resolution and diagonal steps sqrt(2) resolutions. Diagonal moves are
disallowed when either adjacent orthogonal cell is blocked, so paths never
cut corners; the planner uses the same rule, keeping both metrics identical.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.ndimage import binary_dilation
from scipy.sparse.csgraph import dijkstra as _csgraph_dijkstra

from .world import WorldGrid

SQRT2 = math.sqrt(2.0)


def inflate(mask: np.ndarray, radius_cells: int) -> np.ndarray:
    """Chebyshev dilation of a boolean obstacle mask by radius_cells."""
    if radius_cells <= 0:
        return mask.copy()
    size = 2 * radius_cells + 1
    return binary_dilation(mask, structure=np.ones((size, size), dtype=bool))


def inflation_radius_cells(agent_radius: float, resolution: float) -> int:
    return int(math.ceil(agent_radius / resolution - 1e-12))


def traversable_mask(world: WorldGrid) -> np.ndarray:
    """Cells whose center the agent can occupy on the inflated grid."""
    radius = inflation_radius_cells(world.agent_radius, world.resolution)
    return ~inflate(world.obstacle_mask(), radius)


def _grid_graph(trav: np.ndarray, resolution: float) -> sparse.csr_matrix:
    rows, cols = trav.shape
    n = rows * cols
    idx = np.arange(n).reshape(rows, cols)
    src_list, dst_list, w_list = [], [], []

    def pairs(shift_r, shift_c):
        # Cells a for which a + shift stays in bounds, and their partners b.
        a = idx[max(0, -shift_r):rows - max(0, shift_r),
                max(0, -shift_c):cols - max(0, shift_c)].ravel()
        return a, a + shift_r * cols + shift_c

    flat = trav.ravel()
    # Orthogonal edges (one direction each; graph treated as undirected).
    for shift_r, shift_c in ((0, 1), (1, 0)):
        a, b = pairs(shift_r, shift_c)
        ok = flat[a] & flat[b]
        src_list.append(a[ok])
        dst_list.append(b[ok])
        w_list.append(np.full(int(ok.sum()), resolution))
    # Diagonals, gated on both orthogonal corner cells being traversable.
    for shift_r, shift_c in ((1, 1), (1, -1)):
        a, b = pairs(shift_r, shift_c)
        ok = flat[a] & flat[b] & flat[a + shift_c] & flat[a + cols]
        src_list.append(a[ok])
        dst_list.append(b[ok])
        w_list.append(np.full(int(ok.sum()), resolution * SQRT2))

    src = np.concatenate(src_list)
    dst = np.concatenate(dst_list)
    w = np.concatenate(w_list)
    return sparse.csr_matrix((w, (src, dst)), shape=(n, n))


def distance_field(trav: np.ndarray, resolution: float,
                   source: tuple[int, int]) -> np.ndarray:
    """Geodesic distance in meters from source to every cell (inf unreached)."""
    rows, cols = trav.shape
    if not trav[source]:
        return np.full(trav.shape, np.inf)
    graph = _grid_graph(trav, resolution)
    dist = _csgraph_dijkstra(graph, directed=False,
                             indices=source[0] * cols + source[1])
    return dist.reshape(trav.shape)


def snap_to_traversable(trav: np.ndarray, cell: tuple[int, int],
                        max_radius: int) -> tuple[int, int] | None:
    """Nearest traversable cell by squared Euclidean cell distance, searching
    Chebyshev rings out to max_radius; ties break on row-major index."""
    r0, c0 = cell
    rows, cols = trav.shape
    if 0 <= r0 < rows and 0 <= c0 < cols and trav[r0, c0]:
        return (r0, c0)
    best = None
    best_key = None
    for radius in range(1, max_radius + 1):
        r_lo, r_hi = max(r0 - radius, 0), min(r0 + radius, rows - 1)
        c_lo, c_hi = max(c0 - radius, 0), min(c0 + radius, cols - 1)
        sub = trav[r_lo:r_hi + 1, c_lo:c_hi + 1]
        rs, cs = np.nonzero(sub)
        if rs.size:
            rr, cc = rs + r_lo, cs + c_lo
            d2 = (rr - r0) ** 2 + (cc - c0) ** 2
            order = np.lexsort((rr * cols + cc, d2))
            k = order[0]
            key = (int(d2[k]), int(rr[k]) * cols + int(cc[k]))
            if best_key is None or key < best_key:
                best, best_key = (int(rr[k]), int(cc[k])), key
        if best is not None and best_key[0] <= radius * radius:
            # No farther ring can beat a hit within this radius.
            return best
    return best


def geodesic_distance(world: WorldGrid, a: tuple[float, float],
                      b: tuple[float, float],
                      snap_radius: int | None = None) -> float:
    """Shortest-path length in meters between two world points on the
    agent-radius-inflated free grid; math.inf when unreachable.

    Endpoints whose cell is blocked (e.g. a goal cylinder center) snap to the
    nearest traversable cell within snap_radius cells.
    """
    trav = traversable_mask(world)
    if snap_radius is None:
        snap_radius = default_snap_radius(world)
    ca = snap_to_traversable(trav, world.point_to_cell(*a), snap_radius)
    cb = snap_to_traversable(trav, world.point_to_cell(*b), snap_radius)
    if ca is None or cb is None:
        return math.inf
    dist = distance_field(trav, world.resolution, ca)
    return float(dist[cb])


def default_snap_radius(world: WorldGrid) -> int:
    """Enough cells to escape a cylinder footprint plus inflation."""
    reach = world.cylinder_radius + world.agent_radius
    return int(math.ceil(reach / world.resolution)) + 2


def reachable_mask(trav: np.ndarray, source: tuple[int, int]) -> np.ndarray:
    """Cells connected to source on the traversable grid (8-connected)."""
    from scipy.ndimage import label

    labels, _ = label(trav, structure=np.ones((3, 3), dtype=int))
    if not trav[source]:
        return np.zeros_like(trav)
    return labels == labels[source]
