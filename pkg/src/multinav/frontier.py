"""Frontier extraction for exploration targets.

A frontier cell is a free cell 8-adjacent to at least one unexplored cell;
clusters are maximal 8-connected sets of frontier cells. The exploration
policy steers toward the cluster with the largest cell count, i.e. the
largest boundary with unexplored space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation, label

from .mapping import FREE_SPACE, UNEXPLORED, OccupancyMap

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass
class FrontierCluster:
    cells: np.ndarray                  # (K, 2) row/col pairs, row-major order
    representative: tuple[int, int]    # member nearest the cluster centroid

    @property
    def size(self) -> int:
        return len(self.cells)


def _representative(cells: np.ndarray) -> tuple[int, int]:
    centroid = cells.mean(axis=0)
    d2 = ((cells - centroid) ** 2).sum(axis=1)
    # Primary: distance to centroid; ties: row-major (row, then column).
    order = np.lexsort((cells[:, 1], cells[:, 0], d2))
    r, c = cells[order[0]]
    return (int(r), int(c))


def find_frontiers(occupancy: OccupancyMap,
                   bbox: tuple[int, int, int, int] | None = None
                   ) -> list[FrontierCluster]:
    """All maximal frontier clusters, ordered by first appearance row-major.

    bbox (r0, r1, c0, c1) optionally restricts the scan to a window known to
    contain every free cell plus a one-cell ring; the result is identical to
    the full-map scan because frontier cells only exist next to free space.
    """
    grid = occupancy.grid
    if bbox is not None:
        r0, r1, c0, c1 = bbox
        r0, c0 = max(r0, 0), max(c0, 0)
        r1, c1 = min(r1, occupancy.size - 1), min(c1, occupancy.size - 1)
        grid = grid[r0:r1 + 1, c0:c1 + 1]
    else:
        r0, c0 = 0, 0
    frontier = (grid == FREE_SPACE) & binary_dilation(grid == UNEXPLORED,
                                                      structure=_EIGHT)
    labels, count = label(frontier, structure=_EIGHT.astype(int))
    if count == 0:
        return []
    rs, cs = np.nonzero(frontier)
    labs = labels[rs, cs]
    cells = np.stack([rs + r0, cs + c0], axis=1)
    order = np.argsort(labs, kind="stable")   # keeps row-major order in-group
    cells = cells[order]
    sorted_labs = labs[order]
    starts = np.searchsorted(sorted_labs, np.arange(1, count + 1), side="left")
    ends = np.searchsorted(sorted_labs, np.arange(1, count + 1), side="right")
    clusters = []
    for i in range(count):
        group = cells[starts[i]:ends[i]]
        clusters.append(FrontierCluster(
            cells=group, representative=_representative(group)))
    return clusters


def select_frontier(clusters: list[FrontierCluster]) -> tuple[int, int] | None:
    """Representative of the largest cluster; ties break on the smaller
    row-major representative. None when there are no clusters."""
    if not clusters:
        return None
    return min(clusters, key=lambda cl: (-cl.size, cl.representative)).representative
