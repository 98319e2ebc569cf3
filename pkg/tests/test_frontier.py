from __future__ import annotations

import numpy as np

from multinav.frontier import find_frontiers, select_frontier
from multinav.mapping import FREE_SPACE, OCCUPIED, UNEXPLORED, OccupancyMap
from oracles import brute_force_frontiers


def _map_from(grid):
    arr = np.array(grid, dtype=np.uint8)
    return OccupancyMap(grid=arr, resolution=0.1, origin=(0.0, 0.0))


def test_fully_unexplored_map_has_no_frontiers():
    occ = _map_from(np.zeros((12, 12)))
    assert find_frontiers(occ) == []
    assert select_frontier([]) is None


def test_free_disk_in_unexplored_sea():
    grid = np.zeros((21, 21), dtype=np.uint8)
    rr, cc = np.mgrid[0:21, 0:21]
    disk = (rr - 10) ** 2 + (cc - 10) ** 2 <= 36
    grid[disk] = FREE_SPACE
    occ = _map_from(grid)
    clusters = find_frontiers(occ)
    assert len(clusters) == 1
    got = {tuple(c) for c in clusters[0].cells}
    # The cluster is exactly the disk's boundary ring: free cells adjacent
    # to the unexplored outside.
    ring = set()
    for r in range(21):
        for c in range(21):
            if not disk[r, c]:
                continue
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    if (dr or dc) and not disk[r + dr, c + dc]:
                        ring.add((r, c))
    assert got == ring


def test_matches_brute_force_on_random_maps():
    rng = np.random.default_rng(31)
    for _ in range(40):
        grid = rng.choice([UNEXPLORED, FREE_SPACE, OCCUPIED],
                          size=(24, 30), p=[0.4, 0.4, 0.2]).astype(np.uint8)
        occ = _map_from(grid)
        got = {frozenset(tuple(c) for c in cl.cells)
               for cl in find_frontiers(occ)}
        expected = set(brute_force_frontiers(grid))
        assert got == expected


def test_bbox_window_gives_identical_clusters():
    rng = np.random.default_rng(32)
    for _ in range(10):
        grid = np.zeros((40, 40), dtype=np.uint8)
        sub = rng.choice([UNEXPLORED, FREE_SPACE, OCCUPIED],
                         size=(16, 16), p=[0.3, 0.5, 0.2]).astype(np.uint8)
        grid[10:26, 12:28] = sub
        occ = _map_from(grid)
        full = find_frontiers(occ)
        rs, cs = np.nonzero(grid)
        if rs.size == 0:
            continue
        bbox = (rs.min() - 1, rs.max() + 1, cs.min() - 1, cs.max() + 1)
        windowed = find_frontiers(occ, bbox=bbox)
        as_sets = lambda cls: {frozenset(map(tuple, cl.cells)) for cl in cls}
        assert as_sets(full) == as_sets(windowed)
        reps_f = {cl.representative for cl in full}
        reps_w = {cl.representative for cl in windowed}
        assert reps_f == reps_w


def test_representative_is_member_nearest_centroid():
    grid = np.zeros((10, 10), dtype=np.uint8)
    grid[2, 2:7] = FREE_SPACE          # a line; unexplored neighbors above
    occ = _map_from(grid)
    clusters = find_frontiers(occ)
    assert len(clusters) == 1
    assert clusters[0].representative == (2, 4)


def test_select_frontier_rules():
    grid = np.zeros((30, 30), dtype=np.uint8)
    grid[5, 1:9] = FREE_SPACE           # size-8 cluster
    grid[20, 1:4] = FREE_SPACE          # size-3 cluster
    occ = _map_from(grid)
    clusters = find_frontiers(occ)
    sizes = sorted(cl.size for cl in clusters)
    assert sizes == [3, 8]
    big = max(clusters, key=lambda cl: cl.size)
    assert select_frontier(clusters) == big.representative


def test_select_frontier_tie_breaks_row_major():
    grid = np.zeros((30, 30), dtype=np.uint8)
    grid[5, 1:8] = FREE_SPACE           # size-7, representative (5, 4)
    grid[20, 1:8] = FREE_SPACE          # size-7, representative (20, 4)
    occ = _map_from(grid)
    clusters = find_frontiers(occ)
    assert select_frontier(clusters) == (5, 4)
