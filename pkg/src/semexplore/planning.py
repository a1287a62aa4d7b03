"""Shortest paths over the free space of an occupancy grid.

Stands in for the navigation stack's global planner: 8-connected moves over
known-free cells, diagonal moves cost sqrt(2) and may not cut corners,
occupied cells are inflated by a metric radius, unknown cells are blocked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .geometry import Pose2
from .grid import OccupancyGrid

SQRT2 = math.sqrt(2.0)


def inflated_obstacles(m: OccupancyGrid, inflation: float) -> np.ndarray:
    """Cells whose centre is within ``inflation`` metres of an occupied cell centre."""
    occ = m.occupied
    if not occ.any():
        return occ.copy()
    if inflation <= 0:
        return occ
    dist = ndimage.distance_transform_edt(~occ) * m.resolution
    return dist <= inflation


def traversable(m: OccupancyGrid, inflation: float) -> np.ndarray:
    return m.free & ~inflated_obstacles(m, inflation)


def _grid_graph(ok: np.ndarray):
    h, w = ok.shape
    ids = np.arange(h * w).reshape(h, w)
    rows, cols, costs = [], [], []

    def link(a_mask, a_ids, b_ids, cost):
        rows.append(a_ids[a_mask])
        cols.append(b_ids[a_mask])
        costs.append(np.full(int(a_mask.sum()), cost))

    link(ok[:, :-1] & ok[:, 1:], ids[:, :-1], ids[:, 1:], 1.0)
    link(ok[:-1, :] & ok[1:, :], ids[:-1, :], ids[1:, :], 1.0)
    # diagonals need both orthogonal cells open (no corner cutting)
    ortho_ne = ok[:-1, :-1] & ok[1:, 1:] & ok[:-1, 1:] & ok[1:, :-1]
    link(ortho_ne, ids[:-1, :-1], ids[1:, 1:], SQRT2)
    link(ortho_ne, ids[:-1, 1:], ids[1:, :-1], SQRT2)
    r, c, d = np.concatenate(rows), np.concatenate(cols), np.concatenate(costs)
    return coo_matrix((d, (r, c)), shape=(h * w, h * w)).tocsr()


@dataclass
class PathResult:
    feasible: bool
    length: float = math.inf
    waypoints: list = field(default_factory=list)


class PathField:
    """Single-source shortest-path distances from one start cell.

    Lets the goal selector test many candidates for the price of one search.
    """

    def __init__(self, m: OccupancyGrid, start: Pose2, inflation: float = 0.25):
        self.grid = m
        self.ok = traversable(m, inflation)
        col, row = m.world_to_cell(start.x, start.y)
        self.start_cell = (col, row)
        self.valid = bool(m.in_bounds(col, row))
        if not self.valid:
            return
        ok = self.ok.copy()
        ok[row, col] = True  # never strand the robot on its own cell
        graph = _grid_graph(ok)
        src = row * m.width + col
        dist, pred = dijkstra(graph, directed=False, indices=src, return_predecessors=True)
        self.dist = dist.reshape(m.height, m.width) * m.resolution
        self.pred = pred
        self.reachable_ok = ok & np.isfinite(self.dist)

    def _resolve_goal(self, col: int, row: int, tolerance: float):
        m = self.grid
        if m.in_bounds(col, row) and self.reachable_ok[row, col]:
            return col, row
        if tolerance <= 0:
            return None
        r = int(math.ceil(tolerance / m.resolution))
        r0, r1 = max(row - r, 0), min(row + r + 1, m.height)
        c0, c1 = max(col - r, 0), min(col + r + 1, m.width)
        if r0 >= r1 or c0 >= c1:
            return None
        rr, cc = np.mgrid[r0:r1, c0:c1]
        d = np.hypot(rr - row, cc - col) * m.resolution
        cand = self.reachable_ok[r0:r1, c0:c1] & (d <= tolerance)
        if not cand.any():
            return None
        key = np.where(cand, d, np.inf)
        flat = np.lexsort((self.dist[r0:r1, c0:c1].ravel(), key.ravel()))[0]
        return int(cc.ravel()[flat]), int(rr.ravel()[flat])

    def path_to(self, goal: Pose2, tolerance: float = 0.0) -> PathResult:
        if not self.valid:
            return PathResult(False)
        m = self.grid
        col, row = m.world_to_cell(goal.x, goal.y)
        if not m.in_bounds(col, row) and tolerance <= 0:
            return PathResult(False)
        cell = self._resolve_goal(col, row, tolerance)
        if cell is None:
            return PathResult(False)
        gc, gr = cell
        node = gr * m.width + gc
        cells = []
        src = self.start_cell[1] * m.width + self.start_cell[0]
        while node != src:
            cells.append(node)
            node = self.pred[node]
            if node < 0:
                return PathResult(False)
        cells.append(src)
        cells.reverse()
        waypoints = [m.cell_to_world(n % m.width, n // m.width) for n in cells]
        return PathResult(True, float(self.dist[gr, gc]), waypoints)


def plan_path(m: OccupancyGrid, start: Pose2, goal: Pose2, inflation: float = 0.25,
              goal_tolerance: float = 0.0) -> PathResult:
    """Shortest cell-centre path from ``start`` to ``goal``.

    With ``goal_tolerance`` > 0 an untraversable goal is replaced by the
    nearest reachable cell within that radius.
    """
    col, row = m.world_to_cell(goal.x, goal.y)
    if not m.in_bounds(col, row) and goal_tolerance <= 0:
        return PathResult(False)
    return PathField(m, start, inflation).path_to(goal, goal_tolerance)


def compress_path(waypoints: list) -> list:
    """Drop interior waypoints that continue in the same grid direction."""
    if len(waypoints) <= 2:
        return list(waypoints)
    out = [waypoints[0]]
    for prev, cur, nxt in zip(waypoints, waypoints[1:], waypoints[2:]):
        d1 = (round(cur[0] - prev[0], 9), round(cur[1] - prev[1], 9))
        d2 = (round(nxt[0] - cur[0], 9), round(nxt[1] - cur[1], 9))
        if d1 != d2:
            out.append(cur)
    out.append(waypoints[-1])
    return out
