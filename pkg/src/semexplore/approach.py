"""Pre-manipulation base pose at the edge of a support surface."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .geometry import Pose2
from .grid import OccupancyGrid
from .planning import PathField, PathResult

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)
_STEPS = [(0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1)]


class SurfaceNotFound(LookupError):
    pass


class DegenerateWindow(ValueError):
    pass


@dataclass(frozen=True)
class ApproachParams:
    edge_offset: float = 0.35
    candidate_spacing: float = 0.15
    max_candidates: int = 32
    window_radius: float = 0.4
    search_cells: int = 2

    def __post_init__(self):
        if min(self.edge_offset, self.candidate_spacing, self.window_radius) <= 0 or self.max_candidates < 1:
            raise ValueError("approach parameters must be positive")


@dataclass
class ApproachResult:
    pose: Pose2
    path: PathResult
    edge_point: np.ndarray
    normal: np.ndarray


def isolate_surface(m: OccupancyGrid, object_xy, search_cells: int = 2) -> np.ndarray:
    """Mask of the 8-connected occupied component under (or next to) the object."""
    occ = m.occupied
    labels, _ = ndimage.label(occ, structure=EIGHT_CONNECTED)
    col, row = m.world_to_cell(object_xy[0], object_xy[1])
    if m.in_bounds(col, row) and occ[row, col]:
        return labels == labels[row, col]
    r0, r1 = max(row - search_cells, 0), min(row + search_cells + 1, m.height)
    c0, c1 = max(col - search_cells, 0), min(col + search_cells + 1, m.width)
    best = None
    if r0 < r1 and c0 < c1:
        for r, c in zip(*np.nonzero(occ[r0:r1, c0:c1])):
            d = math.hypot(r + r0 - row, c + c0 - col)
            if d <= search_cells and (best is None or d < best[0]):
                best = (d, r + r0, c + c0)
    if best is None:
        raise SurfaceNotFound(f"no occupied cell within {search_cells} cells of {tuple(object_xy)}")
    return labels == labels[best[1], best[2]]


def boundary(region: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Region cells with a 4-neighbour outside the region, in contour order.

    Ordering walks 8-adjacent boundary cells and jumps to the nearest
    unvisited one when a walk dead-ends (thick or branching outlines).
    """
    pad = np.pad(region, 1, constant_values=False)
    interior = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    rows, cols = np.nonzero(region & ~interior)
    if len(rows) == 0:
        return rows, cols
    remaining = set(zip(rows.tolist(), cols.tolist()))
    cur = (int(rows[0]), int(cols[0]))
    remaining.discard(cur)
    order = [cur]
    while remaining:
        nxt = next(((cur[0] + dr, cur[1] + dc) for dr, dc in _STEPS
                    if (cur[0] + dr, cur[1] + dc) in remaining), None)
        if nxt is None:
            nxt = min(remaining, key=lambda rc: ((rc[0] - cur[0]) ** 2 + (rc[1] - cur[1]) ** 2, rc))
        remaining.discard(nxt)
        order.append(nxt)
        cur = nxt
    arr = np.array(order)
    return arr[:, 0], arr[:, 1]


def edge_normal(window, interior_point) -> np.ndarray:
    """Unit normal of a boundary window by PCA, pointing away from ``interior_point``."""
    pts = np.asarray(window, dtype=float).reshape(-1, 2)
    if len(pts) < 2 or np.allclose(pts, pts[0]):
        raise DegenerateWindow("need at least two distinct points")
    centered = pts - pts.mean(axis=0)
    _, vecs = np.linalg.eigh(centered.T @ centered / len(pts))
    n = vecs[:, 0]
    if np.dot(n, pts.mean(axis=0) - np.asarray(interior_point, dtype=float)) < 0:
        n = -n
    return n / np.linalg.norm(n)


def approach_candidates(bx: np.ndarray, by: np.ndarray, object_xy, spacing: float, limit: int) -> list[int]:
    """Boundary indices nearest the object first, thinned to ``spacing``."""
    d = np.hypot(bx - object_xy[0], by - object_xy[1])
    picked: list[int] = []
    for i in np.argsort(d, kind="stable"):
        if all(math.hypot(bx[i] - bx[j], by[i] - by[j]) >= spacing for j in picked):
            picked.append(int(i))
            if len(picked) == limit:
                break
    return picked


def approach_pose(m: OccupancyGrid, object_xy, params: ApproachParams, robot: Pose2,
                  inflation: float = 0.25) -> ApproachResult | None:
    """First reachable pose facing the surface from just outside its edge.

    Raises :class:`SurfaceNotFound` if no surface is near ``object_xy``;
    returns None once every candidate edge point has been tried.
    """
    region = isolate_surface(m, object_xy, params.search_cells)
    br, bc = boundary(region)
    bx, by = m.cell_to_world(bc, br)
    bx, by = np.atleast_1d(bx), np.atleast_1d(by)
    rr, rc = np.nonzero(region)
    rx, ry = m.cell_to_world(rc, rr)
    region_xy = np.column_stack([np.atleast_1d(rx), np.atleast_1d(ry)])
    region_tree = cKDTree(region_xy)
    edge_xy = np.column_stack([bx, by])
    edge_tree = cKDTree(edge_xy)
    field_ = PathField(m, robot, inflation)

    for i in approach_candidates(bx, by, object_xy, params.candidate_spacing, params.max_candidates):
        b = edge_xy[i]
        window = edge_xy[edge_tree.query_ball_point(b, params.window_radius)]
        local = region_xy[region_tree.query_ball_point(b, params.window_radius)].mean(axis=0)
        try:
            n = edge_normal(window, local)
        except DegenerateWindow:
            continue
        signs = (1.0, -1.0) if abs(np.dot(n, window.mean(axis=0) - local)) < 1e-9 else (1.0,)
        for sgn in signs:
            normal = sgn * n
            p = b + normal * params.edge_offset
            gap, _ = region_tree.query(p)
            if abs(gap - params.edge_offset) > m.resolution:
                continue
            col, row = m.world_to_cell(p[0], p[1])
            if not (m.in_bounds(col, row) and field_.ok[row, col]):
                continue
            pose = Pose2(p[0], p[1], math.atan2(-normal[1], -normal[0]))
            res = field_.path_to(pose)
            if res.feasible:
                return ApproachResult(pose, res, b, normal)
    return None
