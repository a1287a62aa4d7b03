"""Static synthetic worlds and vectorised ray casting against them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose2
from ..grid import OCCUPIED, FREE, OccupancyGrid

WALL_HEIGHT = 2.5


@dataclass(frozen=True)
class Box:
    """Axis-aligned obstacle standing on the floor."""

    x0: float
    y0: float
    x1: float
    y1: float
    height: float = WALL_HEIGHT

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0 and self.height > 0):
            raise ValueError(f"degenerate box {self}")

    def contains(self, x: float, y: float, margin: float = 0.0) -> bool:
        return (self.x0 - margin <= x <= self.x1 + margin) and (self.y0 - margin <= y <= self.y1 + margin)


@dataclass(frozen=True)
class Table(Box):
    height: float = 0.75


@dataclass(frozen=True)
class Polyline:
    points: tuple[tuple[float, float], ...]
    height: float = WALL_HEIGHT

    def segments(self):
        return list(zip(self.points[:-1], self.points[1:]))


@dataclass(frozen=True)
class WorldObject:
    name: str
    position: tuple[float, float, float]
    radius: float = 0.08


@dataclass
class World:
    walls: list[Box] = field(default_factory=list)
    tables: list[Table] = field(default_factory=list)
    objects: list[WorldObject] = field(default_factory=list)
    polylines: list[Polyline] = field(default_factory=list)
    robot_start: Pose2 = field(default_factory=lambda: Pose2(0.0, 0.0, 0.0))

    def validate(self) -> None:
        for obj in self.objects:
            x, y, _ = obj.position
            if self.tables and not any(t.contains(x, y) for t in self.tables):
                raise ValueError(f"object '{obj.name}' at ({x}, {y}) is not on any table")
        if self.collides(self.robot_start.x, self.robot_start.y):
            raise ValueError("robot_start is inside an obstacle")

    def bounds(self, margin: float = 1.0) -> tuple[float, float, float, float]:
        xs, ys = [self.robot_start.x], [self.robot_start.y]
        for b in [*self.walls, *self.tables]:
            xs += [b.x0, b.x1]
            ys += [b.y0, b.y1]
        for pl in self.polylines:
            xs += [p[0] for p in pl.points]
            ys += [p[1] for p in pl.points]
        return min(xs) - margin, min(ys) - margin, max(xs) + margin, max(ys) + margin

    def collides(self, x: float, y: float, margin: float = 0.0) -> bool:
        if any(b.contains(x, y, margin) for b in [*self.walls, *self.tables]):
            return True
        for pl in self.polylines:
            for a, b in pl.segments():
                if _point_segment_distance((x, y), a, b) <= margin:
                    return True
        return False

    def objects_of(self, name: str) -> list[WorldObject]:
        return [o for o in self.objects if o.name.lower() == name.lower()]

    def empty_grid(self, resolution: float = 0.1, margin: float = 1.0) -> OccupancyGrid:
        x0, y0, x1, y1 = self.bounds(margin)
        w = int(math.ceil((x1 - x0) / resolution))
        h = int(math.ceil((y1 - y0) / resolution))
        return OccupancyGrid(w, h, resolution, Pose2(x0, y0, 0.0))

    def truth_grid(self, resolution: float = 0.1, margin: float = 1.0) -> OccupancyGrid:
        """FREE/OCCUPIED raster; a cell is occupied if any obstacle overlaps it."""
        g = self.empty_grid(resolution, margin)
        g.cells[:] = FREE
        for b in [*self.walls, *self.tables]:
            c0, r0 = g.world_to_cell(b.x0, b.y0)
            c1, r1 = g.world_to_cell(b.x1, b.y1)
            g.cells[max(r0, 0):r1 + 1, max(c0, 0):c1 + 1] = OCCUPIED
        for pl in self.polylines:
            for a, b in pl.segments():
                n = int(math.ceil(math.hypot(b[0] - a[0], b[1] - a[1]) / (resolution / 4))) + 1
                xs, ys = np.linspace(a[0], b[0], n), np.linspace(a[1], b[1], n)
                cols, rows = g.world_to_cell(xs, ys)
                ok = g.in_bounds(cols, rows)
                g.cells[rows[ok], cols[ok]] = OCCUPIED
        return g


def _point_segment_distance(p, a, b) -> float:
    p, a, b = (np.asarray(v, dtype=float) for v in (p, a, b))
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


class Raycaster:
    """Nearest-hit queries against a :class:`World`.

    Hit ids enumerate boxes (walls then tables), then object spheres, then
    polyline segments. The floor (z = 0) absorbs rays: returns there are
    treated as misses.
    """

    def __init__(self, world: World):
        self.world = world
        boxes = [*world.walls, *world.tables]
        self.n_walls = len(world.walls)
        self.n_boxes = len(boxes)
        self.box_lo = np.array([[b.x0, b.y0, 0.0] for b in boxes]).reshape(-1, 3)
        self.box_hi = np.array([[b.x1, b.y1, b.height] for b in boxes]).reshape(-1, 3)
        self.spheres = np.array([[*o.position, o.radius] for o in world.objects]).reshape(-1, 4)
        segs, heights = [], []
        for pl in world.polylines:
            for a, b in pl.segments():
                segs.append([*a, *b])
                heights.append(pl.height)
        self.segments = np.array(segs, dtype=float).reshape(-1, 4)
        self.segment_heights = np.array(heights, dtype=float)
        self.sphere_offset = self.n_boxes
        self.segment_offset = self.n_boxes + len(self.spheres)
        self.table_footprints = {
            self.n_walls + i: (t.x0, t.y0, t.x1, t.y1) for i, t in enumerate(world.tables)
        }

    def cast(self, origin, dirs: np.ndarray, max_range: float = math.inf,
             skip: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Distance and hit id of the first surface along each unit direction.

        Misses come back as ``inf`` / -1. ``skip`` excludes one hit id.
        """
        o = np.asarray(origin, dtype=float)
        d = np.asarray(dirs, dtype=float).reshape(-1, 3)
        n = len(d)
        best_t = np.full(n, np.inf)
        best_id = np.full(n, -1, dtype=np.int64)

        if self.n_boxes:
            with np.errstate(divide="ignore", invalid="ignore"):
                inv = 1.0 / d
                t1 = (self.box_lo[None, :, :] - o) * inv[:, None, :]
                t2 = (self.box_hi[None, :, :] - o) * inv[:, None, :]
                tmin = np.minimum(t1, t2).max(axis=2)
                tmax = np.maximum(t1, t2).min(axis=2)
                hit = (tmax >= tmin) & (tmin > 1e-9)
            t = np.where(hit, tmin, np.inf)
            if skip is not None and skip < self.n_boxes:
                t[:, skip] = np.inf
            j = np.argmin(t, axis=1)
            tb = t[np.arange(n), j]
            better = tb < best_t
            best_t[better], best_id[better] = tb[better], j[better]

        if len(self.spheres):
            oc = o - self.spheres[:, :3]  # (k, 3)
            bq = d @ oc.T  # (n, k)
            cq = (oc ** 2).sum(axis=1) - self.spheres[:, 3] ** 2
            disc = bq ** 2 - cq
            with np.errstate(invalid="ignore"):
                t = -bq - np.sqrt(disc)
            t = np.where((disc >= 0) & (t > 1e-9), t, np.inf)
            if skip is not None and self.sphere_offset <= skip < self.segment_offset:
                t[:, skip - self.sphere_offset] = np.inf
            j = np.argmin(t, axis=1)
            ts = t[np.arange(n), j]
            better = ts < best_t
            best_t[better], best_id[better] = ts[better], j[better] + self.sphere_offset

        if len(self.segments):
            a, b = self.segments[:, :2], self.segments[:, 2:]
            e = b - a  # (s, 2)
            dx, dy = d[:, 0:1], d[:, 1:2]
            denom = dx * e[:, 1] - dy * e[:, 0]  # (n, s)
            ao = a - o[:2]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (ao[:, 0] * e[:, 1] - ao[:, 1] * e[:, 0]) / denom
                u = (ao[:, 0] * dy - ao[:, 1] * dx) / denom
            z = o[2] + t * d[:, 2:3]
            ok = (np.abs(denom) > 1e-12) & (t > 1e-9) & (u >= 0) & (u <= 1) & (z >= 0) & \
                 (z <= self.segment_heights)
            t = np.where(ok, t, np.inf)
            if skip is not None and skip >= self.segment_offset:
                t[:, skip - self.segment_offset] = np.inf
            j = np.argmin(t, axis=1)
            tg = t[np.arange(n), j]
            better = tg < best_t
            best_t[better], best_id[better] = tg[better], j[better] + self.segment_offset

        with np.errstate(divide="ignore"):
            t_floor = np.where(d[:, 2] < 0, -o[2] / d[:, 2], np.inf)
        absorbed = (t_floor < best_t) | (best_t > max_range)
        best_t[absorbed] = np.inf
        best_id[absorbed] = -1
        return best_t, best_id
