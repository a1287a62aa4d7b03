"""Random multi-room worlds: a room lattice joined by doors along a random
spanning tree, one table per room, distractors and a single target.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Pose2
from .world import Box, Table, World, WorldObject

WALL_T = 0.2
DOOR_W = 1.2
OBJECT_RADIUS = 0.08


@dataclass(frozen=True)
class WorldGenParams:
    rooms: int = 4
    size: tuple[float, float] = (16.0, 12.0)
    target: str = "bottle"
    radius: float | None = None  # keep the target within this distance of the start
    distractors: tuple[str, ...] = ("cup", "book", "can")
    extra_door_p: float = 0.3


def _room_lattice(n: int) -> tuple[int, int]:
    rows = max(r for r in range(1, int(math.isqrt(n)) + 1) if n % r == 0)
    return rows, n // rows


def _wall_with_door(horizontal: bool, fixed: float, a: float, b: float, door_at: float | None) -> list[Box]:
    spans = [(a, b)] if door_at is None else [(a, door_at - DOOR_W / 2), (door_at + DOOR_W / 2, b)]
    out = []
    for s0, s1 in spans:
        if s1 - s0 <= 1e-6:
            continue
        if horizontal:
            out.append(Box(s0, fixed - WALL_T / 2, s1, fixed + WALL_T / 2))
        else:
            out.append(Box(fixed - WALL_T / 2, s0, fixed + WALL_T / 2, s1))
    return out


def _clear_of(rect, boxes, margin: float) -> bool:
    x0, y0, x1, y1 = rect
    return all(x1 + margin <= b.x0 or b.x1 + margin <= x0 or y1 + margin <= b.y0 or b.y1 + margin <= y0
               for b in boxes)


def _spot_on(table: Table, rng: np.random.Generator, inset: float = 0.15) -> tuple[float, float]:
    return (table.x0 + inset + (table.x1 - table.x0 - 2 * inset) * rng.random(),
            table.y0 + inset + (table.y1 - table.y0 - 2 * inset) * rng.random())


def generate_world(params: WorldGenParams, seed: int) -> World:
    rng = np.random.default_rng(seed)
    rows, cols = _room_lattice(params.rooms)
    W, H = params.size
    cw, ch = W / cols, H / rows
    walls = [Box(-WALL_T / 2, -WALL_T / 2, W + WALL_T / 2, WALL_T / 2),
             Box(-WALL_T / 2, H - WALL_T / 2, W + WALL_T / 2, H + WALL_T / 2),
             Box(-WALL_T / 2, WALL_T / 2, WALL_T / 2, H - WALL_T / 2),
             Box(W - WALL_T / 2, WALL_T / 2, W + WALL_T / 2, H - WALL_T / 2)]

    # spanning tree over the room lattice (randomised DFS)
    def nbrs(r, c):
        return [(r + dr, c + dc) for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0))
                if 0 <= r + dr < rows and 0 <= c + dc < cols]

    doors: set[frozenset] = set()
    seen, stack = {(0, 0)}, [(0, 0)]
    while stack:
        cur = stack[-1]
        options = [n for n in nbrs(*cur) if n not in seen]
        if not options:
            stack.pop()
            continue
        nxt = options[int(rng.integers(len(options)))]
        doors.add(frozenset((cur, nxt)))
        seen.add(nxt)
        stack.append(nxt)

    door_centres = []
    for r in range(rows):
        for c in range(cols):
            for (nr, nc) in ((r, c + 1), (r + 1, c)):
                if nr >= rows or nc >= cols:
                    continue
                edge = frozenset(((r, c), (nr, nc)))
                has_door = edge in doors or rng.random() < params.extra_door_p
                if nc == c + 1:  # vertical wall between columns
                    a, b, x = r * ch + WALL_T / 2, (r + 1) * ch - WALL_T / 2, (c + 1) * cw
                    at = a + 1.0 + (b - a - 2.0) * rng.random() if has_door else None
                    walls += _wall_with_door(False, x, a, b, at)
                    if at is not None:
                        door_centres.append((x, at))
                else:
                    a, b, y = c * cw + WALL_T / 2, (c + 1) * cw - WALL_T / 2, (r + 1) * ch
                    at = a + 1.0 + (b - a - 2.0) * rng.random() if has_door else None
                    walls += _wall_with_door(True, y, a, b, at)
                    if at is not None:
                        door_centres.append((at, y))

    start = Pose2(cw / 2, ch / 2, float(rng.uniform(-math.pi, math.pi)))
    tables: list[Table] = []
    for r in range(rows):
        for c in range(cols):
            table = _place_table(rng, (c * cw, r * ch, (c + 1) * cw, (r + 1) * ch), start, tables, door_centres)
            if table is not None:
                tables.append(table)

    world = World(walls=walls, tables=tables, objects=[], robot_start=start)
    objects = []
    for name in params.distractors:
        if not tables:
            break
        t = tables[int(rng.integers(len(tables)))]
        x, y = _spot_on(t, rng)
        objects.append(WorldObject(name, (x, y, t.height + OBJECT_RADIUS), OBJECT_RADIUS))
    world.objects = objects
    place_target(world, params.target, params.radius, rng, door_centres)
    world.validate()
    return world


def _place_table(rng, room, start: Pose2, tables, doors, centre=None, radius=None) -> Table | None:
    for _ in range(200):
        w, d = rng.uniform(0.8, 1.4), rng.uniform(0.6, 0.9)
        if rng.random() < 0.5:
            w, d = d, w
        if centre is None:
            rx0, ry0, rx1, ry1 = room
            cx = rng.uniform(rx0 + 0.9 + w / 2, rx1 - 0.9 - w / 2) if rx1 - rx0 > 1.8 + w else None
            cy = rng.uniform(ry0 + 0.9 + d / 2, ry1 - 0.9 - d / 2) if ry1 - ry0 > 1.8 + d else None
            if cx is None or cy is None:
                return None
        else:
            ang, rad = rng.uniform(-math.pi, math.pi), radius * math.sqrt(rng.random())
            cx, cy = centre[0] + rad * math.cos(ang), centre[1] + rad * math.sin(ang)
        rect = (cx - w / 2, cy - d / 2, cx + w / 2, cy + d / 2)
        if math.hypot(cx - start.x, cy - start.y) < 1.2 + max(w, d) / 2:
            continue
        if any(math.hypot(cx - dx, cy - dy) < 1.6 + max(w, d) / 2 for dx, dy in doors):
            continue
        if not _clear_of(rect, tables, 0.9):
            continue
        return Table(*rect)
    return None


def place_target(world: World, target: str, radius: float | None, rng: np.random.Generator,
                 doors=None) -> World:
    """Put exactly one ``target`` object on a table, within ``radius`` of the start if given.

    Existing objects of that class are removed. A fresh table is added when
    no existing table has a spot inside the radius.
    """
    world.objects = [o for o in world.objects if o.name.lower() != target.lower()]
    start = world.robot_start
    order = rng.permutation(len(world.tables)) if world.tables else []
    for i in order:
        t = world.tables[int(i)]
        for _ in range(20):
            x, y = _spot_on(t, rng)
            if radius is None or math.hypot(x - start.x, y - start.y) <= radius - 0.1:
                world.objects.append(WorldObject(target, (x, y, t.height + OBJECT_RADIUS), OBJECT_RADIUS))
                return world
    if radius is None:
        raise ValueError("world has no tables to hold the target")
    door_centres = doors if doors is not None else _door_gaps(world)
    bx0, by0, bx1, by1 = world.bounds(margin=0.0)
    for _ in range(100):
        t = _place_table(rng, None, start, world.tables, door_centres, centre=(start.x, start.y),
                         radius=max(radius - 0.3, 0.5))
        if t is None:
            continue
        if not (bx0 + 1.0 <= t.x0 and t.x1 <= bx1 - 1.0 and by0 + 1.0 <= t.y0 and t.y1 <= by1 - 1.0):
            continue
        if not _clear_of((t.x0, t.y0, t.x1, t.y1), world.walls, 0.9):
            continue
        x, y = _spot_on(t, rng)
        if math.hypot(x - start.x, y - start.y) > radius - 0.1:
            continue
        world.tables.append(t)
        world.objects.append(WorldObject(target, (x, y, t.height + OBJECT_RADIUS), OBJECT_RADIUS))
        return world
    raise ValueError(f"could not place '{target}' within {radius} m of the start")


def _door_gaps(world: World) -> list[tuple[float, float]]:
    """Approximate door centres: midpoints between collinear wall pieces with a door-sized gap."""
    gaps = []
    walls = world.walls
    for a in walls:
        for b in walls:
            if a is b:
                continue
            if abs(a.y0 - b.y0) < 1e-6 and abs(a.y1 - b.y1) < 1e-6 and 0 < b.x0 - a.x1 <= DOOR_W + 1e-6:
                gaps.append(((a.x1 + b.x0) / 2, (a.y0 + a.y1) / 2))
            if abs(a.x0 - b.x0) < 1e-6 and abs(a.x1 - b.x1) < 1e-6 and 0 < b.y0 - a.y1 <= DOOR_W + 1e-6:
                gaps.append(((a.x0 + a.x1) / 2, (a.y1 + b.y0) / 2))
    return gaps
