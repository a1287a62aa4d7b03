"""Scenario files: JSON describing a world (or a world generator), the
prompt, sensor settings and parameter overrides.

Errors are reported as :class:`ScenarioError` with a 1-based line/column
pointing into the source text.
"""
from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from ..geometry import Pose2
from ..task import DEFAULT_CLASSES, TaskGraph, TaskParseError, UnknownClassError, parse, resolve_class, to_graph
from .episode import EpisodeParams
from .world import Box, Polyline, Table, World, WorldObject
from .worldgen import WorldGenParams, generate_world, place_target

DEFAULT_PROMPT = "Pick up the <p>bottle</p> and place it in the <p>blue box</p>."

# scenario "params" section -> path inside EpisodeParams
_SECTIONS = {
    "exploration": ("exploration",),
    "approach": ("approach",),
    "dbscan": ("aggregation", "dbscan"),
    "confidence": ("aggregation", "confidence"),
    "aggregation": ("aggregation",),
    "densify": ("semantic", "densify"),
    "voxel": ("semantic", "voxel"),
    "projection": ("semantic", "projection"),
    "episode": (),
}


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0, path: str = ""):
        self.message, self.line, self.column, self.path = message, line, column, path
        where = f"line {line}, column {column}" if line else "scenario"
        super().__init__(f"{where}: {message}" + (f" (at {path})" if path else ""))


@dataclass
class Scenario:
    prompt: str
    task: TaskGraph
    params: EpisodeParams
    seed: int = 0
    world: World | None = None
    generator: WorldGenParams | None = None
    vocabulary: dict[str, int] = dataclasses.field(default_factory=lambda: dict(DEFAULT_CLASSES))

    @property
    def target_class(self) -> str:
        return self.task.target_class

    def world_for(self, seed: int, radius: float | None = None) -> World:
        """World for one episode; with ``radius`` the target is re-placed within it."""
        if self.generator is not None:
            gp = dataclasses.replace(self.generator, target=self.target_class,
                                     radius=radius if radius is not None else self.generator.radius)
            return generate_world(gp, seed)
        world = copy.deepcopy(self.world)
        if radius is not None:
            place_target(world, self.target_class, radius, np.random.default_rng(seed))
            world.validate()
        return world


def _locate(text: str, path: tuple) -> tuple[int, int]:
    """Best-effort line/column of the innermost key in ``path``."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        j = text.find(json.dumps(key), pos)
        if j < 0:
            break
        pos = j
    line = text.count("\n", 0, pos) + 1
    return line, pos - (text.rfind("\n", 0, pos) + 1) + 1


class _Ctx:
    def __init__(self, text: str):
        self.text = text

    def fail(self, msg: str, path: tuple):
        line, col = _locate(self.text, path)
        raise ScenarioError(msg, line, col, ".".join(str(p) for p in path))


def _num(ctx, v, path, positive=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        ctx.fail(f"expected a finite number, got {v!r}", path)
    if positive and v <= 0:
        ctx.fail(f"expected a positive number, got {v!r}", path)
    return float(v)


def _rect(ctx, v, path, cls, extra=()):
    if isinstance(v, list):
        if len(v) not in (4, 5):
            ctx.fail("rectangle needs [x0, y0, x1, y1] (+ optional height)", path)
        vals = [_num(ctx, x, path) for x in v]
    elif isinstance(v, dict):
        keys = ["x0", "y0", "x1", "y1"]
        unknown = set(v) - set(keys) - {"height"}
        if unknown:
            ctx.fail(f"unknown keys {sorted(unknown)}", path + (sorted(unknown)[0],))
        if any(k not in v for k in keys):
            ctx.fail("rectangle needs x0, y0, x1, y1", path)
        vals = [_num(ctx, v[k], path + (k,)) for k in keys]
        if "height" in v:
            vals.append(_num(ctx, v["height"], path + ("height",), positive=True))
    else:
        ctx.fail("rectangle must be a list or an object", path)
    try:
        return cls(*vals)
    except ValueError as e:
        ctx.fail(str(e), path)


def _parse_world(ctx, w, path) -> World:
    if not isinstance(w, dict):
        ctx.fail("world must be an object", path)
    unknown = set(w) - {"walls", "tables", "objects", "polylines"}
    if unknown:
        ctx.fail(f"unknown keys {sorted(unknown)}", path + (sorted(unknown)[0],))
    walls = [_rect(ctx, b, path + ("walls", i), Box) for i, b in enumerate(w.get("walls", []))]
    tables = [_rect(ctx, b, path + ("tables", i), Table) for i, b in enumerate(w.get("tables", []))]
    objects = []
    for i, o in enumerate(w.get("objects", [])):
        p = path + ("objects", i)
        if not isinstance(o, dict) or "class" not in o or "position" not in o:
            ctx.fail("object needs 'class' and 'position'", p)
        pos = o["position"]
        if not isinstance(pos, list) or len(pos) != 3:
            ctx.fail("position must be [x, y, z]", p + ("position",))
        r = _num(ctx, o.get("radius", 0.08), p + ("radius",), positive=True)
        objects.append(WorldObject(str(o["class"]), tuple(_num(ctx, x, p + ("position",)) for x in pos), r))
    polylines = []
    for i, pl in enumerate(w.get("polylines", [])):
        p = path + ("polylines", i)
        pts = pl.get("points") if isinstance(pl, dict) else None
        if not isinstance(pts, list) or len(pts) < 2 or any(not isinstance(q, list) or len(q) != 2 for q in pts):
            ctx.fail("polyline needs 'points' with at least two [x, y] pairs", p)
        polylines.append(Polyline(tuple((_num(ctx, q[0], p), _num(ctx, q[1], p)) for q in pts),
                                  _num(ctx, pl.get("height", 2.5), p + ("height",), positive=True)))
    return World(walls=walls, tables=tables, objects=objects, polylines=polylines)


def _parse_pose(ctx, v, path) -> Pose2:
    if isinstance(v, list) and len(v) == 3:
        x, y, yaw = (_num(ctx, q, path) for q in v)
    elif isinstance(v, dict) and {"x", "y"} <= set(v):
        x, y = _num(ctx, v["x"], path + ("x",)), _num(ctx, v["y"], path + ("y",))
        yaw = _num(ctx, v.get("yaw_deg", 0.0), path + ("yaw_deg",))
    else:
        ctx.fail("robot_start must be [x, y, yaw_deg] or {x, y, yaw_deg}", path)
    return Pose2(x, y, math.radians(yaw))


def _override(ctx, obj, patch, path):
    """Return a copy of dataclass ``obj`` with fields replaced from ``patch``."""
    if not isinstance(patch, dict):
        ctx.fail("expected an object", path)
    fields = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for k, v in patch.items():
        if k not in fields:
            ctx.fail(f"unknown parameter '{k}' (expected one of {sorted(fields)})", path + (k,))
        cur = getattr(obj, k)
        if dataclasses.is_dataclass(cur):
            changes[k] = _override(ctx, cur, v, path + (k,))
        elif isinstance(cur, tuple):
            if not isinstance(v, list) or len(v) != len(cur):
                ctx.fail(f"expected a list of {len(cur)} values", path + (k,))
            changes[k] = tuple(_num(ctx, q, path + (k,)) for q in v)
        elif isinstance(cur, bool):
            if not isinstance(v, bool):
                ctx.fail("expected true/false", path + (k,))
            changes[k] = v
        elif isinstance(cur, int):
            if isinstance(v, bool) or not isinstance(v, int):
                ctx.fail(f"expected an integer, got {v!r}", path + (k,))
            changes[k] = v
        else:
            changes[k] = _num(ctx, v, path + (k,))
    try:
        return dataclasses.replace(obj, **changes)
    except (ValueError, TypeError) as e:
        ctx.fail(str(e), path)


def _set_in(obj, route: tuple, value):
    if not route:
        return value
    head = route[0]
    return dataclasses.replace(obj, **{head: _set_in(getattr(obj, head), route[1:], value)})


def _get_in(obj, route: tuple):
    for r in route:
        obj = getattr(obj, r)
    return obj


def loads(text: str) -> Scenario:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(e.msg, e.lineno, e.colno) from None
    ctx = _Ctx(text)
    if not isinstance(raw, dict):
        raise ScenarioError("top level must be an object", 1, 1)
    allowed = {"world", "generator", "robot_start", "prompt", "sensors", "params", "seed", "budget_s", "classes"}
    unknown = set(raw) - allowed
    if unknown:
        ctx.fail(f"unknown keys {sorted(unknown)}", (sorted(unknown)[0],))

    vocab = dict(DEFAULT_CLASSES)
    if "classes" in raw:
        c = raw["classes"]
        if isinstance(c, list) and all(isinstance(x, str) for x in c):
            vocab = {name.lower(): i for i, name in enumerate(c)}
        elif isinstance(c, dict) and all(isinstance(v, int) and not isinstance(v, bool) for v in c.values()):
            vocab = {k.lower(): v for k, v in c.items()}
        else:
            ctx.fail("classes must be a list of names or a name -> id map", ("classes",))

    prompt = raw.get("prompt", DEFAULT_PROMPT)
    if not isinstance(prompt, str):
        ctx.fail("prompt must be a string", ("prompt",))
    try:
        task = to_graph(parse(prompt))
        resolve_class(task.target_class, vocab)
    except TaskParseError as e:
        ctx.fail(f"bad prompt: {e} (character {e.offset})", ("prompt",))
    except UnknownClassError as e:
        ctx.fail(f"unknown class: {e.args[0]}", ("prompt",))

    params = EpisodeParams()
    sections = raw.get("params", {})
    if not isinstance(sections, dict):
        ctx.fail("params must be an object", ("params",))
    for name, patch in sections.items():
        if name not in _SECTIONS:
            ctx.fail(f"unknown params section '{name}' (expected one of {sorted(_SECTIONS)})", ("params", name))
        route = _SECTIONS[name]
        params = _set_in(params, route, _override(ctx, _get_in(params, route), patch, ("params", name)))
    if "sensors" in raw:
        params = dataclasses.replace(params, sensors=_override(ctx, params.sensors, raw["sensors"], ("sensors",)))
    if "budget_s" in raw:
        params = dataclasses.replace(params, budget_s=_num(ctx, raw["budget_s"], ("budget_s",), positive=True))

    seed = raw.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        ctx.fail("seed must be a non-negative 64-bit integer", ("seed",))

    world = generator = None
    if "world" in raw:
        if "generator" in raw:
            ctx.fail("give either 'world' or 'generator', not both", ("generator",))
        world = _parse_world(ctx, raw["world"], ("world",))
        for i, o in enumerate(world.objects):
            if o.name.lower() not in vocab:
                ctx.fail(f"unknown class '{o.name}'", ("world", "objects", i, "class"))
        world.robot_start = _parse_pose(ctx, raw.get("robot_start", [0, 0, 0]), ("robot_start",))
        try:
            world.validate()
        except ValueError as e:
            ctx.fail(str(e), ("world",))
    else:
        g = raw.get("generator", {})
        if not isinstance(g, dict):
            ctx.fail("generator must be an object", ("generator",))
        g = dict(g)
        for key in ("distractors",):
            if key in g:
                if not isinstance(g[key], list) or not all(isinstance(x, str) for x in g[key]):
                    ctx.fail("distractors must be a list of class names", ("generator", key))
                bad = [x for x in g[key] if x.lower() not in vocab]
                if bad:
                    ctx.fail(f"unknown class '{bad[0]}'", ("generator", key))
                g[key] = tuple(g[key])
        if "target" in g:
            ctx.fail("the target comes from the prompt", ("generator", "target"))
        generator = _override(ctx, WorldGenParams(), {k: v for k, v in g.items() if k != "distractors"},
                              ("generator",))
        if "distractors" in g:
            generator = dataclasses.replace(generator, distractors=g["distractors"])
        generator = dataclasses.replace(generator, target=task.target_class)
    return Scenario(prompt, task, params, seed, world, generator, vocab)


def load(path: str) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def world_to_dict(world: World) -> dict:
    return {
        "walls": [[b.x0, b.y0, b.x1, b.y1, b.height] for b in world.walls],
        "tables": [[t.x0, t.y0, t.x1, t.y1, t.height] for t in world.tables],
        "objects": [{"class": o.name, "position": list(o.position), "radius": o.radius} for o in world.objects],
        "polylines": [{"points": [list(p) for p in pl.points], "height": pl.height} for pl in world.polylines],
    }


def scenario_dict(world: World, prompt: str = DEFAULT_PROMPT, seed: int = 0, **extra) -> dict:
    s = world.robot_start
    d = {"world": world_to_dict(world), "robot_start": [s.x, s.y, math.degrees(s.yaw)], "prompt": prompt,
         "seed": seed}
    d.update(extra)
    return d
