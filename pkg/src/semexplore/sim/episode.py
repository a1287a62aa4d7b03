"""Closed-loop episodes: sense, map, explore, approach."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..aggregation import AggregationParams, SemanticObject, build_semantic_map
from ..approach import ApproachParams, SurfaceNotFound, approach_pose
from ..exploration import ExplorationParams, GoalCandidate, select_goal
from ..geometry import Pose2, normalize_angle
from ..grid import OccupancyGrid
from ..pipeline import SemanticParams, integrate_frame
from ..planning import compress_path, traversable
from ..projection import ClassPointDB
from ..task import DEFAULT_CLASSES, Action, TaskGraph, resolve_class
from .sensors import Rig, SensorConfig, simulate_detections, simulate_scan, update_grid
from .world import Raycaster, World

SUCCESS, FAILURE, NOT_SIMULATED = "SUCCESS", "FAILURE", "NOT_SIMULATED"
PHASES = ("slam", "exploration", "detection", "approach", "navigation")


@dataclass(frozen=True)
class EpisodeParams:
    exploration: ExplorationParams = field(default_factory=ExplorationParams)
    approach: ApproachParams = field(default_factory=ApproachParams)
    aggregation: AggregationParams = field(default_factory=AggregationParams)
    semantic: SemanticParams = field(default_factory=SemanticParams)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    dt: float = 0.1
    linear_speed: float = 0.5
    angular_speed: float = 1.0
    c_stop: float = 0.6
    budget_s: float = 600.0
    grid_resolution: float = 0.1
    hysteresis: float = 0.2  # a preempting goal must be this much nearer
    localization_tol: float = 0.5
    initial_spin: bool = True  # look around once before the first goal


@dataclass
class PhaseRecord:
    name: str
    status: str
    sim_time_s: float | None = None
    wall_time_ms: float | None = None


@dataclass
class EpisodeLog:
    seed: int
    target_class: str
    outcome: str
    success: bool
    sim_time_s: float
    wall_time_ms: float
    phases: list[PhaseRecord]
    transitions: list[tuple[str, float]]
    final_goal: list[float] | None
    target_object: dict | None
    semantic_map: list[dict]
    goals: list[dict]
    collisions: int
    distance_travelled: float
    ticks: int
    # live artefacts for the caller; not serialised
    grid: OccupancyGrid | None = field(default=None, repr=False, compare=False)
    objects: list[SemanticObject] = field(default_factory=list, repr=False, compare=False)

    def phase(self, name: str) -> PhaseRecord:
        return next(p for p in self.phases if p.name == name)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("grid")
        d.pop("objects")
        return d

    def deterministic_view(self) -> dict:
        """Everything except wall-clock timings."""
        d = self.to_dict()
        d.pop("wall_time_ms")
        for p in d["phases"]:
            p.pop("wall_time_ms")
        return d


class _Spin:
    """In-place full turn."""

    def __init__(self, total: float = 2 * math.pi):
        self.left = total
        self.target = None

    def remaining(self, robot: Pose2) -> float:
        return 0.0

    def blocked(self, ok, grid) -> bool:
        return False

    def step(self, robot: Pose2, dt: float, v: float, w: float) -> tuple[Pose2, bool, float]:
        turn = min(self.left, w * dt)
        self.left -= turn
        return Pose2(robot.x, robot.y, robot.yaw + turn), self.left <= 1e-12, 0.0


class _Follower:
    """Kinematic path following: rotate in place, then drive straight."""

    def __init__(self, waypoints, final_yaw: float | None):
        self.waypoints = compress_path(waypoints)
        self.idx = 1 if len(self.waypoints) > 1 else 0
        self.final_yaw = final_yaw

    @property
    def target(self):
        return self.waypoints[-1]

    def remaining(self, robot: Pose2) -> float:
        pts = [robot.xy] + [np.asarray(w) for w in self.waypoints[self.idx:]]
        return float(sum(np.hypot(*(b - a)) for a, b in zip(pts, pts[1:])))

    def step(self, robot: Pose2, dt: float, v: float, w: float) -> tuple[Pose2, bool, float]:
        x, y, yaw = robot.x, robot.y, robot.yaw
        budget, moved = dt, 0.0
        while budget > 1e-12:
            if self.idx < len(self.waypoints):
                tx, ty = self.waypoints[self.idx]
                dist = math.hypot(tx - x, ty - y)
                if dist < 1e-9:
                    self.idx += 1
                    continue
                err = normalize_angle(math.atan2(ty - y, tx - x) - yaw)
                if abs(err) > 1e-6:
                    turn = min(abs(err), w * budget)
                    yaw = normalize_angle(yaw + math.copysign(turn, err))
                    budget -= turn / w
                    continue
                step = min(dist, v * budget)
                x += step * math.cos(yaw)
                y += step * math.sin(yaw)
                moved += step
                budget -= step / v
                if step >= dist - 1e-12:
                    x, y = tx, ty
                    self.idx += 1
                continue
            if self.final_yaw is None:
                return Pose2(x, y, yaw), True, moved
            err = normalize_angle(self.final_yaw - yaw)
            if abs(err) <= 1e-6:
                return Pose2(x, y, self.final_yaw), True, moved
            turn = min(abs(err), w * budget)
            yaw = normalize_angle(yaw + math.copysign(turn, err))
            budget -= turn / w
        done = self.idx >= len(self.waypoints) and (
            self.final_yaw is None or abs(normalize_angle(self.final_yaw - yaw)) <= 1e-6)
        return Pose2(x, y, yaw), done, moved

    def blocked(self, ok: np.ndarray, grid: OccupancyGrid) -> bool:
        for wx, wy in self.waypoints[self.idx:]:
            col, row = grid.world_to_cell(wx, wy)
            if not grid.in_bounds(col, row) or not ok[row, col]:
                return True
        return False


def _target_found(objects: list[SemanticObject], c_stop: float) -> SemanticObject | None:
    hits = [o for o in objects if o.confidence >= c_stop]
    return max(hits, key=lambda o: (o.confidence, o.inliers)) if hits else None


def run_episode(world: World, task: TaskGraph, params: EpisodeParams = EpisodeParams(), seed: int = 0,
                vocabulary: dict[str, int] | None = None) -> EpisodeLog:
    """Run one deterministic episode and return its log.

    Terminates on reaching an approach pose, on running out of frontier
    goals, on approach failure, or when the simulated-time budget runs out.
    """
    wall0 = time.perf_counter()
    vocabulary = {k.lower(): v for k, v in (vocabulary or DEFAULT_CLASSES).items()}
    target_name = task.target_class
    target_cls = resolve_class(target_name, vocabulary)
    if task.steps[0].action is not Action.EXPLORE:
        raise ValueError("task graph must start with EXPLORE")

    rng = np.random.default_rng(seed)
    caster = Raycaster(world)
    sensors = params.sensors
    rig = Rig.from_config(sensors)
    cam = sensors.camera.model
    ep = params.exploration
    agg = params.aggregation
    arc = math.radians(agg.arc_halfwidth_deg)
    grid = world.empty_grid(params.grid_resolution)
    db = ClassPointDB()
    robot = world.robot_start
    start_xy = robot.xy
    ring_h = sensors.lidar.horizontal_ring

    dt = params.dt
    ticks_per_update = max(1, int(round(ep.T_u / dt)))
    max_ticks = int(math.ceil(params.budget_s / dt))

    phase_time: dict[str, float] = {}
    phase_wall: dict[str, float] = {}
    transitions: list[tuple[str, float]] = [("explore", 0.0)]
    goals: list[dict] = []
    visited: list[np.ndarray] = []
    mode = "explore"
    follower: _Follower | _Spin | None = _Spin() if params.initial_spin else None
    goal: GoalCandidate | None = None
    target_obj: SemanticObject | None = None
    approach_res = None
    outcome = "budget_exceeded"
    collisions = 0
    travelled = 0.0
    objects: list[SemanticObject] = []
    tick = 0
    t = 0.0

    def now_ms():
        return (time.perf_counter() - wall0) * 1000.0

    for tick in range(max_ticks + 1):
        t = tick * dt
        # --- sense
        dets = simulate_detections(caster, robot, sensors, rig, rng, vocabulary)
        rings = None if dets else [ring_h]
        scan = simulate_scan(caster, robot, sensors.lidar, rng, rings=rings)
        update_grid(grid, scan, robot, sensors.lidar, caster.table_footprints, trace_misses=True)
        if dets:
            integrate_frame(db, scan, dets, cam, rig.T_lc, rig.lidar_to_world(robot), robot, tick,
                            params.semantic)
        if world.collides(robot.x, robot.y):
            collisions += 1

        # --- decide
        if mode == "explore":
            periodic = tick % ticks_per_update == 0
            if periodic or follower is None:
                objects = build_semantic_map(db, agg.dbscan, agg.confidence, agg.mad_k, arc, [target_cls])
                target_obj = _target_found(objects, params.c_stop)
                if target_obj is not None:
                    mode = "approach"
                    for name in ("exploration", "detection"):
                        phase_time[name] = t
                        phase_wall[name] = now_ms()
                    transitions.append(("approach", t))
                    follower = None
            spinning = isinstance(follower, _Spin)
            if mode == "explore" and not spinning and (periodic or follower is None):
                if follower is not None and follower.blocked(traversable(grid, ep.inflation), grid):
                    follower, goal = None, None
                cand = select_goal(grid, robot, ep, anchor=start_xy, blacklist=visited)
                if follower is None:
                    if cand is None:
                        outcome = "frontiers_exhausted"
                        break
                    goal, follower = cand, _Follower(cand.path.waypoints, cand.pose.yaw)
                    goals.append({"t": t, "x": cand.pose.x, "y": cand.pose.y, "yaw": cand.pose.yaw,
                                  "gain": cand.gain})
                elif cand is not None and cand.path.length < (1 - params.hysteresis) * follower.remaining(robot):
                    goal, follower = cand, _Follower(cand.path.waypoints, cand.pose.yaw)
                    goals.append({"t": t, "x": cand.pose.x, "y": cand.pose.y, "yaw": cand.pose.yaw,
                                  "gain": cand.gain})

        if mode == "approach" and approach_res is None:
            try:
                approach_res = approach_pose(grid, target_obj.mu[:2], params.approach, robot, ep.inflation)
            except SurfaceNotFound:
                approach_res = None
            phase_time["approach"] = t
            phase_wall["approach"] = now_ms()
            if approach_res is None:
                outcome = "approach_failed"
                break
            follower = _Follower(approach_res.path.waypoints, approach_res.pose.yaw)
            transitions.append(("navigate", t))

        if t >= params.budget_s - 1e-9:
            outcome = "budget_exceeded"
            break

        # --- act
        if follower is not None:
            robot, done, moved = follower.step(robot, dt, params.linear_speed, params.angular_speed)
            travelled += moved
            if done:
                if mode == "approach":
                    t += dt
                    outcome = "success"
                    phase_time["navigation"] = t
                    phase_wall["navigation"] = now_ms()
                    break
                if follower.target is not None:
                    visited.append(np.array(follower.target))
                follower, goal = None, None

    # --- outcome bookkeeping
    truths = world.objects_of(target_name)
    localized = target_obj is not None and any(
        math.hypot(target_obj.mu[0] - o.position[0], target_obj.mu[1] - o.position[1]) <= params.localization_tol
        for o in truths)
    reached = outcome == "success"
    if reached and not localized:
        outcome = "wrong_object"
    status = {
        "slam": True,
        "exploration": target_obj is not None,
        "detection": localized,
        "approach": approach_res is not None,
        "navigation": reached,
    }
    phases = [PhaseRecord(name, SUCCESS if status[name] else FAILURE,
                          phase_time.get(name), phase_wall.get(name)) for name in PHASES]
    phases[0].sim_time_s = 0.0
    phases += [PhaseRecord(a.value.lower(), NOT_SIMULATED) for a in (Action.PICK, Action.PLACE, Action.DELIVER)
               if any(s.action is a for s in task.steps)]
    transitions.append(("end", round(t, 10)))
    final_objects = build_semantic_map(db, agg.dbscan, agg.confidence, agg.mad_k, arc)
    final_goal = None
    if approach_res is not None:
        final_goal = [approach_res.pose.x, approach_res.pose.y, approach_res.pose.yaw]
    elif goal is not None:
        final_goal = [goal.pose.x, goal.pose.y, goal.pose.yaw]
    return EpisodeLog(
        seed=seed,
        target_class=target_name,
        outcome=outcome,
        success=reached and localized,
        sim_time_s=round(t, 10),
        wall_time_ms=now_ms(),
        phases=phases,
        transitions=transitions,
        final_goal=final_goal,
        target_object=None if target_obj is None else target_obj_dict(target_obj),
        semantic_map=[o.to_dict() for o in final_objects],
        goals=goals,
        collisions=collisions,
        distance_travelled=travelled,
        ticks=tick + 1,
        grid=grid,
        objects=final_objects,
    )


def target_obj_dict(obj: SemanticObject) -> dict:
    d = obj.to_dict()
    d.update(density=float(obj.density), mean_score=float(obj.mean_score))
    return d
