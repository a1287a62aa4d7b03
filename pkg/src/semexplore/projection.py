"""Camera projection and association of LiDAR points with 2D detections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2


class BehindCameraError(ValueError):
    pass


class EmptySelectionError(ValueError):
    pass


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @classmethod
    def from_fov(cls, width: int, height: int, hfov_deg: float) -> "CameraModel":
        f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
        return cls(f, f, width / 2.0, height / 2.0, width, height)


@dataclass(frozen=True)
class Detection:
    class_id: int
    box: tuple[float, float, float, float]  # u_center, v_center, w, h
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.box[2] < 0 or self.box[3] < 0:
            raise ValueError("box size must be non-negative")


@dataclass(frozen=True)
class ProjectionParams:
    dx: float = 10.0  # px added to box width
    dy: float = 10.0  # px added to box height
    delta: float = 0.3  # depth gate slack, m

    def __post_init__(self):
        if self.dx < 0 or self.dy < 0 or self.delta <= 0:
            raise ValueError("need dx, dy >= 0 and delta > 0")


def project(cam: CameraModel, p_cam) -> tuple[float, float, float]:
    x, y, z = (float(c) for c in p_cam)
    if z <= 0:
        raise BehindCameraError(f"point has non-positive depth z={z}")
    return cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy, z


def project_points(cam: CameraModel, pts_cam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project (n, 3) camera-frame points.

    Returns ``(uvz, front)`` where ``front`` flags z > 0; rows of ``uvz`` for
    points behind the camera are NaN.
    """
    pts = np.asarray(pts_cam, dtype=float).reshape(-1, 3)
    z = pts[:, 2]
    front = z > 0
    uvz = np.full_like(pts, np.nan)
    zf = z[front]
    uvz[front, 0] = cam.fx * pts[front, 0] / zf + cam.cx
    uvz[front, 1] = cam.fy * pts[front, 1] / zf + cam.cy
    uvz[front, 2] = zf
    return uvz, front


def in_image(cam: CameraModel, uvz: np.ndarray) -> np.ndarray:
    u, v, z = uvz[:, 0], uvz[:, 1], uvz[:, 2]
    with np.errstate(invalid="ignore"):
        return (z > 0) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)


def select_in_box(uvz: np.ndarray, det: Detection, p: ProjectionParams) -> np.ndarray:
    """Indices of points inside the enlarged box that pass the depth gate.

    The gate's reference depth is the nearest point inside the enlarged box.
    """
    uvz = np.asarray(uvz, dtype=float).reshape(-1, 3)
    uc, vc, w, h = det.box
    hw, hh = (w + p.dx) / 2.0, (h + p.dy) / 2.0
    with np.errstate(invalid="ignore"):
        inside = (np.abs(uvz[:, 0] - uc) <= hw) & (np.abs(uvz[:, 1] - vc) <= hh) & (uvz[:, 2] > 0)
    idx = np.flatnonzero(inside)
    if idx.size == 0:
        return idx
    z = uvz[idx, 2]
    return idx[z <= z.min() + p.delta]


def bbox3d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box ``(center, size)`` of a non-empty point set."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptySelectionError("cannot fit a box to zero points")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return (lo + hi) / 2.0, hi - lo


@dataclass
class _ClassBuffer:
    points: list = field(default_factory=list)
    yaws: list = field(default_factory=list)
    scores: list = field(default_factory=list)
    stamps: list = field(default_factory=list)
    obs: list = field(default_factory=list)
    _cache: tuple | None = None

    def arrays(self):
        if self._cache is None:
            if self.points:
                self._cache = (np.concatenate(self.points), np.concatenate(self.yaws),
                               np.concatenate(self.scores), np.concatenate(self.stamps),
                               np.concatenate(self.obs))
            else:
                self._cache = (np.empty((0, 3)), np.empty(0), np.empty(0),
                               np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
        return self._cache


class ClassPointDB:
    """Append-only per-class store of world-frame points.

    Every point remembers the bearing it was observed from, the detector
    score of the detection that produced it, the frame stamp, and an
    observation id shared by all points of one detection.
    """

    def __init__(self):
        self._classes: dict[int, _ClassBuffer] = {}
        self._next_obs = 0

    def add(self, class_id: int, points: np.ndarray, yaw: float, score: float, stamp: int) -> int:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("non-finite point in accumulation")
        buf = self._classes.setdefault(int(class_id), _ClassBuffer())
        obs = self._next_obs
        self._next_obs += 1
        n = len(pts)
        buf.points.append(pts.copy())
        buf.yaws.append(np.full(n, float(yaw)))
        buf.scores.append(np.full(n, float(score)))
        buf.stamps.append(np.full(n, int(stamp), dtype=np.int64))
        buf.obs.append(np.full(n, obs, dtype=np.int64))
        buf._cache = None
        return obs

    def classes(self) -> list[int]:
        return sorted(self._classes)

    def count(self, class_id: int) -> int:
        buf = self._classes.get(class_id)
        return 0 if buf is None else sum(len(p) for p in buf.points)

    def __len__(self) -> int:
        return sum(self.count(c) for c in self._classes)

    def points(self, class_id: int) -> np.ndarray:
        return self._get(class_id)[0]

    def yaws(self, class_id: int) -> np.ndarray:
        return self._get(class_id)[1]

    def scores(self, class_id: int) -> np.ndarray:
        return self._get(class_id)[2]

    def stamps(self, class_id: int) -> np.ndarray:
        return self._get(class_id)[3]

    def observation_ids(self, class_id: int) -> np.ndarray:
        return self._get(class_id)[4]

    def _get(self, class_id: int):
        buf = self._classes.get(int(class_id))
        return (buf or _ClassBuffer()).arrays()


def accumulate(db: ClassPointDB, det: Detection, world_points: np.ndarray,
               robot_pose: Pose2, stamp: int) -> ClassPointDB:
    """Append a detection's world-frame points under its class.

    The stored observation yaw is the bearing from the robot to the point
    set's centroid; it feeds the angular-coverage cue later on.
    """
    pts = np.asarray(world_points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return db
    c = pts.mean(axis=0)
    yaw = math.atan2(c[1] - robot_pose.y, c[0] - robot_pose.x)
    db.add(det.class_id, pts, yaw, det.score, stamp)
    return db


def write_class_points(path, db: ClassPointDB) -> None:
    """ASCII dump of the database: ``x y z ring azimuth_bin class_id score yaw`` per line.

    World-frame points carry no ring or bin, so both columns hold -1.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for cls in db.classes():
            for (x, y, z), s, yaw in zip(db.points(cls), db.scores(cls), db.yaws(cls)):
                fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r} -1 -1 {cls} {float(s)!r} {float(yaw)!r}\n")
