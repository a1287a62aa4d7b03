"""Simulated LiDAR, camera detector, and ray-traced occupancy updates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Pose2, RigidTransform, rot_y
from ..grid import FREE, OCCUPIED, OccupancyGrid
from ..lidar import RingScan
from ..projection import CameraModel, Detection
from .world import Raycaster


@dataclass(frozen=True)
class LidarConfig:
    rings: int = 16
    vertical_span_deg: float = 15.0
    azimuth_bins: int = 360
    max_range: float = 30.0
    range_sigma: float = 0.01
    height: float = 1.0  # mount height above the floor

    def __post_init__(self):
        if self.rings < 1 or self.azimuth_bins < 1 or self.max_range <= 0 or self.range_sigma < 0:
            raise ValueError("invalid lidar configuration")

    @property
    def elevations(self) -> np.ndarray:
        if self.rings == 1:
            return np.zeros(1)
        return np.radians(np.linspace(-self.vertical_span_deg, self.vertical_span_deg, self.rings))

    @property
    def horizontal_ring(self) -> int:
        return int(np.argmin(np.abs(self.elevations)))

    @property
    def azimuths(self) -> np.ndarray:
        return np.arange(self.azimuth_bins) * (2 * math.pi / self.azimuth_bins)


@dataclass(frozen=True)
class CameraConfig:
    width: int = 640
    height: int = 480
    hfov_deg: float = 87.0
    mount_x: float = 0.1
    mount_z: float = 1.1
    pitch_deg: float = 0.0  # positive tilts the optical axis down

    @property
    def model(self) -> CameraModel:
        return CameraModel.from_fov(self.width, self.height, self.hfov_deg)


@dataclass(frozen=True)
class DetectorConfig:
    tp_rate: float = 0.85
    fp_rate: float = 0.05
    tp_score: tuple[float, float] = (0.6, 0.95)
    fp_score: tuple[float, float] = (0.3, 0.6)
    max_range: float = 4.0
    jitter_px: float = 2.0
    fp_box_px: tuple[float, float] = (20.0, 80.0)

    def __post_init__(self):
        if not (0 <= self.tp_rate <= 1 and 0 <= self.fp_rate <= 1):
            raise ValueError("detector rates must be in [0, 1]")


@dataclass(frozen=True)
class SensorConfig:
    lidar: LidarConfig = field(default_factory=LidarConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)


@dataclass(frozen=True)
class Rig:
    """Mounting transforms derived from a sensor configuration."""

    T_rl: RigidTransform  # lidar -> robot base
    T_rc: RigidTransform  # camera -> robot base
    T_lc: RigidTransform  # lidar -> camera

    @classmethod
    def from_config(cls, cfg: SensorConfig) -> "Rig":
        T_rl = RigidTransform(np.eye(3), [0.0, 0.0, cfg.lidar.height])
        # optical axes expressed in the base frame: x right, y down, z forward
        R = np.array([[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
        R = rot_y(math.radians(cfg.camera.pitch_deg)) @ R
        T_rc = RigidTransform(R, [cfg.camera.mount_x, 0.0, cfg.camera.mount_z])
        return cls(T_rl, T_rc, T_rc.inverse().compose(T_rl))

    def lidar_to_world(self, robot: Pose2) -> RigidTransform:
        return RigidTransform.from_pose2(robot).compose(self.T_rl)

    def camera_to_world(self, robot: Pose2) -> RigidTransform:
        return RigidTransform.from_pose2(robot).compose(self.T_rc)


def simulate_scan(caster: Raycaster, robot: Pose2, cfg: LidarConfig, rng: np.random.Generator,
                  rings=None) -> RingScan:
    """Ray-cast one revolution (optionally a subset of rings) with Gaussian range noise."""
    ring_ids = np.arange(cfg.rings) if rings is None else np.asarray(rings, dtype=np.int64)
    elev = cfg.elevations[ring_ids]
    az = cfg.azimuths
    ring = np.repeat(ring_ids, len(az))
    kbin = np.tile(np.arange(len(az)), len(ring_ids))
    ce = np.repeat(np.cos(elev), len(az))
    d_l = np.column_stack([ce * np.tile(np.cos(az), len(ring_ids)),
                           ce * np.tile(np.sin(az), len(ring_ids)),
                           np.repeat(np.sin(elev), len(az))])
    c, s = math.cos(robot.yaw), math.sin(robot.yaw)
    d_w = np.column_stack([c * d_l[:, 0] - s * d_l[:, 1], s * d_l[:, 0] + c * d_l[:, 1], d_l[:, 2]])
    origin = np.array([robot.x, robot.y, cfg.height])
    t, hid = caster.cast(origin, d_w, cfg.max_range)
    hit = np.isfinite(t)
    r = t[hit]
    if cfg.range_sigma > 0 and r.size:
        r = np.maximum(r + rng.normal(0.0, cfg.range_sigma, r.size), 1e-3)
    return RingScan(d_l[hit] * r[:, None], ring[hit], kbin[hit], r, hid[hit])


def _occluded(caster: Raycaster, origin: np.ndarray, target: np.ndarray, own_id: int, radius: float) -> bool:
    v = target - origin
    dist = float(np.linalg.norm(v))
    t, _ = caster.cast(origin, (v / dist)[None, :], skip=own_id)
    return bool(t[0] < dist - radius)


def simulate_detections(caster: Raycaster, robot: Pose2, cfg: SensorConfig, rig: Rig,
                        rng: np.random.Generator, vocabulary: dict[str, int]) -> list[Detection]:
    """Detector output for one camera frame.

    Visible objects (in frustum, in range, line of sight clear) are reported
    with probability ``tp_rate``; one false positive is added with
    probability ``fp_rate``. Objects outside the vocabulary are never reported.
    """
    cam = cfg.camera.model
    det_cfg = cfg.detector
    T_wc = rig.camera_to_world(robot)
    T_cw = T_wc.inverse()
    cam_origin = T_wc.translation
    out: list[Detection] = []
    for i, obj in enumerate(caster.world.objects):
        cls = vocabulary.get(obj.name.lower())
        if cls is None:
            continue
        center = np.asarray(obj.position, dtype=float)
        p = T_cw.apply(center)
        if p[2] <= obj.radius:
            continue
        if np.linalg.norm(center - cam_origin) > det_cfg.max_range:
            continue
        u = cam.fx * p[0] / p[2] + cam.cx
        v = cam.fy * p[1] / p[2] + cam.cy
        if not (0 <= u < cam.width and 0 <= v < cam.height):
            continue
        if _occluded(caster, cam_origin, center, caster.sphere_offset + i, obj.radius):
            continue
        draws = rng.random(4)
        if draws[0] >= det_cfg.tp_rate:
            continue
        side = 2.0 * cam.fx * obj.radius / p[2]
        ju, jv = (draws[1:3] - 0.5) * 2.0 * det_cfg.jitter_px
        lo, hi = det_cfg.tp_score
        out.append(Detection(cls, (u + ju, v + jv, side, side), lo + (hi - lo) * draws[3]))
    if rng.random() < det_cfg.fp_rate and vocabulary:
        classes = sorted(set(vocabulary.values()))
        draws = rng.random(5)
        lo, hi = det_cfg.fp_box_px
        w = lo + (hi - lo) * draws[0]
        h = lo + (hi - lo) * draws[1]
        slo, shi = det_cfg.fp_score
        out.append(Detection(classes[int(draws[4] * len(classes)) % len(classes)],
                             (draws[2] * cam.width, draws[3] * cam.height, w, h),
                             slo + (shi - slo) * rng.random()))
    return out


def update_grid(grid: OccupancyGrid, scan: RingScan, robot: Pose2, cfg: LidarConfig,
                footprints: dict | None = None, traversed: np.ndarray | None = None,
                trace_misses: bool = False) -> OccupancyGrid:
    """Trace the near-horizontal ring into the grid.

    Cells crossed by a ray become FREE unless already OCCUPIED; the return
    cell becomes OCCUPIED. With ``trace_misses`` the caller asserts that the
    whole ring was cast, so azimuths without a return are cleared out to
    max range. A return from a table (any ring) marks the table's whole
    footprint OCCUPIED. ``traversed`` (bool, grid-shaped) collects every
    cell a ray sampled.
    """
    ring_h = cfg.horizontal_ring
    sel = scan.ring == ring_h
    pts = scan.points[sel]
    c, s = math.cos(robot.yaw), math.sin(robot.yaw)
    az_hit = np.arctan2(pts[:, 1], pts[:, 0]) + robot.yaw
    r_hit = np.hypot(pts[:, 0], pts[:, 1])
    missing = np.setdiff1d(np.arange(cfg.azimuth_bins), scan.azimuth_bin[sel]) if trace_misses \
        else np.empty(0, dtype=np.int64)
    az_miss = cfg.azimuths[missing] + robot.yaw
    r_miss = np.full(len(missing), cfg.max_range * math.cos(cfg.elevations[ring_h]))

    res = grid.resolution
    step = res / 2.0
    angles = np.concatenate([az_hit, az_miss])
    if len(angles) == 0:
        return grid
    lengths = np.concatenate([r_hit - step, r_miss])
    lengths = np.maximum(lengths, 0.0)
    counts = np.floor(lengths / step).astype(np.int64) + 1
    ray = np.repeat(np.arange(len(angles)), counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    dist = (np.arange(counts.sum()) - first) * step
    xs = robot.x + dist * np.cos(angles[ray])
    ys = robot.y + dist * np.sin(angles[ray])
    cols, rows = grid.world_to_cell(xs, ys)
    ok = grid.in_bounds(cols, rows)
    rows, cols = rows[ok], cols[ok]
    if traversed is not None:
        traversed[rows, cols] = True
    cells = grid.cells
    free = cells[rows, cols] != OCCUPIED
    cells[rows[free], cols[free]] = FREE

    if len(pts):
        hx = robot.x + c * pts[:, 0] - s * pts[:, 1]
        hy = robot.y + s * pts[:, 0] + c * pts[:, 1]
        hc, hr = grid.world_to_cell(hx, hy)
        ok = grid.in_bounds(hc, hr)
        cells[hr[ok], hc[ok]] = OCCUPIED

    if footprints and scan.hit_id is not None and len(scan):
        for hid in np.unique(scan.hit_id):
            fp = footprints.get(int(hid))
            if fp is None:
                continue
            c0, r0 = grid.world_to_cell(fp[0], fp[1])
            c1, r1 = grid.world_to_cell(fp[2], fp[3])
            cells[max(r0, 0):max(r1 + 1, 0), max(c0, 0):max(c1 + 1, 0)] = OCCUPIED
    return grid
