"""One frame of semantic mapping: FOV filter, densify, voxelize, associate
points with each detection and push them into the class database.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Pose2, RigidTransform
from .lidar import DensifyParams, RingScan, VoxelParams, densify, fov_filter, voxelize
from .projection import (CameraModel, ClassPointDB, Detection, ProjectionParams, accumulate, bbox3d,
                         project_points, select_in_box)


@dataclass(frozen=True)
class SemanticParams:
    densify: DensifyParams = field(default_factory=DensifyParams)
    voxel: VoxelParams = field(default_factory=VoxelParams)
    projection: ProjectionParams = field(default_factory=ProjectionParams)


@dataclass
class DetectionFootprint:
    detection: Detection
    n_points: int
    center: np.ndarray | None  # LiDAR-frame box, diagnostic only
    size: np.ndarray | None


def integrate_frame(db: ClassPointDB, scan: RingScan, detections: list[Detection], cam: CameraModel,
                    T_lc: RigidTransform, T_lw: RigidTransform, robot: Pose2, stamp: int,
                    params: SemanticParams = SemanticParams()) -> list[DetectionFootprint]:
    if not detections or len(scan) == 0:
        return [DetectionFootprint(d, 0, None, None) for d in detections]
    fov = fov_filter(scan, cam, T_lc)
    dense = densify(fov, params.densify)
    pts = voxelize(dense.points, params.voxel)
    uvz, _ = project_points(cam, T_lc.apply(pts))
    out = []
    for det in detections:
        idx = select_in_box(uvz, det, params.projection)
        if idx.size == 0:
            out.append(DetectionFootprint(det, 0, None, None))
            continue
        selected = pts[idx]
        c, s = bbox3d(selected)
        accumulate(db, det, T_lw.apply(selected), robot, stamp)
        out.append(DetectionFootprint(det, len(idx), c, s))
    return out
