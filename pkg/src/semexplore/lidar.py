"""Spinning-LiDAR preprocessing: camera FOV filtering, ring densification,
voxel-grid downsampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import RigidTransform
from .projection import CameraModel, in_image, project_points

SYNTHETIC_RING = -1


@dataclass(frozen=True)
class DensifyParams:
    M: int = 4
    range_jump_gate: float = 1.0
    spatial_gap_gate: float = 1.5
    azimuth_bins: int = 360

    def __post_init__(self):
        if self.M < 0:
            raise ValueError("M must be >= 0")
        if self.range_jump_gate <= 0 or self.spatial_gap_gate <= 0:
            raise ValueError("gates must be positive")
        if self.azimuth_bins < 1:
            raise ValueError("need at least one azimuth bin")


@dataclass(frozen=True)
class VoxelParams:
    v: float = 0.05

    def __post_init__(self):
        if self.v <= 0:
            raise ValueError("voxel size must be positive")


def azimuth_bin(points: np.ndarray, bins: int) -> np.ndarray:
    """Bins are centred on ``k * 2pi / bins``, so bin 0 straddles the x axis."""
    az = np.arctan2(points[:, 1], points[:, 0])
    return np.floor(az / (2 * math.pi / bins) + 0.5).astype(np.int64) % bins


@dataclass
class RingScan:
    """One revolution: points in the LiDAR frame tagged with ring and azimuth bin.

    ``hit_id`` optionally records which world surface produced each return
    (simulator only; -1 when unknown).
    """

    points: np.ndarray
    ring: np.ndarray
    azimuth_bin: np.ndarray
    range: np.ndarray
    hit_id: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        n = len(self.points)
        self.ring = np.asarray(self.ring, dtype=np.int64).reshape(n)
        self.azimuth_bin = np.asarray(self.azimuth_bin, dtype=np.int64).reshape(n)
        self.range = np.asarray(self.range, dtype=float).reshape(n)
        if self.hit_id is not None:
            self.hit_id = np.asarray(self.hit_id, dtype=np.int64).reshape(n)

    @classmethod
    def from_points(cls, points, ring, bins: int = 360, hit_id=None) -> "RingScan":
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        return cls(pts, ring, azimuth_bin(pts, bins), np.linalg.norm(pts, axis=1), hit_id)

    @classmethod
    def empty(cls) -> "RingScan":
        return cls(np.empty((0, 3)), np.empty(0), np.empty(0), np.empty(0))

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, index) -> "RingScan":
        return RingScan(self.points[index], self.ring[index], self.azimuth_bin[index],
                        self.range[index], None if self.hit_id is None else self.hit_id[index])


def fov_filter(scan: RingScan, cam: CameraModel, T_lc: RigidTransform) -> RingScan:
    """Keep returns that land inside the image with positive depth."""
    if len(scan) == 0:
        return scan.subset(slice(0, 0))
    uvz, _ = project_points(cam, T_lc.apply(scan.points))
    return scan.subset(in_image(cam, uvz))


def interpolate(S, E, M: int, t) -> np.ndarray:
    """Point ``t`` of the ``M + 1`` equal steps from S (t = 0) to E (t = M + 1).

    ``t`` may be an array; the result has shape ``t.shape + (3,)``.
    """
    t = np.asarray(t, dtype=float)[..., None]
    S = np.asarray(S, dtype=float)
    E = np.asarray(E, dtype=float)
    return (M + 1 - t) / (M + 1) * S + t / (M + 1) * E


def interpolate_pairs(S: np.ndarray, E: np.ndarray, M: int) -> np.ndarray:
    """``M`` evenly spaced interior points for every (S, E) row pair.

    Output is ordered pair-major, t = 1..M within each pair.
    """
    S = np.asarray(S, dtype=float).reshape(-1, 3)
    E = np.asarray(E, dtype=float).reshape(-1, 3)
    if M == 0 or len(S) == 0:
        return np.empty((0, 3))
    t = np.arange(1, M + 1, dtype=float)[None, :]
    return interpolate(S[:, None, :], E[:, None, :], M, t).reshape(-1, 3)


def densify(scan: RingScan, p: DensifyParams) -> RingScan:
    """Fill vertical gaps between adjacent rings within each azimuth bin.

    Only real returns pair up (synthetic points are never endpoints). When a
    (bin, ring) cell holds several returns the nearest one is used.
    """
    if len(scan) == 0 or p.M == 0:
        return scan.subset(slice(None))
    real = np.flatnonzero(scan.ring >= 0)
    order = real[np.lexsort((scan.range[real], scan.ring[real], scan.azimuth_bin[real]))]
    b, r = scan.azimuth_bin[order], scan.ring[order]
    # first (nearest) return per (bin, ring)
    keep = np.ones(len(order), dtype=bool)
    keep[1:] = (b[1:] != b[:-1]) | (r[1:] != r[:-1])
    order, b, r = order[keep], b[keep], r[keep]
    pair = (b[1:] == b[:-1]) & (r[1:] == r[:-1] + 1)
    s_idx, e_idx = order[:-1][pair], order[1:][pair]
    S, E = scan.points[s_idx], scan.points[e_idx]
    ok = (np.abs(scan.range[s_idx] - scan.range[e_idx]) <= p.range_jump_gate) & \
         (np.linalg.norm(S - E, axis=1) <= p.spatial_gap_gate)
    new = interpolate_pairs(S[ok], E[ok], p.M)
    if len(new) == 0:
        return scan.subset(slice(None))
    bins = np.repeat(scan.azimuth_bin[s_idx][ok], p.M)
    hit = None
    if scan.hit_id is not None:
        hit = np.concatenate([scan.hit_id, np.repeat(scan.hit_id[s_idx][ok], p.M)])
    return RingScan(
        np.concatenate([scan.points, new]),
        np.concatenate([scan.ring, np.full(len(new), SYNTHETIC_RING)]),
        np.concatenate([scan.azimuth_bin, bins]),
        np.concatenate([scan.range, np.linalg.norm(new, axis=1)]),
        hit,
    )


def voxelize(points: np.ndarray, p: VoxelParams) -> np.ndarray:
    """One centroid per occupied half-open voxel, in lexicographic voxel order."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return pts.copy()
    keys = np.floor(pts / p.v).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, pts)
    return sums / counts[:, None]


def write_points(path, scan: RingScan) -> None:
    """ASCII dump, one ``x y z ring azimuth_bin`` record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for (x, y, z), ring, k in zip(scan.points, scan.ring, scan.azimuth_bin):
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r} {int(ring)} {int(k)}\n")


def read_points(path) -> RingScan:
    rows = [line.split() for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    if not rows:
        return RingScan.empty()
    pts = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows])
    ring = np.array([int(r[3]) for r in rows])
    k = np.array([int(r[4]) for r in rows])
    return RingScan(pts, ring, k, np.linalg.norm(pts, axis=1))
