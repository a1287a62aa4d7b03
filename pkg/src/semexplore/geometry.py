"""Planar poses, rigid transforms and angle arithmetic.

Frames are right-handed. Camera frames follow the pinhole convention
(z forward, x right, y down); LiDAR and robot frames are x forward, y left,
z up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(a: float) -> float:
    """Wrap ``a`` into (-pi, pi]."""
    if not math.isfinite(a):
        raise ValueError(f"angle must be finite, got {a}")
    r = a - TWO_PI * math.ceil((a - math.pi) / TWO_PI)
    # ceil() can land one period off when a - pi is a hair above a multiple of 2pi
    if r <= -math.pi:
        r += TWO_PI
    elif r > math.pi:
        r -= TWO_PI
    return r


def normalize_angles(a: np.ndarray) -> np.ndarray:
    """Vectorised :func:`normalize_angle`."""
    a = np.asarray(a, dtype=float)
    r = a - TWO_PI * np.ceil((a - math.pi) / TWO_PI)
    r = np.where(r <= -math.pi, r + TWO_PI, r)
    return np.where(r > math.pi, r - TWO_PI, r)


@dataclass(frozen=True)
class Pose2:
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("pose position must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def distance_to(self, other: "Pose2 | np.ndarray") -> float:
        ox, oy = (other.x, other.y) if isinstance(other, Pose2) else other
        return math.hypot(self.x - ox, self.y - oy)


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(pitch: float) -> np.ndarray:
    c, s = math.cos(pitch), math.sin(pitch)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_x(roll: float) -> np.ndarray:
    c, s = math.cos(roll), math.sin(roll)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True)
class RigidTransform:
    """``p -> R p + t``; rotation must be a proper rotation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(R)) or not np.all(np.isfinite(t)):
            raise ValueError("transform entries must be finite")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation is not orthonormal with det +1")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_pose2(cls, pose: Pose2, z: float = 0.0) -> "RigidTransform":
        return cls(rot_z(pose.yaw), np.array([pose.x, pose.y, z]))

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """``self ∘ other``: apply ``other`` first."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (n, 3) array (or a single 3-vector)."""
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def as_matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M


def apply_transform(T: RigidTransform, p) -> np.ndarray:
    return T.apply(np.asarray(p, dtype=float))
