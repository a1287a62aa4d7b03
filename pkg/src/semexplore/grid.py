"""Trinary occupancy grid and its PGM snapshot format."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Pose2

FREE = 0
OCCUPIED = 100
UNKNOWN = -1

_PGM_VALUE = {OCCUPIED: 0, UNKNOWN: 205, FREE: 254}


@dataclass
class OccupancyGrid:
    """``cells[row, col]``; row grows with +y, col with +x of the grid frame."""

    width: int
    height: int
    resolution: float
    origin: Pose2 = field(default_factory=lambda: Pose2(0.0, 0.0, 0.0))
    cells: np.ndarray | None = None

    def __post_init__(self):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cells is None:
            self.cells = np.full((self.height, self.width), UNKNOWN, dtype=np.int8)
        else:
            self.cells = np.asarray(self.cells, dtype=np.int8)
            if self.cells.shape != (self.height, self.width):
                raise ValueError(f"cells shape {self.cells.shape} != ({self.height}, {self.width})")

    @classmethod
    def from_array(cls, cells, resolution: float = 0.1, origin: Pose2 | None = None) -> "OccupancyGrid":
        cells = np.asarray(cells, dtype=np.int8)
        return cls(cells.shape[1], cells.shape[0], resolution, origin or Pose2(0.0, 0.0), cells.copy())

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.width, self.height, self.resolution, self.origin, self.cells.copy())

    @property
    def free(self) -> np.ndarray:
        return self.cells == FREE

    @property
    def unknown(self) -> np.ndarray:
        return self.cells == UNKNOWN

    @property
    def occupied(self) -> np.ndarray:
        return self.cells == OCCUPIED

    def _to_grid_frame(self, x, y):
        dx, dy = np.asarray(x, dtype=float) - self.origin.x, np.asarray(y, dtype=float) - self.origin.y
        if self.origin.yaw == 0.0:
            return dx, dy
        c, s = math.cos(self.origin.yaw), math.sin(self.origin.yaw)
        return c * dx + s * dy, -s * dx + c * dy

    def world_to_cell(self, x, y):
        """``(col, row)`` integer indices; may be out of bounds."""
        gx, gy = self._to_grid_frame(x, y)
        col = np.floor(gx / self.resolution).astype(np.int64)
        row = np.floor(gy / self.resolution).astype(np.int64)
        if col.ndim == 0:
            return int(col), int(row)
        return col, row

    def cell_to_world(self, col, row):
        gx = (np.asarray(col, dtype=float) + 0.5) * self.resolution
        gy = (np.asarray(row, dtype=float) + 0.5) * self.resolution
        c, s = math.cos(self.origin.yaw), math.sin(self.origin.yaw)
        x = self.origin.x + c * gx - s * gy
        y = self.origin.y + s * gx + c * gy
        if np.ndim(x) == 0:
            return float(x), float(y)
        return x, y

    def in_bounds(self, col, row):
        return (np.asarray(col) >= 0) & (np.asarray(col) < self.width) & \
               (np.asarray(row) >= 0) & (np.asarray(row) < self.height)

    def value_at(self, x: float, y: float) -> int:
        col, row = self.world_to_cell(x, y)
        if not self.in_bounds(col, row):
            return UNKNOWN
        return int(self.cells[row, col])

    def save_pgm(self, path) -> Path:
        """Binary P5 image (top row = max y) plus a JSON sidecar."""
        path = Path(path)
        img = np.full(self.cells.shape, _PGM_VALUE[UNKNOWN], dtype=np.uint8)
        img[self.cells == FREE] = _PGM_VALUE[FREE]
        img[self.cells == OCCUPIED] = _PGM_VALUE[OCCUPIED]
        with open(path, "wb") as fh:
            fh.write(f"P5\n{self.width} {self.height}\n255\n".encode("ascii"))
            fh.write(np.flipud(img).tobytes())
        meta = {"resolution": self.resolution, "origin_x": self.origin.x,
                "origin_y": self.origin.y, "origin_yaw": self.origin.yaw}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2), encoding="utf-8")
        return path

    @classmethod
    def load_pgm(cls, path) -> "OccupancyGrid":
        path = Path(path)
        data = path.read_bytes()
        tokens, pos = [], 0
        while len(tokens) < 4:
            while data[pos:pos + 1].isspace():
                pos += 1
            if data[pos:pos + 1] == b"#":
                pos = data.index(b"\n", pos) + 1
                continue
            end = pos
            while not data[end:end + 1].isspace():
                end += 1
            tokens.append(data[pos:end].decode("ascii"))
            pos = end
        if tokens[0] != "P5":
            raise ValueError(f"{path}: not a binary PGM")
        width, height = int(tokens[1]), int(tokens[2])
        pos += 1  # single whitespace after maxval
        img = np.flipud(np.frombuffer(data[pos:pos + width * height], dtype=np.uint8).reshape(height, width))
        cells = np.full(img.shape, UNKNOWN, dtype=np.int8)
        cells[img >= 250] = FREE
        cells[img <= 50] = OCCUPIED
        meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
        origin = Pose2(meta["origin_x"], meta["origin_y"], meta.get("origin_yaw", 0.0))
        return cls(width, height, float(meta["resolution"]), origin, cells)
