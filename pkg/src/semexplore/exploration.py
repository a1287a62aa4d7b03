"""Frontier-based goal selection on a trinary occupancy grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .geometry import Pose2, normalize_angles
from .grid import OccupancyGrid
from .planning import PathField, PathResult

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ExplorationParams:
    eta_c: int = 20  # min frontier cluster size, px
    eta_k: int = 50  # chunk size, px
    d_min: float = 1.0  # NMS radius, m
    alpha_deg: float = 35.0  # sector half-angle
    R_g: float = 1.5  # gain radius, m
    gain_min: int = 50  # unknown cells
    R_e: float = 5.0  # exploration radius, m
    d_s: float = 0.3  # standoff, m
    T_u: float = 4.0  # re-evaluation period, s
    yaw_step_deg: float = 5.0
    inflation: float = 0.25
    goal_tolerance: float = 0.3

    def __post_init__(self):
        for name in ("eta_c", "eta_k", "d_min", "alpha_deg", "R_g", "gain_min", "R_e", "d_s", "T_u",
                     "yaw_step_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def scaled(self, factor: float) -> "ExplorationParams":
        """Same parameters with every metric length multiplied by ``factor``."""
        return replace(self, d_min=self.d_min * factor, R_g=self.R_g * factor, R_e=self.R_e * factor,
                       d_s=self.d_s * factor, inflation=self.inflation * factor,
                       goal_tolerance=self.goal_tolerance * factor)


@dataclass
class GoalCandidate:
    pose: Pose2
    gain: int
    distance_to_robot: float
    cluster_id: int
    path: PathResult | None = field(default=None, repr=False, compare=False)


def extract_frontiers(m: OccupancyGrid) -> np.ndarray:
    """Unknown cells touching free space, away from known obstacles."""
    near_free = ndimage.binary_dilation(m.free, structure=EIGHT_CONNECTED)
    near_occ = ndimage.binary_dilation(m.occupied, structure=np.ones((5, 5), dtype=bool))
    return near_free & m.unknown & ~near_occ


def label_components(mask: np.ndarray) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """8-connected labelling; component i (label i + 1) lists its (rows, cols).

    Labels follow raster order of each component's first pixel.
    """
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    comps = []
    for i, sl in enumerate(ndimage.find_objects(labels)):
        rr, cc = np.nonzero(labels[sl] == i + 1)
        comps.append((rr + sl[0].start, cc + sl[1].start))
    return labels, comps


def angular_partition(pixels: np.ndarray, robot: Pose2, eta_k: int) -> list[np.ndarray]:
    """Split pixel positions into runs of at most ``eta_k`` by bearing from the robot.

    The bearing ordering starts just after the widest angular gap, so a
    cluster straddling the +-pi seam is not cut in two.
    Returns index arrays into ``pixels``.
    """
    pts = np.asarray(pixels, dtype=float).reshape(-1, 2)
    bearing = np.arctan2(pts[:, 1] - robot.y, pts[:, 0] - robot.x)
    order = np.argsort(bearing, kind="stable")
    if len(order) > 1:
        b = bearing[order]
        gaps = np.append(np.diff(b), b[0] + 2 * math.pi - b[-1])
        cut = (int(np.argmax(gaps)) + 1) % len(b)
        order = np.roll(order, -cut)
    return [order[i:i + eta_k] for i in range(0, len(order), eta_k)]


def standoff(p, robot_xy, d_s: float) -> np.ndarray:
    """Pull ``p`` toward the robot by ``min(d_s, |p - robot|)``."""
    p = np.asarray(p, dtype=float)
    r = np.asarray(robot_xy, dtype=float)
    v = r - p
    d = float(np.hypot(*v))
    if d == 0.0:
        return p.copy()
    return p + v / d * min(d_s, d)


def yaw_samples(step_deg: float = 5.0) -> np.ndarray:
    """Headings on a ``step_deg`` lattice covering (-180, 180] degrees."""
    n = int(round(360.0 / step_deg))
    k = np.arange(n) - (n // 2 - 1)
    return np.radians(k * step_deg)


def _unknown_offsets(p, m: OccupancyGrid, R_g: float) -> np.ndarray:
    col, row = m.world_to_cell(p[0], p[1])
    r = int(math.ceil(R_g / m.resolution)) + 1
    r0, r1 = max(row - r, 0), min(row + r + 1, m.height)
    c0, c1 = max(col - r, 0), min(col + r + 1, m.width)
    if r0 >= r1 or c0 >= c1:
        return np.empty((0, 2))
    rr, cc = np.nonzero(m.unknown[r0:r1, c0:c1])
    x, y = m.cell_to_world(cc + c0, rr + r0)
    off = np.column_stack([np.atleast_1d(x) - p[0], np.atleast_1d(y) - p[1]])
    d = np.hypot(off[:, 0], off[:, 1])
    # tolerance keeps cells exactly R_g away from flipping on rounding noise
    return off[(d <= R_g + 1e-9) & (d > 0)]


def optimize_yaw(p, m: OccupancyGrid, alpha: float, R_g: float,
                 step_deg: float = 5.0) -> tuple[float, int]:
    """Heading whose sector (half-angle ``alpha``, radius ``R_g``) sees the most unknown cells.

    Ties go to the heading closest to zero, then to the smaller heading.
    """
    psi = yaw_samples(step_deg)
    off = _unknown_offsets(p, m, R_g)
    if len(off) == 0:
        return 0.0, 0
    bearing = np.arctan2(off[:, 1], off[:, 0])
    diff = np.abs(normalize_angles(bearing[None, :] - psi[:, None]))
    gains = (diff <= alpha + 1e-12).sum(axis=1)
    order = np.lexsort((psi, np.abs(psi)))
    best = order[np.argmax(gains[order])]
    return float(psi[best]), int(gains[best])


def nms(candidates: list[GoalCandidate], d_min: float) -> list[GoalCandidate]:
    """Greedy suppression: higher gain first, then nearer, then raster order."""
    ranked = sorted(candidates, key=lambda c: (-c.gain, c.distance_to_robot, c.pose.y, c.pose.x))
    kept: list[GoalCandidate] = []
    for c in ranked:
        if all(math.hypot(c.pose.x - k.pose.x, c.pose.y - k.pose.y) >= d_min for k in kept):
            kept.append(c)
    return kept


def collect_candidates(m: OccupancyGrid, robot: Pose2, params: ExplorationParams,
                       anchor=None, blacklist=()) -> list[GoalCandidate]:
    """Everything before path checks: frontier chunks that pass radius and gain gates."""
    anchor = robot.xy if anchor is None else np.asarray(anchor, dtype=float)
    alpha = math.radians(params.alpha_deg)
    _, comps = label_components(extract_frontiers(m))
    out = []
    for cid, (rows, cols) in enumerate(comps):
        if len(rows) < params.eta_c:
            continue
        x, y = m.cell_to_world(cols, rows)
        xy = np.column_stack([x, y])
        for chunk in angular_partition(xy, robot, params.eta_k):
            p = standoff(xy[chunk].mean(axis=0), robot.xy, params.d_s)
            if math.hypot(p[0] - anchor[0], p[1] - anchor[1]) > params.R_e:
                continue
            if any(math.hypot(p[0] - b[0], p[1] - b[1]) < params.d_min for b in blacklist):
                continue
            psi, gain = optimize_yaw(p, m, alpha, params.R_g, params.yaw_step_deg)
            if gain < params.gain_min:
                continue
            out.append(GoalCandidate(Pose2(p[0], p[1], psi), gain,
                                     math.hypot(p[0] - robot.x, p[1] - robot.y), cid))
    return out


def select_goal(m: OccupancyGrid, robot: Pose2, params: ExplorationParams,
                anchor=None, blacklist=()) -> GoalCandidate | None:
    """Nearest reachable frontier goal, or None when nothing survives.

    ``anchor`` is the centre of the exploration radius (defaults to the
    robot); ``blacklist`` holds positions of goals already visited in vain.
    """
    cands = nms(collect_candidates(m, robot, params, anchor, blacklist), params.d_min)
    if not cands:
        return None
    cands.sort(key=lambda c: c.distance_to_robot)
    field_ = PathField(m, robot, params.inflation)
    for c in cands:
        res = field_.path_to(c.pose, params.goal_tolerance)
        if res.feasible:
            c.path = res
            return c
    return None
