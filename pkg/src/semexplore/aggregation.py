"""Per-class object aggregation: DBSCAN, MAD outlier rejection, moments and
the logistic confidence score.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .projection import ClassPointDB, bbox3d

NOISE = -1
MAD_SCALE = 1.4826
MIN_VOLUME = 1e-6


@dataclass(frozen=True)
class DbscanParams:
    eps: float = 0.5
    min_pts: int = 5

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be >= 1")


@dataclass(frozen=True)
class ConfidenceParams:
    w_rho: float = 1.0
    w_omega: float = 1.0
    w_n: float = 1.0
    w_s: float = 1.0
    b: float = -2.0
    rho0: float = 1000.0  # points / m^3
    n0: float = 50.0

    def __post_init__(self):
        if self.rho0 <= 0 or self.n0 <= 0:
            raise ValueError("normalizers must be positive")


@dataclass
class SemanticObject:
    class_id: int
    mu: np.ndarray
    sigma: np.ndarray
    confidence: float
    inliers: int
    coverage: float
    density: float
    mean_score: float

    def to_dict(self) -> dict:
        return {
            "class_id": int(self.class_id),
            "mu": [float(v) for v in self.mu],
            "sigma": [float(v) for v in np.asarray(self.sigma).reshape(9)],
            "confidence": float(self.confidence),
            "inliers": int(self.inliers),
            "coverage": float(self.coverage),
        }


class Clustering(NamedTuple):
    labels: np.ndarray  # cluster id per point, NOISE for noise
    core: np.ndarray  # bool per point


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


_NEIGHBOUR_OFFSETS = [o for o in itertools.product(range(-2, 3), repeat=3) if o > (0, 0, 0)]


def _any_within(a: np.ndarray, b: np.ndarray, eps: float) -> bool:
    if len(a) * len(b) <= 4096:
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return bool((d2 <= eps * eps).any())
    small, big = (a, b) if len(a) < len(b) else (b, a)
    d, _ = cKDTree(big).query(small, k=1, distance_upper_bound=eps)
    return bool(np.isfinite(d).any())


def dbscan(points: np.ndarray, p: DbscanParams) -> Clustering:
    """Density-based clustering with the usual sequential semantics.

    A point is core when at least ``min_pts`` points (itself included) lie
    within ``eps``. Cluster ids follow the order in which a sequential scan
    over the input would discover them, and a border point joins the
    earliest-discovered cluster that reaches it.

    Points are bucketed into cubes of side eps/sqrt(3); any two points in one
    cube are neighbours, so crowded cubes are core wholesale and linked as a
    unit. That keeps the cost manageable when one object has been observed
    thousands of times.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    n = len(pts)
    if n == 0:
        return Clustering(np.empty(0, dtype=np.int64), np.empty(0, dtype=bool))
    eps = p.eps
    side = eps / math.sqrt(3.0) * (1.0 - 1e-9)
    keys = np.floor(pts / side).astype(np.int64)
    cells, inv, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inv = inv.reshape(-1)

    core = counts[inv] >= p.min_pts
    tree = cKDTree(pts)
    loose = np.flatnonzero(~core)
    if loose.size:
        core[loose] = tree.query_ball_point(pts[loose], eps, return_length=True) >= p.min_pts

    labels = np.full(n, NOISE, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return Clustering(labels, core)

    # connectivity between cubes that hold core points
    core_cells = np.unique(inv[core_idx])
    members = {int(c): pts[core_idx[inv[core_idx] == c]] for c in core_cells}
    cell_pos = {tuple(cells[c]): int(c) for c in core_cells}
    uf = _UnionFind(len(cells))
    for c in core_cells:
        base = cells[c]
        for off in _NEIGHBOUR_OFFSETS:
            other = cell_pos.get((base[0] + off[0], base[1] + off[1], base[2] + off[2]))
            if other is None or uf.find(int(c)) == uf.find(other):
                continue
            if _any_within(members[int(c)], members[other], eps):
                uf.union(int(c), other)

    roots = np.array([uf.find(int(inv[i])) for i in core_idx])
    # discovery order == first core point index of each component
    first_seen: dict[int, int] = {}
    for root in roots:
        first_seen.setdefault(int(root), len(first_seen))
    labels[core_idx] = [first_seen[int(r)] for r in roots]

    border = np.flatnonzero(~core)
    if border.size:
        core_tree = cKDTree(pts[core_idx])
        core_labels = labels[core_idx]
        for i, nb in zip(border, core_tree.query_ball_point(pts[border], eps)):
            if nb:
                labels[i] = core_labels[nb].min()
    return Clustering(labels, core)


def robust_filter(cluster: np.ndarray, k: float = 3.0) -> np.ndarray:
    """Boolean inlier mask for one cluster.

    Distances to the coordinate-wise median are scored against their own
    median and scaled MAD; a point is dropped when its distance exceeds the
    median distance by more than ``k`` robust sigmas. A zero MAD keeps
    everything.
    """
    pts = np.asarray(cluster, dtype=float).reshape(-1, 3)
    d = np.linalg.norm(pts - np.median(pts, axis=0), axis=1)
    med = np.median(d)
    mad = np.median(np.abs(d - med))
    if mad == 0:
        return np.ones(len(pts), dtype=bool)
    return d - med <= k * MAD_SCALE * mad


def summarize(inliers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population covariance (divisor n)."""
    pts = np.asarray(inliers, dtype=float).reshape(-1, 3)
    mu = pts.mean(axis=0)
    centered = pts - mu
    sigma = centered.T @ centered / len(pts)
    return mu, (sigma + sigma.T) / 2.0


def angular_coverage(yaws, arc_halfwidth: float) -> float:
    """Fraction of the circle covered by arcs ``[yaw - h, yaw + h]``."""
    if not 0 < arc_halfwidth < math.pi:
        raise ValueError("arc half-width must be in (0, pi)")
    y = np.asarray(yaws, dtype=float).reshape(-1)
    if y.size == 0:
        return 0.0
    two_pi = 2.0 * math.pi
    s = np.mod(y - arc_halfwidth, two_pi)
    e = s + 2.0 * arc_halfwidth
    wrap = e > two_pi
    s = np.concatenate([s, np.zeros(wrap.sum())])
    e = np.concatenate([np.minimum(e, two_pi), e[wrap] - two_pi])
    order = np.argsort(s, kind="stable")
    s, e = s[order], e[order]
    reach = np.maximum.accumulate(e)
    starts = np.concatenate([[True], s[1:] > reach[:-1]])
    group = np.cumsum(starts) - 1
    ends = np.zeros(group[-1] + 1)
    np.maximum.at(ends, group, e)
    total = float((ends - s[starts]).sum())
    return min(total / two_pi, 1.0)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def confidence(rho: float, omega: float, n: float, s_bar: float, p: ConfidenceParams) -> float:
    x = (p.w_rho * (1.0 - math.exp(-rho / p.rho0))
         + p.w_omega * omega
         + p.w_n * (1.0 - math.exp(-n / p.n0))
         + p.w_s * s_bar
         + p.b)
    return _sigmoid(x)


@dataclass(frozen=True)
class AggregationParams:
    dbscan: DbscanParams = field(default_factory=DbscanParams)
    confidence: ConfidenceParams = field(default_factory=ConfidenceParams)
    mad_k: float = 3.0
    arc_halfwidth_deg: float = 15.0


def build_semantic_map(db: ClassPointDB, dbscan_p: DbscanParams | None = None,
                       conf_p: ConfidenceParams | None = None, k: float = 3.0,
                       arc_halfwidth: float = math.radians(15.0),
                       classes=None) -> list[SemanticObject]:
    dbscan_p = dbscan_p or DbscanParams()
    conf_p = conf_p or ConfidenceParams()
    wanted = db.classes() if classes is None else sorted(set(classes))
    objects: list[SemanticObject] = []
    for cls in wanted:
        pts = db.points(cls)
        if len(pts) == 0:
            continue
        yaws, scores, obs = db.yaws(cls), db.scores(cls), db.observation_ids(cls)
        labels = dbscan(pts, dbscan_p).labels
        for lab in range(int(labels.max()) + 1 if len(labels) else 0):
            idx = np.flatnonzero(labels == lab)
            idx = idx[robust_filter(pts[idx], k)]
            if len(idx) < dbscan_p.min_pts:
                continue
            inl = pts[idx]
            mu, sigma = summarize(inl)
            _, size = bbox3d(inl)
            rho = len(idx) / max(float(np.prod(size)), MIN_VOLUME)
            omega = angular_coverage(yaws[idx], arc_halfwidth)
            # one score per contributing detection, not per point
            _, first = np.unique(obs[idx], return_index=True)
            s_bar = float(scores[idx][first].mean())
            objects.append(SemanticObject(
                class_id=cls, mu=mu, sigma=sigma,
                confidence=confidence(rho, omega, len(idx), s_bar, conf_p),
                inliers=len(idx), coverage=omega, density=rho, mean_score=s_bar,
            ))
    return objects


def dump_semantic_map(path, objects: list[SemanticObject]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objects:
            fh.write(json.dumps(obj.to_dict()) + "\n")


def load_semantic_map(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
