from __future__ import annotations

import math

import numpy as np
import pytest

from semexplore.geometry import Pose2
from semexplore.grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid
from semexplore.planning import compress_path, inflated_obstacles, plan_path, traversable

from oracles import ucs_length

RES = 0.1


def pose(g, col, row):
    x, y = g.cell_to_world(col, row)
    return Pose2(x, y, 0.0)


def test_straight_corridor():
    g = OccupancyGrid.from_array(np.zeros((1, 10)), RES)
    res = plan_path(g, pose(g, 0, 0), pose(g, 9, 0), inflation=0.0)
    assert res.feasible and res.length == pytest.approx(0.9)
    assert len(res.waypoints) == 10


def test_enclosed_goal_infeasible():
    cells = np.zeros((9, 9))
    cells[3:6, 3:6] = OCCUPIED
    cells[4, 4] = FREE
    g = OccupancyGrid.from_array(cells, RES)
    assert not plan_path(g, pose(g, 0, 0), pose(g, 4, 4), inflation=0.0).feasible


def test_unknown_blocks_and_outside_goal():
    cells = np.zeros((3, 7))
    cells[:, 3] = UNKNOWN
    g = OccupancyGrid.from_array(cells, RES)
    assert not plan_path(g, pose(g, 0, 1), pose(g, 6, 1), inflation=0.0).feasible
    assert not plan_path(g, pose(g, 0, 1), Pose2(50, 50, 0), inflation=0.0).feasible


def test_no_corner_cutting():
    cells = np.zeros((2, 2))
    cells[0, 1] = OCCUPIED
    g = OccupancyGrid.from_array(cells, RES)
    res = plan_path(g, pose(g, 0, 0), pose(g, 1, 1), inflation=0.0)
    assert not res.feasible or res.length == pytest.approx(0.2)


def test_l_shape_matches_ucs():
    cells = np.full((12, 12), OCCUPIED)
    cells[1:11, 1:4] = FREE
    cells[8:11, 1:11] = FREE
    g = OccupancyGrid.from_array(cells, RES)
    res = plan_path(g, pose(g, 2, 1), pose(g, 10, 9), inflation=0.0)
    ok = (cells == FREE).tolist()
    ref = ucs_length(ok, (1, 2), (9, 10)) * RES
    assert res.feasible and abs(res.length - ref) <= math.sqrt(2) * RES + 1e-9


def test_inflation():
    cells = np.zeros((11, 11))
    cells[5, 5] = OCCUPIED
    g = OccupancyGrid.from_array(cells, RES)
    infl = inflated_obstacles(g, 0.2)
    rr, cc = np.nonzero(infl)
    assert np.all(np.hypot(rr - 5, cc - 5) <= 2.0 + 1e-9)
    assert infl[5, 7] and infl[6, 6] and not infl[7, 7]
    assert not traversable(g, 0.2)[5, 3]


def random_connected_grid(rng, h=24, w=24):
    cells = np.where(rng.random((h, w)) < 0.3, OCCUPIED, FREE)
    return cells


@pytest.mark.parametrize("seed", range(15))
def test_random_grids_match_ucs(seed):
    rng = np.random.default_rng(seed)
    cells = random_connected_grid(rng)
    g = OccupancyGrid.from_array(cells, RES)
    free = np.argwhere(cells == FREE)
    a, b = free[rng.integers(len(free))], free[rng.integers(len(free))]
    res = plan_path(g, pose(g, a[1], a[0]), pose(g, b[1], b[0]), inflation=0.0)
    ref = ucs_length((cells == FREE).tolist(), tuple(a), tuple(b))
    assert res.feasible == math.isfinite(ref)
    if res.feasible:
        assert abs(res.length - ref * RES) <= math.sqrt(2) * RES + 1e-9
        steps = np.diff(np.array(res.waypoints), axis=0)
        assert np.all(np.abs(steps) <= RES + 1e-9)
        assert sum(np.hypot(*s) for s in steps) == pytest.approx(res.length)


def test_goal_tolerance_snaps_to_reachable():
    cells = np.zeros((5, 10))
    cells[:, 7:] = OCCUPIED
    g = OccupancyGrid.from_array(cells, RES)
    assert not plan_path(g, pose(g, 0, 2), pose(g, 7, 2), inflation=0.0).feasible
    res = plan_path(g, pose(g, 0, 2), pose(g, 7, 2), inflation=0.0, goal_tolerance=0.15)
    assert res.feasible and res.waypoints[-1] == pytest.approx(g.cell_to_world(6, 2))


def test_compress_path():
    pts = [(0, 0), (1, 0), (2, 0), (3, 1), (4, 2), (4, 3)]
    assert compress_path(pts) == [(0, 0), (2, 0), (4, 2), (4, 3)]
