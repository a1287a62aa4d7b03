from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semexplore.geometry import Pose2
from semexplore.projection import (BehindCameraError, CameraModel, ClassPointDB, Detection, EmptySelectionError,
                                   ProjectionParams, accumulate, bbox3d, project, project_points,
                                   select_in_box, write_class_points)

CAM = CameraModel(100.0, 100.0, 50.0, 50.0, 100, 100)


def test_project_examples():
    assert project(CAM, (0, 0, 2)) == (50.0, 50.0, 2.0)
    assert project(CAM, (1, 0, 1)) == (150.0, 50.0, 1.0)
    with pytest.raises(BehindCameraError):
        project(CAM, (0, 0, -1))


def test_project_points_flags_behind():
    uvz, front = project_points(CAM, np.array([[0, 0, 2.0], [0, 0, -1.0]]))
    assert front.tolist() == [True, False]
    assert np.isnan(uvz[1]).all()


def test_camera_validation():
    with pytest.raises(ValueError):
        CameraModel(0.0, 1.0, 1.0, 1.0, 10, 10)
    with pytest.raises(ValueError):
        CameraModel(1.0, 1.0, 10.0, 1.0, 10, 10)
    cam = CameraModel.from_fov(640, 480, 90.0)
    assert cam.fx == pytest.approx(320.0)


def test_select_examples():
    uvz = np.array([[50, 50, 2.0], [40, 60, 2.2], [55, 45, 5.0]])
    det = Detection(0, (50, 50, 100, 100), 0.9)
    assert select_in_box(uvz, det, ProjectionParams(delta=0.3)).tolist() == [0, 1]
    far = Detection(0, (500, 500, 10, 10), 0.9)
    assert select_in_box(uvz, far, ProjectionParams()).size == 0


def test_select_foreground_split():
    rng = np.random.default_rng(0)
    fg = np.column_stack([rng.uniform(40, 60, 50), rng.uniform(40, 60, 50), rng.uniform(2.0, 2.2, 50)])
    bg = np.column_stack([rng.uniform(40, 60, 50), rng.uniform(40, 60, 50), rng.uniform(3.2, 3.4, 50)])
    uvz = np.vstack([bg, fg])
    idx = select_in_box(uvz, Detection(0, (50, 50, 20, 20), 0.9), ProjectionParams(delta=0.3))
    assert sorted(idx.tolist()) == list(range(50, 100))


uvz_sets = st.lists(st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0.1, 10)), min_size=0, max_size=40)
boxes = st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0, 60), st.floats(0, 60))


def _brute_select(uvz, box, dx, dy, delta):
    uc, vc, w, h = box
    inside = [i for i, (u, v, z) in enumerate(uvz) if abs(u - uc) <= (w + dx) / 2 and abs(v - vc) <= (h + dy) / 2]
    if not inside:
        return []
    zmin = min(uvz[i][2] for i in inside)
    return [i for i in inside if uvz[i][2] <= zmin + delta]


@given(uvz_sets, boxes, st.floats(0, 20), st.floats(0, 20), st.floats(0.01, 2))
def test_select_matches_bruteforce(pts, box, dx, dy, delta):
    uvz = np.array(pts, dtype=float).reshape(-1, 3)
    got = select_in_box(uvz, Detection(0, box, 0.5), ProjectionParams(dx, dy, delta))
    assert got.tolist() == _brute_select(pts, box, dx, dy, delta)


@given(uvz_sets, boxes, st.floats(0.01, 2), st.floats(0, 2))
def test_select_monotone_in_delta(pts, box, delta, extra):
    uvz = np.array(pts, dtype=float).reshape(-1, 3)
    det = Detection(0, box, 0.5)
    a = set(select_in_box(uvz, det, ProjectionParams(delta=delta)).tolist())
    b = set(select_in_box(uvz, det, ProjectionParams(delta=delta + extra)).tolist())
    assert a <= b <= set(range(len(pts)))


@given(uvz_sets, boxes, st.floats(0, 20), st.floats(0, 20))
def test_select_enlargement_monotone_when_nearest_point_stays(pts, box, a, b):
    """Growing the box only adds points as long as the reference depth does not drop."""
    uvz = np.array(pts, dtype=float).reshape(-1, 3)
    det = Detection(0, box, 0.5)
    small = ProjectionParams(10, 10, 0.3)
    big = ProjectionParams(10 + a, 10 + b, 0.3)
    s = select_in_box(uvz, det, small)
    g = select_in_box(uvz, det, big)
    if s.size and g.size and uvz[g, 2].min() >= uvz[s, 2].min():
        assert set(s.tolist()) <= set(g.tolist())


def test_enlargement_can_shrink_selection_when_nearer_point_enters():
    # the bigger box admits a nearer point, which tightens the depth gate
    uvz = np.array([[50, 50, 2.0], [58, 50, 1.0]])
    det = Detection(0, (50, 50, 4, 4), 0.5)
    assert select_in_box(uvz, det, ProjectionParams(2, 2, 0.3)).tolist() == [0]
    assert select_in_box(uvz, det, ProjectionParams(20, 20, 0.3)).tolist() == [1]


def test_bbox_examples():
    c, s = bbox3d(np.array([[1.0, 2.0, 3.0]]))
    assert np.array_equal(c, [1, 2, 3]) and np.array_equal(s, [0, 0, 0])
    c, s = bbox3d(np.array([[0, 0, 0], [2, 4, 6.0]]))
    assert np.array_equal(c, [1, 2, 3]) and np.array_equal(s, [2, 4, 6])
    with pytest.raises(EmptySelectionError):
        bbox3d(np.empty((0, 3)))


@given(st.lists(st.tuples(*[st.floats(-1e3, 1e3)] * 3), min_size=1, max_size=100))
def test_bbox_matches_minmax_and_contains(pts):
    c, s = bbox3d(np.array(pts))
    lo = [min(p[k] for p in pts) for k in range(3)]
    hi = [max(p[k] for p in pts) for k in range(3)]
    assert np.allclose(c - s / 2, lo, atol=1e-9) and np.allclose(c + s / 2, hi, atol=1e-9)
    P = np.array(pts)
    assert np.all(P >= c - s / 2 - 1e-9) and np.all(P <= c + s / 2 + 1e-9)


def test_accumulate_counts_and_yaws(tmp_path):
    db = ClassPointDB()
    pts = np.random.default_rng(0).normal([3, 0, 0.8], 0.02, (5, 3))
    accumulate(db, Detection(3, (0, 0, 1, 1), 0.8), pts, Pose2(0, 0, 0), 0)
    assert db.count(3) == 5 and db.classes() == [3]
    pts2 = np.random.default_rng(1).normal([0, 3, 0.8], 0.02, (4, 3))
    accumulate(db, Detection(3, (0, 0, 1, 1), 0.7), pts2, Pose2(0, 0, math.pi / 2), 1)
    assert db.count(3) == 9
    yaws = db.yaws(3)
    assert math.degrees(yaws[-1] - yaws[0]) == pytest.approx(90.0, abs=2.0)
    assert db.scores(3).tolist() == [0.8] * 5 + [0.7] * 4
    assert db.stamps(3).tolist() == [0] * 5 + [1] * 4
    assert len(set(db.observation_ids(3).tolist())) == 2
    path = tmp_path / "db.txt"
    write_class_points(path, db)
    rows = [line.split() for line in path.read_text().splitlines()]
    assert len(rows) == 9 and all(len(r) == 8 for r in rows)
    assert float(rows[0][0]) == pts[0, 0]


def test_db_rejects_nonfinite():
    with pytest.raises(ValueError):
        ClassPointDB().add(0, np.array([[np.nan, 0, 0]]), 0.0, 0.5, 0)


def test_detection_score_validated():
    with pytest.raises(ValueError):
        Detection(0, (0, 0, 1, 1), 1.5)
