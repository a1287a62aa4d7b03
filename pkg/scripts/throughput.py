#!/usr/bin/env python3
"""Per-tick latency of the semantic pipeline (FOV filter, densify, voxelize,
project, accumulate) on simulated 16-ring scans."""
from __future__ import annotations

import argparse
import time

import numpy as np

from semexplore.geometry import Pose2
from semexplore.pipeline import SemanticParams, integrate_frame
from semexplore.projection import ClassPointDB
from semexplore.sim.sensors import Rig, SensorConfig, simulate_detections, simulate_scan
from semexplore.sim.world import Raycaster
from semexplore.sim.worldgen import WorldGenParams, generate_world
from semexplore.task import DEFAULT_CLASSES


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    world = generate_world(WorldGenParams(radius=3.0), args.seed)
    cfg = SensorConfig()
    rig = Rig.from_config(cfg)
    caster = Raycaster(world)
    rng = np.random.default_rng(args.seed)
    db = ClassPointDB()
    target = world.objects_of("bottle")[0].position
    s = world.robot_start
    lat, sizes = [], []
    for k in range(args.frames):
        yaw = np.arctan2(target[1] - s.y, target[0] - s.x) + rng.normal(0, 0.3)
        robot = Pose2(s.x, s.y, float(yaw))
        scan = simulate_scan(caster, robot, cfg.lidar, rng)
        dets = simulate_detections(caster, robot, cfg, rig, rng, DEFAULT_CLASSES)
        t0 = time.perf_counter()
        integrate_frame(db, scan, dets, cfg.camera.model, rig.T_lc, rig.lidar_to_world(robot), robot, k,
                        SemanticParams())
        lat.append((time.perf_counter() - t0) * 1000.0)
        sizes.append(len(scan))
    lat = np.array(lat)
    print(f"{args.frames} frames, {np.mean(sizes):.0f} returns/scan, {len(db)} stored points")
    print(f"latency ms: median {np.median(lat):.2f}  p95 {np.percentile(lat, 95):.2f}  max {lat.max():.2f}")
    print(f"sustained rate at p95: {1000.0 / np.percentile(lat, 95):.0f} Hz")


if __name__ == "__main__":
    main()
