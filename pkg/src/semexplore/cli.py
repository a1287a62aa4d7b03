"""Command-line front end.

    semexplore run --scenario F --seed N --out D
    semexplore sweep --scenario F --radii 2.5,5,7.5,10 --episodes K --seed N --out D
    semexplore gen-world --rooms R --size WxH --seed N --out F

Exit codes: 0 success, 2 episode failure (logged), 1 configuration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .aggregation import dump_semantic_map
from .sim.batch import run_sweep, summarize_rows, write_csv
from .sim.episode import run_episode
from .sim.scenario import DEFAULT_PROMPT, ScenarioError, load, scenario_dict
from .sim.worldgen import WorldGenParams, generate_world
from .task import TaskParseError, parse

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def _err(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def cmd_run(args) -> int:
    try:
        sc = load(args.scenario)
        seed = sc.seed if args.seed is None else args.seed
        world = sc.world_for(seed)
    except (ScenarioError, OSError, ValueError) as e:
        return _err(str(e))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = run_episode(world, sc.task, sc.params, seed=seed, vocabulary=sc.vocabulary)
    with open(out / "episode.jsonl", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(log.to_dict()) + "\n")
    log.grid.save_pgm(out / "grid.pgm")
    dump_semantic_map(out / "semantic_map.jsonl", log.objects)
    print(f"{log.outcome}: sim {log.sim_time_s:.1f} s, wall {log.wall_time_ms:.0f} ms, "
          f"{len(log.goals)} goals, {log.collisions} collisions")
    return EXIT_OK if log.success else EXIT_FAILED


def _radii(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad radius list '{text}'") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("radii must be positive")
    return vals


def cmd_sweep(args) -> int:
    try:
        sc = load(args.scenario)
        seed = sc.seed if args.seed is None else args.seed
        rows = run_sweep(sc, args.radii, args.episodes, seed, workers=args.workers)
    except (ScenarioError, OSError, ValueError) as e:
        return _err(str(e))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "episodes.csv", rows)
    summary = summarize_rows(rows)
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")
    for r, q in summary.time_quartiles.items():
        print(f"R_e={r:>5} m  median sim time {q[1]:7.1f} s  (IQR {q[0]:.1f}-{q[2]:.1f})")
    print("SR %: " + ", ".join(f"{k} {v:.0f}" for k, v in summary.module_sr.items())
          + f", overall {summary.overall_sr:.0f}")
    return EXIT_OK


def _size(text: str) -> tuple[float, float]:
    try:
        w, h = (float(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 16x12, got '{text}'") from None
    if w <= 0 or h <= 0:
        raise argparse.ArgumentTypeError("size must be positive")
    return w, h


def cmd_gen_world(args) -> int:
    try:
        spec = parse(args.prompt)
        world = generate_world(WorldGenParams(rooms=args.rooms, size=args.size, target=spec.target_class,
                                              radius=args.radius), args.seed)
    except (TaskParseError, ValueError) as e:
        return _err(str(e))
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(scenario_dict(world, args.prompt, args.seed), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {out}: {len(world.walls)} walls, {len(world.tables)} tables, {len(world.objects)} objects")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="semexplore", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one episode")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run seeded episodes over exploration radii")
    p.add_argument("--scenario", required=True)
    p.add_argument("--radii", type=_radii, default=[2.5, 5.0, 7.5, 10.0])
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gen-world", help="write a random multi-room scenario")
    p.add_argument("--rooms", type=int, default=4)
    p.add_argument("--size", type=_size, default=(16.0, 12.0))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=float, default=None, help="keep the target within this distance of the start")
    p.add_argument("--prompt", default=DEFAULT_PROMPT)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_world)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
