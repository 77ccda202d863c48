"""``dualproj`` command line: terrain, scans, projection, episodes, benchmark."""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import run_bench
from .config import load_config
from .geometry import ContractError, DomainError, Pose, SensorMount, read_cloud, write_cloud
from .lidar import ScanPattern, SensorNoise, corrupt, scan
from .projection import dual_projection, export_maps
from .sim import episode_record, run_batch, write_jsonl, write_trace_csv
from .terrain import ConfigError, assemble_track, export_layout, load_layout

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


class _UsageError(Exception):
    pass


def _triple(text: str):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y,yaw, got {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,yaw, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dualproj", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-terrain", help="generate a track from a TOML spec")
    g.add_argument("spec", help="TOML config with a [track] table")
    g.add_argument("-o", "--out", required=True, help="output directory")
    g.add_argument("--seed", type=int, help="override the track seed")

    s = sub.add_parser("scan", help="synthetic LiDAR scan of a generated track")
    s.add_argument("track", help="directory written by gen-terrain")
    s.add_argument("--pose", type=_triple, required=True, help="base pose x,y,yaw (m, m, rad)")
    s.add_argument("-o", "--out", required=True, help="cloud file (.csv or binary)")
    s.add_argument("--seed", type=int, default=0, help="corruption seed")
    s.add_argument("--noise", action="store_true", help="apply dropout and point noise")
    s.add_argument("--frame", choices=("sensor", "base"), default="base")
    s.add_argument("--azimuths", type=int, default=360)
    s.add_argument("--rings", type=int, default=40)
    s.add_argument("--max-range", type=float, default=20.0)

    pr = sub.add_parser("project", help="elevation and distance maps from a cloud")
    pr.add_argument("cloud", help="cloud file (.csv or binary)")
    pr.add_argument("--radius", type=float, required=True, help="sensing radius in [1, 5] m")
    pr.add_argument("-o", "--out", required=True, help="output directory")
    pr.add_argument("--frame", choices=("sensor", "base"), default="base", help="frame of the input cloud")
    pr.add_argument("--seed", type=int, default=0, help="accepted for uniformity; projection is deterministic")

    e = sub.add_parser("episode", help="run a batch of episodes")
    e.add_argument("spec", help="TOML config")
    e.add_argument("--policy", default="heuristic", help="heuristic, external or fixed:<radius>")
    e.add_argument("--external-cmd", help="command line of the external policy process")
    e.add_argument("--speed", type=float, default=1.0, help="forward speed command (m/s)")
    e.add_argument("--seeds", type=int, default=1, help="number of episodes")
    e.add_argument("--seed", type=int, default=0, help="base seed")
    e.add_argument("-o", "--out", required=True, help="JSON-lines results file")
    e.add_argument("--trace-dir", help="also write one trace CSV per episode here")
    e.add_argument("--workers", type=int, help="worker processes (default: DUALPROJ_THREADS or CPU count)")

    b = sub.add_parser("bench", help="time dual projection against voxelization")
    b.add_argument("--points", type=int, default=100_000)
    b.add_argument("--repeats", type=int, default=50)
    b.add_argument("--radius", type=float, default=3.0)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--backend", choices=("compiled", "python"))
    b.add_argument("-o", "--out", help="report JSON (stdout if omitted)")
    return p


def _cmd_gen_terrain(a) -> int:
    cfg = load_config(a.spec)
    spec = cfg.track if a.seed is None else replace(cfg.track, seed=a.seed)
    export_layout(assemble_track(spec), a.out)
    return EXIT_OK


def _cmd_scan(a) -> int:
    layout = load_layout(a.track)
    x, y, yaw = a.pose
    hf = layout.heightfield
    if not hf.contains(x, y):
        raise DomainError(f"pose ({x}, {y}) lies outside the track footprint")
    pose = Pose((x, y, hf.sample(x, y) + 0.74), yaw)
    pattern = ScanPattern.uniform(a.azimuths, -7.0, 52.0, a.rings, a.max_range)
    mount = SensorMount()
    cloud = scan(layout.scene(), pose, pattern, mount)
    if a.noise:
        cloud = corrupt(cloud, SensorNoise(), np.random.default_rng(a.seed))
    if a.frame == "base":
        cloud = cloud.sensor_to_base(mount)
    write_cloud(a.out, cloud)
    return EXIT_OK


def _cmd_project(a) -> int:
    cloud = read_cloud(a.cloud, frame=a.frame)
    if a.frame == "sensor":
        cloud = cloud.sensor_to_base(SensorMount())
    e, d = dual_projection(cloud, a.radius)
    export_maps(a.out, e, d)
    return EXIT_OK


def _cmd_episode(a) -> int:
    cfg = load_config(a.spec)
    if a.seeds < 1:
        raise ConfigError("--seeds must be >= 1")
    ext = shlex.split(a.external_cmd) if a.external_cmd else None
    results = run_batch(cfg.track, a.policy, [a.speed, 0.0, 0.0], a.seeds, a.seed, cfg.sim,
                        external_cmd=ext, workers=a.workers)
    write_jsonl(a.out, [episode_record(i, s, r, [a.speed, 0.0, 0.0]) for i, s, r in results])
    if a.trace_dir:
        td = Path(a.trace_dir)
        td.mkdir(parents=True, exist_ok=True)
        for i, _, r in results:
            write_trace_csv(td / f"episode_{i:04d}.csv", r)
    return EXIT_OK


def _cmd_bench(a) -> int:
    if a.points < 1 or a.repeats < 1:
        raise ConfigError("--points and --repeats must be >= 1")
    report = run_bench(a.points, a.repeats, a.seed, a.radius, a.backend)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if a.out:
        Path(a.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "gen-terrain": _cmd_gen_terrain,
    "scan": _cmd_scan,
    "project": _cmd_project,
    "episode": _cmd_episode,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ContractError, DomainError) as exc:
        print(f"dualproj: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"dualproj: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
