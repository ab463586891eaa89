"""Command-line surface: single trials, benchmarks, data collection,
text-accuracy evaluation, and a golden-image render check.

Exit codes: 0 success, 1 task failure (trial did not succeed), 2 usage
error, 3 transport error talking to the remote bridge.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .controller import ControllerConfig
from .core import SeededRng
from .datagen import (StreamExhausted, export_dataset, gated_collect,
                      load_manifest, load_pairs, sample_pairs, sweep_frames,
                      text_accuracy)
from .envs import get_task, render_observation, sample_initial
from .harness import default_controller, load_plan, run_benchmark, run_trial
from .similarity import BRIDGE_ADDR_ENV, OracleSpec, TransportError, make_oracle

EXIT_OK = 0
EXIT_TASK_FAILED = 1
EXIT_USAGE = 2
EXIT_TRANSPORT = 3

log = logging.getLogger("gradseek")


class UsageError(Exception):
    pass


def _oracle_from_args(args) -> OracleSpec | None:
    name = args.oracle
    if name == "goal":
        return None
    if name == "signflip":
        return OracleSpec.signflip(args.p)
    if name == "noise":
        return OracleSpec.noise(args.noise_scale)
    if name == "remote":
        endpoint = args.endpoint or os.environ.get(BRIDGE_ADDR_ENV)
        if not endpoint:
            raise UsageError(
                f"remote oracle needs --endpoint or {BRIDGE_ADDR_ENV}")
        return OracleSpec.remote(endpoint)
    raise UsageError(f"unknown oracle {name!r}")


def _task_from_args(args):
    try:
        task = get_task(args.task)
    except KeyError as e:
        raise UsageError(str(e)) from e
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "task" in doc:
            from .envs import TaskSpec

            merged = task.to_dict()
            merged.update(doc["task"])
            task = TaskSpec.from_dict(merged)
    return task


def _controller_from_args(args, task) -> ControllerConfig:
    cfg = default_controller(task, goal_term=(args.oracle == "goal"))
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            doc = json.load(fh)
        if "controller" in doc:
            merged = cfg.to_dict()
            merged.update(doc["controller"])
            cfg = ControllerConfig.from_dict(merged)
    return cfg


def cmd_trial(args) -> int:
    task = _task_from_args(args)
    ctrl = _controller_from_args(args, task)
    oracle = _oracle_from_args(args)
    record = run_trial(task, ctrl, oracle, seed=args.seed,
                       trace=bool(args.trace_out))
    if args.trace_out:
        Path(args.trace_out).write_text(
            json.dumps(record.trajectory, sort_keys=True), encoding="utf-8")
        record.trajectory = None
    print(record.to_json())
    if record.status == "errored":
        log.error("trial errored: %s", record.error)
        return EXIT_TRANSPORT
    return EXIT_OK if record.success else EXIT_TASK_FAILED


def cmd_bench(args) -> int:
    try:
        plan = load_plan(args.plan)
    except (OSError, KeyError, ValueError) as e:
        raise UsageError(f"bad plan file: {e}") from e
    report = run_benchmark(plan, jobs=args.jobs, keep_records=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "records.jsonl").write_text(report.records_jsonl(), encoding="utf-8")
    (out / "run_meta.json").write_text(
        json.dumps({"wall_time_s": report.wall_time_s, "jobs": args.jobs}) + "\n",
        encoding="utf-8")
    log.info("benchmark finished in %.1f s", report.wall_time_s)
    print((out / "report.json").as_posix())
    return EXIT_OK


def cmd_collect(args) -> int:
    task = _task_from_args(args)
    rng = SeededRng(args.seed)
    frames = sweep_frames(task, rng.derive(0),
                          frame_budget=max(100 * args.samples, 5000))
    if args.driver == "controller":
        frames = _controller_frames(task, args.seed)
    try:
        samples = gated_collect(frames, delta_y=args.delta_y, m=args.samples,
                                task_id=task.id, frame_to_frame=args.frame_gate)
    except StreamExhausted as e:
        log.error("stream exhausted after %d samples", len(e.collected))
        return EXIT_TASK_FAILED
    pairs = None
    if args.pairs:
        pairs = sample_pairs(samples, args.pairs, task.texts, rng.derive(1))
    manifest = export_dataset(samples, args.out, pairs)
    print(manifest.as_posix())
    return EXIT_OK


def _controller_frames(task, seed):
    """Frames from a perfect-oracle controller rollout (collection driver)."""
    from .datagen import progress

    frames = []

    def cb(scene):
        frames.append((render_observation(scene, task), progress(scene)))

    ctrl = default_controller(task)
    run_trial(task, ctrl, OracleSpec.signflip(1.0), seed=seed, frame_cb=cb)
    return iter(frames)


def cmd_accuracy(args) -> int:
    pairs_path = Path(args.pairs)
    manifest_path = Path(args.manifest) if args.manifest else pairs_path.parent / "manifest.jsonl"
    try:
        samples = load_manifest(manifest_path)
        pairs = load_pairs(pairs_path, samples)
    except (OSError, KeyError, IndexError, json.JSONDecodeError) as e:
        raise UsageError(f"bad dataset: {e}") from e
    if not pairs:
        raise UsageError("no pairs to evaluate")
    task_id = pairs[0].first.task_id
    task = get_task(task_id)
    oracle_spec = _oracle_from_args(args)
    if oracle_spec is None:
        raise UsageError("accuracy needs a similarity oracle, not goal")
    oracle = make_oracle(oracle_spec, task_id, task.texts, SeededRng(args.seed))
    try:
        report = text_accuracy(pairs, oracle)
    except TransportError as e:
        log.error("transport: %s", e)
        return EXIT_TRANSPORT
    print(json.dumps(report.to_dict() | {"task": task_id}, sort_keys=True))
    return EXIT_OK


def cmd_render_check(args) -> int:
    task = _task_from_args(args)
    scene = sample_initial(task, SeededRng(args.seed))
    raster = render_observation(scene, task)
    out = Path(args.out)
    if args.golden:
        golden = Path(args.golden).read_bytes()
        if golden != raster.png:
            log.error("render differs from golden image %s", args.golden)
            out.write_bytes(raster.png)
            return EXIT_TASK_FAILED
        print("render matches golden")
        return EXIT_OK
    out.write_bytes(raster.png)
    print(out.as_posix())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradseek",
        description="Learning-free control from vision-language similarity gradients.")
    parser.add_argument("--log-level", default="WARNING",
                        help="logging level (DEBUG/INFO/WARNING/ERROR)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_oracle_flags(p):
        p.add_argument("--oracle", default="signflip",
                       choices=["signflip", "noise", "remote", "goal"])
        p.add_argument("--p", type=float, default=1.0,
                       help="signflip oracle accuracy in [0.5, 1]")
        p.add_argument("--noise-scale", type=float, default=0.05)
        p.add_argument("--endpoint", default=None,
                       help=f"bridge address host:port (default ${BRIDGE_ADDR_ENV})")

    p = sub.add_parser("trial", help="run one seeded trial, print its record")
    p.add_argument("--task", required=True)
    add_oracle_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None, help="JSON config overrides")
    p.add_argument("--trace-out", default=None, help="write the trajectory here")
    p.set_defaults(func=cmd_trial)

    p = sub.add_parser("bench", help="run a benchmark plan")
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("collect", help="collect a progress-gated dataset")
    p.add_argument("--task", required=True)
    p.add_argument("--delta-y", type=float, default=0.01)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--pairs", type=int, default=0,
                   help="also sample this many labeled pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--driver", default="sweep", choices=["sweep", "controller"])
    p.add_argument("--frame-gate", action="store_true",
                   help="gate on frame-to-frame change (strict replication mode)")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("accuracy", help="text-accuracy rate of an oracle over pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--manifest", default=None)
    add_oracle_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("render-check", help="golden-image render helper")
    p.add_argument("--task", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="render.png")
    p.add_argument("--golden", default=None)
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_render_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level.upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as e:
        print(f"transport error: {e}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":
    sys.exit(main())
