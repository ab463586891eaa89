"""Trial runner and seeded benchmark orchestration.

A trial closes the loop: probe or ascend via the controller, step the
environment, observe, score similarity through the oracle, check
success. Everything is keyed off one trial seed, so a record replays
bit-identically; benchmarks fold per-trial results in index order, so
worker count never changes the report bytes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import controller as ctl
from .controller import ControllerConfig
from .core import SeededRng, distance
from .datagen import progress
from .envs import (ARTICULATED, UNICYCLE, TaskSpec, check_success, get_task,
                   render_observation, sample_initial, step_scene)
from .similarity import (BridgeError, Observation, OracleSpec, ZeroNormError,
                         make_oracle)

STATUS_OK = "ok"
STATUS_ERRORED = "errored"

# Distinct sub-stream ids per trial.
_STREAM_INIT, _STREAM_PROBE, _STREAM_ORACLE = 0, 1, 2


@dataclass
class TrialRecord:
    task_id: str
    seed: int
    oracle: dict
    success: bool
    steps_used: int
    final_distance: float
    status: str = STATUS_OK
    error: str | None = None
    trajectory: list | None = None

    def to_dict(self) -> dict:
        out = {
            "task_id": self.task_id,
            "seed": self.seed,
            "oracle": self.oracle,
            "success": self.success,
            "steps_used": self.steps_used,
            "final_distance": self.final_distance,
            "status": self.status,
        }
        if self.error is not None:
            out["error"] = self.error
        if self.trajectory is not None:
            out["trajectory"] = self.trajectory
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def trajectory_hash(self) -> str:
        if self.trajectory is None:
            raise ValueError("trial was run without tracing")
        blob = json.dumps(self.trajectory, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def default_controller(task: TaskSpec, goal_term: bool = False) -> ControllerConfig:
    """Per-task controller parameters. Probe magnitudes differ per robot
    (0.2 arm, 0.1 unicycle, 0.02 box arm); envs clamp to actuator bounds."""
    if task.kind == ARTICULATED:
        return ControllerConfig(axes=("x", "y", "z"), c=0.2, lam=(1.0, 1.0, 0.1),
                                approach_term=True, stuck_escape=True,
                                goal_term=goal_term)
    c = 0.1 if task.kind == UNICYCLE else 0.02
    return ControllerConfig(axes=("x", "y"), c=c, lam=(1.0, 1.0),
                            approach_term=False, stuck_escape=False,
                            goal_term=goal_term)


@dataclass(frozen=True)
class MethodSpec:
    """A named (controller, oracle) combination, e.g. one table column."""

    name: str
    oracle: OracleSpec | None = None
    goal_term: bool = False

    def to_dict(self) -> dict:
        return {"name": self.name, "goal_term": self.goal_term,
                "oracle": self.oracle.to_dict() if self.oracle else None}

    @classmethod
    def from_dict(cls, d: dict) -> "MethodSpec":
        if "name" in d and ("oracle" in d or d.get("goal_term")):
            oracle = OracleSpec.from_dict(d["oracle"]) if d.get("oracle") else None
            return cls(name=d["name"], oracle=oracle, goal_term=bool(d.get("goal_term")))
        return parse_method(d)

    def describe(self) -> dict:
        if self.goal_term:
            return {"method": "goal"}
        return self.oracle.to_dict()


def parse_method(d: dict) -> MethodSpec:
    """Plan-file method entry -> MethodSpec.

    Accepted shapes: {"method": "goal"}, {"method": "signflip", "p": 0.9},
    {"method": "noise", "noise_scale": 0.05}, {"method": "remote",
    "endpoint": "host:port"}.
    """
    kind = d.get("method")
    if kind == "goal":
        return MethodSpec(name="goal", goal_term=True)
    if kind == "signflip":
        return MethodSpec(name=f"signflip:{d['p']:g}", oracle=OracleSpec.signflip(d["p"]))
    if kind == "noise":
        return MethodSpec(name=f"noise:{d['noise_scale']:g}",
                          oracle=OracleSpec.noise(d["noise_scale"]))
    if kind == "remote":
        return MethodSpec(name="remote", oracle=OracleSpec.remote(d.get("endpoint")))
    raise ValueError(f"unknown method {d!r}")


def _needs_raster(oracle_spec: OracleSpec | None) -> bool:
    return oracle_spec is not None and oracle_spec.kind == "remote"


def run_trial(task: TaskSpec, ctrl: ControllerConfig, oracle_spec: OracleSpec | None,
              seed: int, trace: bool = False, frame_cb=None) -> TrialRecord:
    """Run one closed-loop trial to success or the step budget.

    Fully deterministic given (task, ctrl, oracle_spec, seed) for the
    synthetic oracles. Remote-oracle transport failures mark the record
    Errored instead of Failed.
    """
    base = SeededRng(seed)
    scene = sample_initial(task, base.derive(_STREAM_INIT))
    state = ctl.init_state(scene.robot_pos, scene.object, ctrl,
                           target=task.target, time=scene.time)
    probe_rng = base.derive(_STREAM_PROBE)

    use_oracle = not ctrl.goal_term
    oracle = None
    want_raster = False
    if use_oracle:
        oracle = make_oracle(oracle_spec, task.id, task.texts, base.derive(_STREAM_ORACLE))
        want_raster = _needs_raster(oracle_spec)

    oracle_desc = {"method": "goal"} if ctrl.goal_term else oracle_spec.to_dict()
    trajectory = [] if trace else None

    def make_obs():
        raster = render_observation(scene, task).png if want_raster else None
        obs = Observation(y=progress(scene), scene=scene, raster=raster)
        return oracle.prepare(obs) if oracle is not None else obs

    try:
        obs_prev = None
        obs_cur = make_obs()
        success = check_success(scene, task)
        steps_used = 0
        t = 0
        while not success and t < task.max_steps:
            t = ctl.tick(state)
            sig = None
            if use_oracle and t % 2 == 0:
                try:
                    sig = oracle.signal(obs_cur, obs_prev)
                except ZeroNormError:
                    sig = None  # no observable change: zero gradient
            u = ctl.control_input(state, sig, ctrl, probe_rng)
            scene = step_scene(scene, task, u)
            ctl.observe(state, scene.robot_pos, scene.object, scene.time)
            obs_prev, obs_cur = obs_cur, make_obs()
            if frame_cb is not None:
                frame_cb(scene)
            if trace:
                trajectory.append([
                    t,
                    [scene.robot_pos.x, scene.robot_pos.y, scene.robot_pos.z],
                    [scene.object.x, scene.object.y, scene.object.z],
                    [float(x) for x in u],
                    None if sig is None else sig.r1,
                    None if sig is None else sig.r2,
                ])
            success = check_success(scene, task)
            steps_used = t
    except BridgeError as e:
        return TrialRecord(task.id, seed, oracle_desc, success=False,
                           steps_used=state.t, final_distance=_final_distance(scene, task),
                           status=STATUS_ERRORED, error=f"{type(e).__name__}: {e}",
                           trajectory=trajectory)

    return TrialRecord(task.id, seed, oracle_desc, success=success,
                       steps_used=steps_used,
                       final_distance=_final_distance(scene, task),
                       trajectory=trajectory)


def _final_distance(scene, task) -> float:
    return distance(scene.object, task.target)


# --- benchmark ----------------------------------------------------------------


@dataclass(frozen=True)
class PlanEntry:
    task_id: str
    method: MethodSpec
    n: int
    base_seed: int

    def to_dict(self) -> dict:
        return {"task": self.task_id, **self.method.describe(),
                "n": self.n, "base_seed": self.base_seed}


def load_plan(path) -> list[PlanEntry]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = []
    for row in doc["plan"]:
        entries.append(PlanEntry(task_id=row["task"], method=parse_method(row),
                                 n=int(row["n"]), base_seed=int(row["base_seed"])))
    if not entries:
        raise ValueError("benchmark plan is empty")
    return entries


@dataclass
class BenchmarkRow:
    task_id: str
    method: str
    n: int
    successes: int
    errored: int
    rate: float
    config_digest: str
    base_seed: int = 0

    def to_dict(self) -> dict:
        return {"task": self.task_id, "method": self.method, "n": self.n,
                "successes": self.successes, "errored": self.errored,
                "rate": self.rate, "config_digest": self.config_digest,
                "base_seed": self.base_seed}


@dataclass
class BenchmarkReport:
    rows: list[BenchmarkRow]
    wall_time_s: float = 0.0
    records: list[TrialRecord] = field(default_factory=list)

    def to_json(self) -> str:
        # Wall time stays out: report bytes must not depend on timing.
        return json.dumps({"rows": [r.to_dict() for r in self.rows]},
                          sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["task", "method", "n", "successes", "rate", "errored"])
        for r in self.rows:
            writer.writerow([r.task_id, r.method, r.n, r.successes, repr(r.rate), r.errored])
        return buf.getvalue()

    def records_jsonl(self) -> str:
        lines = [r.to_json() for r in self.records]
        return "\n".join(lines) + ("\n" if lines else "")

    def rate(self, task_id: str, method: str) -> float:
        for r in self.rows:
            if r.task_id == task_id and r.method == method:
                return r.rate
        raise KeyError(f"no row for ({task_id}, {method})")


def config_digest(task: TaskSpec, ctrl: ControllerConfig,
                  method: MethodSpec, base_seed: int) -> str:
    blob = json.dumps({
        "task": task.to_dict(),
        "controller": ctrl.to_dict(),
        "method": method.describe(),
        "base_seed": base_seed,
    }, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def _run_one(args) -> TrialRecord:
    task_dict, ctrl_dict, oracle_dict, goal_term, seed = args
    task = TaskSpec.from_dict(task_dict)
    ctrl = ControllerConfig.from_dict(ctrl_dict)
    oracle = OracleSpec.from_dict(oracle_dict) if oracle_dict else None
    return run_trial(task, ctrl, oracle, seed)


def run_benchmark(plan: list[PlanEntry], jobs: int = 1,
                  keep_records: bool = False) -> BenchmarkReport:
    """Run every plan entry; aggregation order is fixed by trial index, so
    the report is identical for any worker count."""
    if not plan:
        raise ValueError("benchmark plan is empty")
    t0 = _time.monotonic()
    work = []
    meta = []
    for entry in plan:
        task = get_task(entry.task_id)
        ctrl = default_controller(task, goal_term=entry.method.goal_term)
        oracle = entry.method.oracle
        for i in range(entry.n):
            work.append((task.to_dict(), ctrl.to_dict(),
                         oracle.to_dict() if oracle else None,
                         entry.method.goal_term, entry.base_seed + i))
            meta.append(entry)

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, work, chunksize=8))
    else:
        records = [_run_one(w) for w in work]

    rows = []
    for entry in plan:
        got = [r for r, m in zip(records, meta) if m is entry]
        ok = [r for r in got if r.status == STATUS_OK]
        successes = sum(r.success for r in ok)
        errored = len(got) - len(ok)
        denom = len(ok)
        task = get_task(entry.task_id)
        ctrl = default_controller(task, goal_term=entry.method.goal_term)
        rows.append(BenchmarkRow(
            task_id=entry.task_id,
            method=entry.method.name,
            n=denom,
            successes=successes,
            errored=errored,
            rate=successes / denom if denom else 0.0,
            config_digest=config_digest(task, ctrl, entry.method, entry.base_seed),
            base_seed=entry.base_seed,
        ))
    report = BenchmarkReport(rows=rows, wall_time_s=_time.monotonic() - t0)
    if keep_records:
        report.records = records
    return report
