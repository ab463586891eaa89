"""Deterministic desk-scale task environments and their success predicates.

Six articulated manipulation tasks (drawer/door/window, open and close)
drive a 1-DOF handle along a segment or hinge arc through an end
effector that must first reach the handle; two rearrangement tasks move
an object rigidly attached to the robot (a planar unicycle pushing a
chair, and an arm sliding a box). All transitions are pure functions of
(state, input): replay is bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import Pose2, SeededRng, Vec3, distance, displacement_from_axes, wrap_angle
from .raster import WorldView, encode_png
from .similarity import TextPair


@dataclass(frozen=True)
class ObservationRaster:
    """A PNG-encoded camera frame; a deterministic function of the scene."""

    width: int
    height: int
    png: bytes


@dataclass(frozen=True)
class Box3:
    lo: Vec3
    hi: Vec3

    def clamp(self, p: Vec3) -> Vec3:
        return Vec3(
            min(max(p.x, self.lo.x), self.hi.x),
            min(max(p.y, self.lo.y), self.hi.y),
            min(max(p.z, self.lo.z), self.hi.z),
        )

    def to_dict(self):
        return {"lo": [self.lo.x, self.lo.y, self.lo.z],
                "hi": [self.hi.x, self.hi.y, self.hi.z]}

    @classmethod
    def from_dict(cls, d):
        return cls(Vec3(*d["lo"]), Vec3(*d["hi"]))


@dataclass(frozen=True)
class Rect2:
    """Axis-aligned region in the plane (the chair task's success area)."""

    x0: float
    x1: float
    y0: float
    y1: float

    def contains(self, p: Vec3) -> bool:
        return self.x0 <= p.x <= self.x1 and self.y0 <= p.y <= self.y1

    @property
    def center(self) -> Vec3:
        return Vec3(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1), 0.0)

    def to_dict(self):
        return {"x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1}

    @classmethod
    def from_dict(cls, d):
        return cls(d["x0"], d["x1"], d["y0"], d["y1"])


@dataclass(frozen=True)
class SegmentJoint:
    """Prismatic 1-DOF articulation: handle slides along a straight segment."""

    origin: Vec3
    axis: tuple[float, float, float]
    q_min: float
    q_max: float

    def __post_init__(self):
        n = math.sqrt(sum(a * a for a in self.axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("segment axis must be a unit vector")

    def handle(self, q: float) -> Vec3:
        return self.origin + Vec3(*self.axis).scaled(q)

    def coordinate(self, p: Vec3, q_ref: float) -> float:
        d = p - self.origin
        return d.x * self.axis[0] + d.y * self.axis[1] + d.z * self.axis[2]

    def clamp_q(self, q: float) -> float:
        return min(max(q, self.q_min), self.q_max)

    def to_dict(self):
        return {"type": "segment", "origin": [self.origin.x, self.origin.y, self.origin.z],
                "axis": list(self.axis), "q_min": self.q_min, "q_max": self.q_max}


@dataclass(frozen=True)
class HingeJoint:
    """Revolute 1-DOF articulation: handle swings on a horizontal arc."""

    center: Vec3
    radius: float
    q_min: float
    q_max: float

    def handle(self, q: float) -> Vec3:
        return Vec3(self.center.x + self.radius * math.cos(q),
                    self.center.y + self.radius * math.sin(q),
                    self.center.z)

    def coordinate(self, p: Vec3, q_ref: float) -> float:
        dx, dy = p.x - self.center.x, p.y - self.center.y
        if math.hypot(dx, dy) < 1e-9:
            return q_ref
        return q_ref + wrap_angle(math.atan2(dy, dx) - q_ref)

    def clamp_q(self, q: float) -> float:
        return min(max(q, self.q_min), self.q_max)

    def to_dict(self):
        return {"type": "hinge", "center": [self.center.x, self.center.y, self.center.z],
                "radius": self.radius, "q_min": self.q_min, "q_max": self.q_max}


def joint_from_dict(d):
    if d["type"] == "segment":
        return SegmentJoint(Vec3(*d["origin"]), tuple(d["axis"]), d["q_min"], d["q_max"])
    if d["type"] == "hinge":
        return HingeJoint(Vec3(*d["center"]), d["radius"], d["q_min"], d["q_max"])
    raise ValueError(f"unknown joint type {d['type']!r}")


@dataclass(frozen=True)
class UnicycleParams:
    # Turn gain/limits sized so the robot can re-aim within one control
    # step: probe and ascent commands alternate direction every step.
    k_v: float = 5.0
    k_omega: float = 8.0
    v_max: float = 0.5
    omega_max: float = 4.0

    def to_dict(self):
        return {"k_v": self.k_v, "k_omega": self.k_omega,
                "v_max": self.v_max, "omega_max": self.omega_max}


ARTICULATED = "articulated"
BOX = "box"
UNICYCLE = "unicycle"


@dataclass(frozen=True)
class TaskSpec:
    id: str
    kind: str
    texts: TextPair
    success_threshold: float
    max_steps: int
    dt: float
    axes: tuple[str, ...]
    max_step: float
    workspace: Box3
    contact_radius: float = 0.05
    joint: SegmentJoint | HingeJoint | None = None
    target_q: float | None = None
    q_init: tuple[float, float] | None = None
    ee_offset: Box3 | None = None
    starts: tuple[tuple[float, float], ...] | None = None
    start_jitter: float = 0.0
    success_region: Rect2 | None = None
    unicycle: UnicycleParams | None = None
    fixed_target: tuple[float, float, float] | None = None
    view: tuple[float, float, float, float] = (-0.5, 0.5, 0.0, 0.8)

    def __post_init__(self):
        if self.success_threshold <= 0:
            raise ValueError("success_threshold must be positive")
        if self.kind == ARTICULATED and (self.joint is None or self.target_q is None):
            raise ValueError("articulated task needs joint and target_q")

    @property
    def target(self) -> Vec3:
        if self.kind == ARTICULATED:
            return self.joint.handle(self.target_q)
        if self.kind == UNICYCLE:
            return self.success_region.center
        return Vec3(*self.fixed_target)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "texts": {"instruction": self.texts.instruction, "opposite": self.texts.opposite},
            "success_threshold": self.success_threshold,
            "max_steps": self.max_steps,
            "dt": self.dt,
            "axes": list(self.axes),
            "max_step": self.max_step,
            "workspace": self.workspace.to_dict(),
            "contact_radius": self.contact_radius,
            "joint": self.joint.to_dict() if self.joint else None,
            "target_q": self.target_q,
            "q_init": list(self.q_init) if self.q_init else None,
            "ee_offset": self.ee_offset.to_dict() if self.ee_offset else None,
            "starts": [list(s) for s in self.starts] if self.starts else None,
            "start_jitter": self.start_jitter,
            "success_region": self.success_region.to_dict() if self.success_region else None,
            "unicycle": self.unicycle.to_dict() if self.unicycle else None,
            "fixed_target": list(self.fixed_target) if self.fixed_target else None,
            "view": list(self.view),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(
            id=d["id"],
            kind=d["kind"],
            texts=TextPair(d["texts"]["instruction"], d["texts"]["opposite"]),
            success_threshold=d["success_threshold"],
            max_steps=d["max_steps"],
            dt=d["dt"],
            axes=tuple(d["axes"]),
            max_step=d["max_step"],
            workspace=Box3.from_dict(d["workspace"]),
            contact_radius=d.get("contact_radius", 0.05),
            joint=joint_from_dict(d["joint"]) if d.get("joint") else None,
            target_q=d.get("target_q"),
            q_init=tuple(d["q_init"]) if d.get("q_init") else None,
            ee_offset=Box3.from_dict(d["ee_offset"]) if d.get("ee_offset") else None,
            starts=tuple(tuple(s) for s in d["starts"]) if d.get("starts") else None,
            start_jitter=d.get("start_jitter", 0.0),
            success_region=Rect2.from_dict(d["success_region"]) if d.get("success_region") else None,
            unicycle=UnicycleParams(**d["unicycle"]) if d.get("unicycle") else None,
            fixed_target=tuple(d["fixed_target"]) if d.get("fixed_target") else None,
            view=tuple(d.get("view", (-0.5, 0.5, 0.0, 0.8))),
        )


@dataclass(frozen=True)
class SceneState:
    """World snapshot: robot pose, object (handle) position, fixed target."""

    robot: Pose2
    object: Vec3
    object_initial: Vec3
    target: Vec3
    articulation_q: float
    time: float

    @property
    def robot_pos(self) -> Vec3:
        return self.robot.position


# --- transitions --------------------------------------------------------------


def _clip_input(u, max_step: float) -> np.ndarray:
    return np.clip(np.asarray(u, dtype=np.float64), -max_step, max_step)


def step_articulated(scene: SceneState, task: TaskSpec, u) -> SceneState:
    """Translate the end effector; drag the handle along its joint if touching.

    Contact is checked before the move. While touching, the joint
    coordinate follows the end effector's own manifold coordinate, so an
    exactly reversed displacement restores the previous q (no limit hit).
    """
    d = displacement_from_axes(_clip_input(u, task.max_step), task.axes)
    ee_old = scene.robot.position
    ee_new = task.workspace.clamp(ee_old + d)
    q = scene.articulation_q
    if distance(ee_old, scene.object) <= task.contact_radius:
        c_old = task.joint.coordinate(ee_old, q)
        c_new = task.joint.coordinate(ee_new, c_old)
        q = task.joint.clamp_q(q + (c_new - c_old))
    return replace(
        scene,
        robot=Pose2(ee_new, scene.robot.heading),
        object=task.joint.handle(q),
        articulation_q=q,
        time=scene.time + task.dt,
    )


def step_unicycle(pose: Pose2, v: float, omega: float, dt: float) -> Pose2:
    """Forward-Euler unicycle kinematics; heading renormalized."""
    x = pose.position.x + v * math.cos(pose.heading) * dt
    y = pose.position.y + v * math.sin(pose.heading) * dt
    return Pose2(Vec3(x, y, pose.position.z), wrap_angle(pose.heading + omega * dt))


def displacement_to_unicycle(u_xy, pose: Pose2, params: UnicycleParams) -> tuple[float, float]:
    """Map a commanded planar displacement onto (v, omega) wheel commands.

    Turns toward the commanded direction; forward speed is the projection
    onto the heading, suppressed to zero when the command points behind.
    """
    ux, uy = float(u_xy[0]), float(u_xy[1])
    if math.hypot(ux, uy) < 1e-12:
        return 0.0, 0.0
    err = wrap_angle(math.atan2(uy, ux) - pose.heading)
    omega = min(max(params.k_omega * err, -params.omega_max), params.omega_max)
    along = ux * math.cos(pose.heading) + uy * math.sin(pose.heading)
    v = max(0.0, params.k_v * along)
    v = min(v, params.v_max)
    return v, omega


def step_rearrangement(scene: SceneState, task: TaskSpec, u) -> SceneState:
    """Move the robot with its rigidly attached object (chair or box task)."""
    u = _clip_input(u, task.max_step)
    if task.kind == UNICYCLE:
        v, omega = displacement_to_unicycle(u, scene.robot, task.unicycle)
        pose = step_unicycle(scene.robot, v, omega, task.dt)
        pose = Pose2(task.workspace.clamp(pose.position), pose.heading)
    else:
        d = displacement_from_axes(u, task.axes)
        pose = Pose2(task.workspace.clamp(scene.robot.position + d), scene.robot.heading)
    return replace(scene, robot=pose, object=pose.position, time=scene.time + task.dt)


def step_scene(scene: SceneState, task: TaskSpec, u) -> SceneState:
    if task.kind == ARTICULATED:
        return step_articulated(scene, task, u)
    return step_rearrangement(scene, task, u)


def check_success(scene: SceneState, task: TaskSpec) -> bool:
    if task.kind == UNICYCLE:
        return task.success_region.contains(scene.object)
    return distance(scene.object, scene.target) <= task.success_threshold


# --- initial states -----------------------------------------------------------


def sample_initial(task: TaskSpec, rng: SeededRng) -> SceneState:
    """Seed-deterministic initial scene (jittered handle and robot starts)."""
    if task.kind == ARTICULATED:
        q0 = float(rng.uniform(task.q_init[0], task.q_init[1]))
        handle = task.joint.handle(q0)
        off = task.ee_offset
        ee = Vec3(
            handle.x + float(rng.uniform(off.lo.x, off.hi.x)),
            handle.y + float(rng.uniform(off.lo.y, off.hi.y)),
            handle.z + float(rng.uniform(off.lo.z, off.hi.z)),
        )
        ee = task.workspace.clamp(ee)
        return SceneState(
            robot=Pose2(ee),
            object=handle,
            object_initial=handle,
            target=task.target,
            articulation_q=q0,
            time=0.0,
        )
    k = int(rng.integers(0, len(task.starts)))
    sx, sy = task.starts[k]
    jitter = task.start_jitter
    pos = Vec3(sx + float(rng.uniform(-jitter, jitter)),
               sy + float(rng.uniform(-jitter, jitter)), 0.0)
    pos = task.workspace.clamp(pos)
    heading = float(rng.uniform(-math.pi, math.pi)) if task.kind == UNICYCLE else 0.0
    return SceneState(
        robot=Pose2(pos, heading),
        object=pos,
        object_initial=pos,
        target=task.target,
        articulation_q=0.0,
        time=0.0,
    )


# --- rendering ----------------------------------------------------------------

_BG = (40, 40, 40)
_TARGET = (40, 200, 60)
_OBJECT = (220, 60, 50)
_ROBOT = (70, 110, 230)


def render_observation(scene: SceneState, task: TaskSpec, size: int = 224) -> ObservationRaster:
    """Top-down rasterization: colored rectangles on a fixed background."""
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:, :] = _BG
    view = WorldView(*task.view, width=size, height=size)
    if task.kind == UNICYCLE:
        r = task.success_region
        view.draw_world_rect(img, r.x0, r.y0, r.x1, r.y1, _TARGET)
    else:
        view.draw_square(img, task.target.x, task.target.y, 5, _TARGET)
    view.draw_square(img, scene.object.x, scene.object.y, 4, _OBJECT)
    view.draw_square(img, scene.robot.position.x, scene.robot.position.y, 3, _ROBOT)
    return ObservationRaster(width=size, height=size, png=encode_png(img))


# --- task registry ------------------------------------------------------------

_ARM_WORKSPACE = Box3(Vec3(-0.5, 0.0, 0.0), Vec3(0.5, 0.8, 0.4))
_ARM_EE_OFFSET = Box3(Vec3(-0.10, -0.10, 0.0), Vec3(0.10, 0.10, 0.08))

_DRAWER = SegmentJoint(Vec3(0.0, 0.55, 0.08), (0.0, -1.0, 0.0), 0.0, 0.2)
_WINDOW = SegmentJoint(Vec3(-0.1, 0.45, 0.25), (1.0, 0.0, 0.0), 0.0, 0.2)
_DOOR = HingeJoint(Vec3(0.2, 0.3, 0.12), 0.3, math.pi / 2, math.pi)

_CHAIR_REGION = Rect2(0.35, 0.85, 0.35, 0.85)
_YELLOW_BOX = Vec3(0.12, 0.10, 0.0)


def _articulated(task_id, t1, t2, joint, q_init, target_q, threshold, max_steps):
    return TaskSpec(
        id=task_id,
        kind=ARTICULATED,
        texts=TextPair(t1, t2),
        success_threshold=threshold,
        max_steps=max_steps,
        dt=0.1,
        axes=("x", "y", "z"),
        max_step=0.004,
        workspace=_ARM_WORKSPACE,
        joint=joint,
        target_q=target_q,
        q_init=q_init,
        ee_offset=_ARM_EE_OFFSET,
    )


def default_tasks() -> dict[str, TaskSpec]:
    qs = 0.2
    arc0, arc1 = math.pi / 2, math.pi
    tasks = [
        _articulated("drawer-close",
                     "close a drawer with a drawer handle",
                     "open a drawer with a drawer handle",
                     _DRAWER, (0.8 * qs, qs), 0.0, 0.03, 1000),
        _articulated("drawer-open",
                     "open a drawer with a drawer handle",
                     "close a drawer with a drawer handle",
                     _DRAWER, (0.0, 0.2 * qs), qs, 0.03, 1000),
        _articulated("door-close",
                     "close a door with a door handle",
                     "open a door with a door handle",
                     _DOOR, (arc1 - 0.15, arc1), arc0, 0.05, 1000),
        _articulated("door-open",
                     "open a door with a door handle",
                     "close a door with a door handle",
                     _DOOR, (arc0, arc0 + 0.15), arc1, 0.05, 1000),
        _articulated("window-close",
                     "close a window in the right direction",
                     "open a window in the left direction",
                     _WINDOW, (0.0, 0.2 * qs), qs, 0.05, 500),
        _articulated("window-open",
                     "open a window in the left direction",
                     "close a window in the right direction",
                     _WINDOW, (0.8 * qs, qs), 0.0, 0.05, 500),
        TaskSpec(
            id="chair-rearrangement",
            kind=UNICYCLE,
            texts=TextPair("place a green chair under the table",
                           "place a green chair away from the table"),
            success_threshold=0.05,
            max_steps=200,
            dt=0.2,
            axes=("x", "y"),
            max_step=0.1,
            workspace=Box3(Vec3(-1.5, -1.5, 0.0), Vec3(1.5, 1.5, 0.0)),
            starts=((-0.8, -0.8), (-0.9, 0.5), (0.0, -1.0), (0.9, -0.6), (-0.2, 1.0)),
            start_jitter=0.05,
            success_region=_CHAIR_REGION,
            unicycle=UnicycleParams(),
            view=(-1.5, 1.5, -1.5, 1.5),
        ),
        TaskSpec(
            id="box-rearrangement",
            kind=BOX,
            texts=TextPair("place a red box next to the yellow box",
                           "place a red box away from the yellow box"),
            success_threshold=0.05,
            max_steps=50,
            dt=1.0,
            axes=("x", "y"),
            max_step=0.025,
            workspace=Box3(Vec3(-0.3, -0.3, 0.0), Vec3(0.3, 0.3, 0.0)),
            starts=((-0.2, -0.15), (-0.22, 0.12), (0.0, -0.2), (0.18, -0.18), (-0.1, 0.22)),
            start_jitter=0.01,
            fixed_target=(_YELLOW_BOX.x - 0.07, _YELLOW_BOX.y, 0.0),
            view=(-0.3, 0.3, -0.3, 0.3),
        ),
    ]
    return {t.id: t for t in tasks}


TASKS = default_tasks()


def get_task(task_id: str) -> TaskSpec:
    if task_id not in TASKS:
        raise KeyError(f"unknown task {task_id!r}; known: {sorted(TASKS)}")
    return TASKS[task_id]


def task_ids() -> list[str]:
    return sorted(TASKS)


ARTICULATED_TASKS = tuple(
    t for t in ("drawer-close", "drawer-open", "door-close",
                "door-open", "window-close", "window-open")
)
