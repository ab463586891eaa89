from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from gradseek.core import Pose2, SeededRng, Vec3, distance
from gradseek.envs import (ARTICULATED_TASKS, TASKS, TaskSpec, check_success,
                           displacement_to_unicycle, get_task,
                           render_observation, sample_initial,
                           step_articulated, step_rearrangement, step_scene,
                           step_unicycle)


def scene_for(task_id, seed=0, **overrides):
    task = get_task(task_id)
    scene = sample_initial(task, SeededRng(seed))
    if overrides:
        scene = replace(scene, **overrides)
    return task, scene


def put_ee_at(scene, pos: Vec3):
    return replace(scene, robot=Pose2(pos, scene.robot.heading))


def on_manifold_error(task, scene) -> float:
    joint = task.joint
    handle = joint.handle(scene.articulation_q)
    return distance(handle, scene.object)


# --- articulated kinematics -----------------------------------------------------


def test_no_contact_leaves_handle_unmoved():
    task, scene = scene_for("drawer-close")
    far = put_ee_at(scene, Vec3(-0.4, 0.1, 0.3))
    out = step_articulated(far, task, np.array([0.004, -0.004, 0.002]))
    assert out.object == scene.object
    assert out.articulation_q == scene.articulation_q


def test_contact_along_axis_advances_q_exactly():
    # Drawer axis is -y: pushing the end effector 0.02 along it moves the
    # joint coordinate by exactly 0.02 (tangent projection identity).
    task, scene = scene_for("drawer-close")
    task = replace(task, max_step=0.05)
    scene = put_ee_at(scene, scene.object)
    out = step_articulated(scene, task, np.array([0.0, -0.02, 0.0]))
    assert out.articulation_q - scene.articulation_q == pytest.approx(0.02, abs=1e-12)


def test_contact_orthogonal_to_arc_tangent_leaves_q():
    # Door handle sits on a circle: a purely radial push changes the
    # bearing not at all.
    task, scene = scene_for("door-close")
    task = replace(task, max_step=0.05)
    scene = put_ee_at(scene, scene.object)
    center = task.joint.center
    radial = scene.object - center
    r = math.hypot(radial.x, radial.y)
    u = np.array([radial.x / r * 0.01, radial.y / r * 0.01, 0.0])
    out = step_articulated(scene, task, u)
    assert out.articulation_q == pytest.approx(scene.articulation_q, abs=1e-12)


@pytest.mark.parametrize("task_id", ["drawer-close", "door-open", "window-close"])
def test_in_contact_reversal_restores_q(task_id):
    task, scene = scene_for(task_id, seed=3)
    scene = put_ee_at(scene, scene.object)
    q0 = scene.articulation_q
    u = np.array([0.003, -0.002, 0.001])
    mid = step_articulated(scene, task, u)
    back = step_articulated(mid, task, -u)
    assert back.articulation_q == pytest.approx(q0, abs=1e-12)


@pytest.mark.parametrize("task_id", ARTICULATED_TASKS)
def test_random_rollout_respects_limits_and_manifold(task_id):
    task, scene = scene_for(task_id, seed=1)
    rng = SeededRng(99)
    for _ in range(300):
        u = rng.uniform(-task.max_step, task.max_step, size=3)
        scene = step_articulated(scene, task, u)
        q = scene.articulation_q
        assert task.joint.q_min - 1e-12 <= q <= task.joint.q_max + 1e-12
        assert on_manifold_error(task, scene) < 1e-9
        p = scene.robot.position
        ws = task.workspace
        assert ws.lo.x <= p.x <= ws.hi.x
        assert ws.lo.y <= p.y <= ws.hi.y
        assert ws.lo.z <= p.z <= ws.hi.z


def test_inputs_clamped_to_max_step():
    task, scene = scene_for("drawer-close")
    far = put_ee_at(scene, Vec3(0.0, 0.1, 0.2))
    out = step_articulated(far, task, np.array([10.0, -10.0, 10.0]))
    d = out.robot.position - far.robot.position
    assert abs(d.x) <= task.max_step + 1e-12
    assert abs(d.y) <= task.max_step + 1e-12
    assert abs(d.z) <= task.max_step + 1e-12


def test_transitions_are_pure_and_replayable():
    task, scene = scene_for("door-close", seed=5)
    u = np.array([0.002, 0.003, -0.001])
    a = step_articulated(scene, task, u)
    b = step_articulated(scene, task, u)
    assert a == b
    assert scene.time + task.dt == a.time


# --- unicycle -------------------------------------------------------------------


def test_unicycle_pure_rotation():
    pose = Pose2(Vec3(1.0, 2.0, 0.0), heading=0.3)
    out = step_unicycle(pose, 0.0, 0.5, 0.2)
    assert out.position == pose.position
    assert out.heading == pytest.approx(0.3 + 0.1)


def test_unicycle_straight_line_hand_value():
    pose = Pose2(Vec3(0, 0, 0), heading=0.0)
    out = step_unicycle(pose, 0.1, 0.0, 0.2)
    assert out.position.x == pytest.approx(0.02, abs=1e-15)
    assert out.position.y == 0.0


def test_unicycle_displacement_bound():
    rng = SeededRng(31)
    for _ in range(200):
        pose = Pose2(Vec3(*rng.uniform(-1, 1, size=3)), float(rng.uniform(-4, 4)))
        v = float(rng.uniform(-0.5, 0.5))
        w = float(rng.uniform(-4, 4))
        dt = float(rng.uniform(0.05, 1.0))
        out = step_unicycle(pose, v, w, dt)
        assert distance(out.position, pose.position) <= abs(v) * dt + 1e-12


def test_displacement_mapping_aligned():
    task = get_task("chair-rearrangement")
    pose = Pose2(Vec3(0, 0, 0), heading=0.0)
    v, w = displacement_to_unicycle(np.array([0.1, 0.0]), pose, task.unicycle)
    assert w == 0.0
    assert v > 0


def test_displacement_mapping_opposite_suppresses_v():
    task = get_task("chair-rearrangement")
    pose = Pose2(Vec3(0, 0, 0), heading=0.0)
    v, w = displacement_to_unicycle(np.array([-0.1, 0.001]), pose, task.unicycle)
    assert v == 0.0
    assert abs(w) == task.unicycle.omega_max
    assert w > 0  # shorter turn is counterclockwise for a +y-ish goal


def test_displacement_mapping_zero_input():
    task = get_task("chair-rearrangement")
    pose = Pose2(Vec3(0, 0, 0), heading=1.0)
    assert displacement_to_unicycle(np.zeros(2), pose, task.unicycle) == (0.0, 0.0)


# --- rearrangement ---------------------------------------------------------------


def test_box_rigid_attachment():
    task, scene = scene_for("box-rearrangement", seed=2)
    out = step_rearrangement(scene, task, np.array([0.01, 0.0]))
    assert out.object.x == pytest.approx(scene.object.x + 0.01)
    assert out.object == out.robot.position


def test_chair_object_rides_robot():
    task, scene = scene_for("chair-rearrangement", seed=2)
    out = scene
    rng = SeededRng(7)
    for _ in range(50):
        out = step_rearrangement(out, task, rng.uniform(-0.1, 0.1, size=2))
        assert out.object == out.robot.position


def test_rearrangement_clamped_to_bounds():
    task, scene = scene_for("box-rearrangement", seed=2)
    out = scene
    for _ in range(100):
        out = step_rearrangement(out, task, np.array([0.025, 0.025]))
    assert out.object.x <= task.workspace.hi.x + 1e-12
    assert out.object.y <= task.workspace.hi.y + 1e-12


# --- success predicates -----------------------------------------------------------


def test_drawer_success_threshold_boundary():
    task = get_task("drawer-close")
    # Handle exactly 0.029 m from the closed-position target: success.
    near = sample_initial(task, SeededRng(0))
    near = replace(near, object=task.joint.handle(0.029), articulation_q=0.029)
    far = replace(near, object=task.joint.handle(0.031), articulation_q=0.031)
    assert check_success(near, task)
    assert not check_success(far, task)


def test_chair_success_is_region_containment():
    task = get_task("chair-rearrangement")
    inside = sample_initial(task, SeededRng(0))
    inside = replace(inside, object=Vec3(0.6, 0.6, 0))
    outside = replace(inside, object=Vec3(opposite := -0.6, 0.6, 0))
    assert check_success(inside, task)
    assert not check_success(outside, task)


# --- initial states ----------------------------------------------------------------


def test_sample_initial_is_seed_deterministic():
    task = get_task("drawer-close")
    a = sample_initial(task, SeededRng(4))
    b = sample_initial(task, SeededRng(4))
    c = sample_initial(task, SeededRng(5))
    assert a == b
    assert a != c


def test_chair_initials_cycle_five_starts():
    task = get_task("chair-rearrangement")
    seen = set()
    for seed in range(40):
        s = sample_initial(task, SeededRng(seed))
        best = min(range(5), key=lambda i: math.hypot(
            s.robot.position.x - task.starts[i][0],
            s.robot.position.y - task.starts[i][1]))
        seen.add(best)
    assert seen == {0, 1, 2, 3, 4}


# --- rendering ---------------------------------------------------------------------


def test_render_is_deterministic():
    task, scene = scene_for("drawer-close", seed=6)
    a = render_observation(scene, task)
    b = render_observation(scene, task)
    assert a.png == b.png
    assert (a.width, a.height) == (224, 224)


def test_render_sensitive_to_object_motion():
    task, scene = scene_for("drawer-close", seed=6)
    # One pixel spans ~1/224 of the 1.0 m view: 0.005 m is >= 1 px.
    moved = replace(scene, object=scene.object + Vec3(0.005, 0, 0))
    assert render_observation(scene, task).png != render_observation(moved, task).png


def test_render_custom_size():
    task, scene = scene_for("box-rearrangement", seed=6)
    r = render_observation(scene, task, size=64)
    assert (r.width, r.height) == (64, 64)


# --- task registry / serialization -------------------------------------------------


def test_registry_has_all_eight_tasks():
    assert len(TASKS) == 8
    for tid in ("drawer-close", "drawer-open", "door-close", "door-open",
                "window-close", "window-open", "chair-rearrangement",
                "box-rearrangement"):
        assert tid in TASKS


def test_paper_prompts_are_wired():
    assert TASKS["drawer-close"].texts.instruction == "close a drawer with a drawer handle"
    assert TASKS["drawer-close"].texts.opposite == "open a drawer with a drawer handle"
    assert TASKS["window-open"].texts.instruction == "open a window in the left direction"
    assert TASKS["chair-rearrangement"].texts.instruction == "place a green chair under the table"
    assert TASKS["box-rearrangement"].texts.opposite == "place a red box away from the yellow box"


def test_success_thresholds_match_task_definitions():
    assert TASKS["drawer-close"].success_threshold == 0.03
    assert TASKS["drawer-open"].success_threshold == 0.03
    assert TASKS["door-close"].success_threshold == 0.05
    assert TASKS["window-open"].success_threshold == 0.05
    assert TASKS["box-rearrangement"].success_threshold == 0.05


def test_step_budgets_match_protocol():
    assert TASKS["window-close"].max_steps == 500
    assert TASKS["window-open"].max_steps == 500
    assert TASKS["drawer-close"].max_steps == 1000
    assert TASKS["door-open"].max_steps == 1000
    assert TASKS["chair-rearrangement"].max_steps == 200
    assert TASKS["chair-rearrangement"].dt == 0.2
    assert TASKS["box-rearrangement"].max_steps == 50
    assert TASKS["box-rearrangement"].dt == 1.0


@pytest.mark.parametrize("task_id", sorted(TASKS))
def test_taskspec_round_trips_through_dict(task_id):
    task = get_task(task_id)
    again = TaskSpec.from_dict(task.to_dict())
    assert again == task


def test_unknown_task_raises():
    with pytest.raises(KeyError):
        get_task("juggling")


def test_step_scene_dispatch():
    for tid in ("drawer-close", "chair-rearrangement", "box-rearrangement"):
        task, scene = scene_for(tid, seed=1)
        out = step_scene(scene, task, np.zeros(len(task.axes)))
        assert out.time > scene.time
