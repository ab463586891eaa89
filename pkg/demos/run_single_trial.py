"""Walk through one closed-loop trial step by step.

The controller never sees the goal: odd steps probe the end effector
randomly, even steps climb the similarity gradient estimated from how
the probe changed the (here: synthetic) similarity signal. Watch the
handle distance fall.
"""

from gradseek.datagen import progress
from gradseek.envs import get_task, render_observation
from gradseek.harness import default_controller, run_trial
from gradseek.similarity import OracleSpec

task = get_task("drawer-close")
ctrl = default_controller(task)

snapshots = []
record = run_trial(task, ctrl, OracleSpec.signflip(1.0), seed=7, trace=True,
                   frame_cb=lambda scene: snapshots.append(scene))

print(f"task:           {task.id}  ({task.texts.instruction!r})")
print(f"steps used:     {record.steps_used} / {task.max_steps}")
print(f"success:        {record.success}")
print(f"final distance: {record.final_distance:.4f} m "
      f"(threshold {task.success_threshold} m)")
print()
print("  t   |handle -> target|   robot -> handle")
for scene in snapshots[::10] + snapshots[-1:]:
    d_goal = -progress(scene)
    d_handle = (scene.object - scene.robot.position).norm()
    k = round(scene.time / task.dt)
    print(f"{k:5d}   {d_goal:10.4f} m      {d_handle:10.4f} m")

png = render_observation(snapshots[-1], task).png
open("/tmp/gradseek_final_scene.png", "wb").write(png)
print("\nfinal scene rendered to /tmp/gradseek_final_scene.png")
