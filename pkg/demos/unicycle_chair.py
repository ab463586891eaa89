"""A two-wheeled robot pushes a chair under the table.

The controller outputs per-axis displacement commands; the unicycle
mapping turns toward the command and rolls forward only when roughly
facing it. The chair rides the robot (rigid attachment), and success is
containment in the table rectangle.
"""

from gradseek.envs import get_task
from gradseek.harness import default_controller, run_trial
from gradseek.similarity import OracleSpec

task = get_task("chair-rearrangement")
region = task.success_region
print(f"table region: x [{region.x0}, {region.x1}], y [{region.y0}, {region.y1}]")

for p in (1.0, 0.5):
    print(f"\n--- similarity oracle at accuracy p={p}")
    wins = 0
    for seed in range(10):
        path = []
        rec = run_trial(task, default_controller(task), OracleSpec.signflip(p),
                        seed=seed, frame_cb=lambda s: path.append(s.object))
        wins += rec.success
        if seed < 3:
            start = path[0]
            end = path[-1]
            print(f"seed {seed}: start ({start.x:+.2f},{start.y:+.2f}) -> "
                  f"end ({end.x:+.2f},{end.y:+.2f})  "
                  f"{'IN' if rec.success else 'out'} after {rec.steps_used} steps")
    print(f"success: {wins}/10")
