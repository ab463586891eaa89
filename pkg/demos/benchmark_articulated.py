"""Reproduce the multitask success-rate table at desk scale.

Each row runs 100 seeded trials. "goal" steers with the known target
(the ideal-information baseline); the signflip columns emulate
similarity oracles at a given text-accuracy rate, so the table shows
how success tracks oracle quality. Takes a couple of minutes.
"""

from gradseek.envs import ARTICULATED_TASKS
from gradseek.harness import PlanEntry, parse_method, run_benchmark

METHODS = [
    {"method": "goal"},
    {"method": "signflip", "p": 0.5},
    {"method": "signflip", "p": 0.73},
    {"method": "signflip", "p": 0.94},
    {"method": "signflip", "p": 1.0},
]

plan = [
    PlanEntry(tid, parse_method(m), n=100, base_seed=10_000 * (i + 1))
    for i, tid in enumerate(ARTICULATED_TASKS)
    for m in METHODS
]

report = run_benchmark(plan, jobs=1)

methods = [parse_method(m).name for m in METHODS]
print(f"{'task':15s} " + " ".join(f"{m:>13s}" for m in methods))
for tid in ARTICULATED_TASKS:
    cells = " ".join(f"{report.rate(tid, m):13.2f}" for m in methods)
    print(f"{tid:15s} {cells}")
print(f"\n{sum(r.n for r in report.rows)} trials in {report.wall_time_s:.0f} s")
