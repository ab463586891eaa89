"""Render every task's initial scene to PNG.

The rasterizer is deterministic down to the byte, which is what the
golden-image test (`gradseek render-check`) and replayable remote-oracle
trials rely on.
"""

import tempfile
from pathlib import Path

from gradseek.core import SeededRng
from gradseek.envs import TASKS, render_observation, sample_initial

out = Path(tempfile.mkdtemp(prefix="gradseek_gallery_"))
for tid, task in sorted(TASKS.items()):
    scene = sample_initial(task, SeededRng(0))
    raster = render_observation(scene, task)
    path = out / f"{tid}.png"
    path.write_bytes(raster.png)
    again = render_observation(scene, task).png
    print(f"{tid:22s} {raster.width}x{raster.height}  "
          f"{len(raster.png):6d} bytes  deterministic={raster.png == again}")
print(f"\ngallery written to {out}")
