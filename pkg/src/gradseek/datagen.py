"""Progress-gated data collection, pair labeling, dataset export, and the
text-accuracy metric.

The collection gate keeps a frame only when progress has moved more
than `delta_y` since the last *collected* frame (the strict
frame-to-frame variant is available behind a flag); pairs of collected
frames get their text order from which frame is closer to the goal; the
accuracy metric scores an oracle by whether its similarity difference
agrees in sign with the true progress difference.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .core import Pose2, SeededRng, Vec3, distance
from .envs import (ARTICULATED, ObservationRaster, SceneState, TaskSpec,
                   render_observation, sample_initial)
from .raster import decode_png
from .similarity import Observation, SimilaritySignal, TextPair, ZeroNormError

Y_TIE_EPS = 1e-12


class StreamExhausted(Exception):
    """The frame stream ended before the requested sample count."""

    def __init__(self, collected):
        super().__init__(f"stream ended after {len(collected)} collected samples")
        self.collected = collected


class TooFewSamples(Exception):
    pass


@dataclass(frozen=True)
class Sample:
    """One collected frame: image, progress value, task, frame index."""

    image: ObservationRaster
    y: float
    task_id: str
    k: int

    def __post_init__(self):
        if self.y > 0.0:
            raise ValueError("progress y is a negative distance, must be <= 0")


@dataclass(frozen=True)
class LabeledPair:
    first: Sample
    second: Sample
    text_order: tuple[str, str]


@dataclass
class AccuracyReport:
    """Text-accuracy rate A with the per-pair bits and raw signals behind it."""

    a: float
    n_trials: int
    bits: list[int]
    rows: list[tuple[float, float, float, float]] = field(default_factory=list)
    n_excluded: int = 0

    def to_dict(self) -> dict:
        return {"A": self.a, "n_trials": self.n_trials,
                "n_excluded": self.n_excluded, "bits": self.bits}


def progress(scene: SceneState) -> float:
    """Progress signal: negative distance from the object to its target."""
    return -distance(scene.target, scene.object)


def gated_collect(frames, delta_y: float, m: int, task_id: str = "",
                  frame_to_frame: bool = False) -> list[Sample]:
    """Collect up to `m` samples from an iterable of (raster, y) frames.

    The first frame is always the baseline. Afterwards a frame is kept
    when |y - y_ref| > delta_y, where y_ref is the last collected y (or
    the previous frame's y with `frame_to_frame=True`, the literal
    change-per-step gate). Raises StreamExhausted, carrying the partial
    collection, if the stream ends early.
    """
    if delta_y <= 0:
        raise ValueError("delta_y must be positive")
    if m < 2:
        raise ValueError("m must be at least 2")
    out: list[Sample] = []
    y_ref = None
    for k, (raster, y) in enumerate(frames):
        y = float(y)
        take = y_ref is None or abs(y - y_ref) > delta_y
        if take:
            out.append(Sample(raster, y, task_id, k))
        if frame_to_frame or take:
            y_ref = y
        if len(out) >= m:
            return out
    raise StreamExhausted(out)


def label_pair(s1: Sample, s2: Sample, texts: TextPair) -> LabeledPair:
    """Ground-truth text order: instruction first iff the second sample is
    closer to the goal; ties fall to the opposite-first branch."""
    if s2.y > s1.y:
        order = (texts.instruction, texts.opposite)
    else:
        order = (texts.opposite, texts.instruction)
    return LabeledPair(s1, s2, order)


def sample_pairs(dataset: list[Sample], k: int, texts: TextPair,
                 rng: SeededRng) -> list[LabeledPair]:
    """K uniformly random ordered pairs of distinct samples, labeled."""
    n = len(dataset)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, have {n}")
    pairs = []
    for _ in range(k):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n - 1))
        if j >= i:
            j += 1
        pairs.append(label_pair(dataset[i], dataset[j], texts))
    return pairs


# --- dataset on disk ----------------------------------------------------------


def export_dataset(samples: list[Sample], out_dir, pairs: list[LabeledPair] | None = None):
    """Write PNGs plus manifest.jsonl (and pairs.jsonl when given).

    Returns the manifest path. Pair records reference manifest line
    indices, which is the hand-off contract with the embedding bridge.
    """
    out = Path(out_dir)
    images = out / "images"
    images.mkdir(parents=True, exist_ok=True)
    index = {}
    manifest = out / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for i, s in enumerate(samples):
            rel = f"images/{s.task_id}_{s.k:06d}.png"
            (out / rel).write_bytes(s.image.png)
            index[(s.task_id, s.k)] = i
            fh.write(json.dumps({"task": s.task_id, "k": s.k, "y": s.y, "image": rel},
                                sort_keys=True) + "\n")
    if pairs is not None:
        with (out / "pairs.jsonl").open("w", encoding="utf-8") as fh:
            for p in pairs:
                fh.write(json.dumps({
                    "i1": index[(p.first.task_id, p.first.k)],
                    "i2": index[(p.second.task_id, p.second.k)],
                    "t1": p.text_order[0],
                    "t2": p.text_order[1],
                }, sort_keys=True) + "\n")
    return manifest


def load_manifest(manifest_path) -> list[Sample]:
    """Read a manifest back into samples (round-trips export_dataset)."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    samples = []
    with manifest_path.open(encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            png = (base / rec["image"]).read_bytes()
            arr = decode_png(png)
            raster = ObservationRaster(arr.shape[1], arr.shape[0], png)
            samples.append(Sample(raster, rec["y"], rec["task"], rec["k"]))
    return samples


def load_pairs(pairs_path, samples: list[Sample]) -> list[LabeledPair]:
    pairs = []
    with Path(pairs_path).open(encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            pairs.append(LabeledPair(samples[rec["i1"]], samples[rec["i2"]],
                                     (rec["t1"], rec["t2"])))
    return pairs


# --- accuracy metric ----------------------------------------------------------


def text_accuracy(pairs: list[LabeledPair], oracle) -> AccuracyReport:
    """Fraction of pairs whose similarity difference agrees with the true
    progress difference. Exact ties in y are excluded: they would score
    1 for any oracle. A degenerate feature difference (images identical
    to the oracle) is a zero signal, which the >= comparison scores as
    agreement.
    """
    bits = []
    rows = []
    excluded = 0
    for p in pairs:
        y1, y2 = p.first.y, p.second.y
        if abs(y1 - y2) < Y_TIE_EPS:
            excluded += 1
            continue
        o1 = oracle.prepare(Observation(y=y1, raster=p.first.image.png))
        o2 = oracle.prepare(Observation(y=y2, raster=p.second.image.png))
        try:
            sig = oracle.signal(o1, o2)
        except ZeroNormError:
            sig = SimilaritySignal(0.0, 0.0)
        bit = 1 if sig.diff * (y1 - y2) >= 0 else 0
        bits.append(bit)
        rows.append((y1, y2, sig.r1, sig.r2))
    n = len(bits)
    a = sum(bits) / n if n else 0.0
    return AccuracyReport(a=a, n_trials=n, bits=bits, rows=rows, n_excluded=excluded)


# --- collection drivers -------------------------------------------------------


def sweep_frames(task: TaskSpec, rng: SeededRng, frame_budget: int = 0,
                 render_size: int = 224, steps_per_pass: int = 60):
    """Back-and-forth scripted sweep of the task's motion, yielding
    (raster, y) frames forever (bounded by `frame_budget` when nonzero).

    Articulated tasks sweep the joint through its range; rearrangement
    tasks slide the object along a straight line through the target.
    """
    scene = sample_initial(task, rng.derive(0))
    count = 0
    pass_idx = 0
    lo, hi = _sweep_range(task)
    while True:
        jitter = 0.02 * float(rng.uniform(-1.0, 1.0))
        for i in range(steps_per_pass):
            frac = i / (steps_per_pass - 1)
            if pass_idx % 2 == 1:
                frac = 1.0 - frac
            scene = _sweep_scene(task, scene, lo, hi, frac, jitter)
            yield render_observation(scene, task, render_size), progress(scene)
            count += 1
            if frame_budget and count >= frame_budget:
                return
        pass_idx += 1


def _sweep_range(task: TaskSpec):
    if task.kind == ARTICULATED:
        return task.joint.q_min, task.joint.q_max
    return 0.0, 1.0


def _sweep_scene(task: TaskSpec, scene: SceneState, lo, hi, frac, jitter) -> SceneState:
    if task.kind == ARTICULATED:
        q = task.joint.clamp_q(lo + (hi - lo) * frac + jitter)
        return replace(scene, object=task.joint.handle(q), articulation_q=q,
                       time=scene.time + task.dt)
    start = scene.object_initial
    tgt = task.target
    pos = task.workspace.clamp(Vec3(start.x + (tgt.x - start.x) * frac + jitter,
                                    start.y + (tgt.y - start.y) * frac + jitter, 0.0))
    return replace(scene, robot=Pose2(pos, scene.robot.heading), object=pos,
                   time=scene.time + task.dt)
