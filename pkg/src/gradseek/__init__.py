"""gradseek: learning-free robot control from vision-language similarity
gradients, with deterministic desk-scale task simulators, pluggable
similarity oracles, a data-collection pipeline, and a seeded benchmark
harness."""

from .controller import (ControllerConfig, ControllerState, clip_gradient,
                         control_input, init_state, observe, rmsprop_step,
                         similarity_gradient, stuck_escape, tick)
from .core import Pose2, SeededRng, Vec3, distance, rademacher, wrap_angle
from .datagen import (LabeledPair, Sample, export_dataset, gated_collect,
                      label_pair, load_manifest, load_pairs, progress,
                      sample_pairs, sweep_frames, text_accuracy)
from .envs import (TASKS, ObservationRaster, SceneState, TaskSpec,
                   check_success, get_task, render_observation,
                   sample_initial, step_articulated, step_rearrangement,
                   step_scene, step_unicycle)
from .harness import (BenchmarkReport, MethodSpec, PlanEntry, TrialRecord,
                      default_controller, load_plan, run_benchmark, run_trial)
from .similarity import (BridgeClient, Observation, OracleSpec,
                         SimilaritySignal, TextPair, cosine,
                         direction_similarity, make_oracle,
                         signflip_similarity, synthetic_embed)

__version__ = "0.1.0"
