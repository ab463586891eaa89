"""Randomized probe/step controller driven by similarity gradients.

Odd control steps apply a stochastic probe (+-c per axis); even steps
apply a deterministic move scaled by RMSprop from the similarity
gradient, optionally augmented by an approach term toward the object
and clipped per axis. The gradient denominator is always the preceding
probe displacement: probing guarantees it is nonzero on active axes.

Gradient pipeline on even steps (order matters, and the moving average
stays bounded because clipping happens first):

    similarity gradient -> approach/goal augmentation -> clip -> RMSprop
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AXIS_INDEX, SeededRng, Vec3, rademacher

#: Degenerate-denominator cutoff: axes that moved less than this carry
#: no gradient information and contribute zero.
DX_EPS = 1e-9

#: Vertical offset applied to the steering target when the robot is
#: wedged (moving end effector, motionless handle).
ESCAPE_OFFSET = np.array([0.0, 0.0, 0.05])


@dataclass(frozen=True)
class ControllerConfig:
    axes: tuple[str, ...] = ("x", "y", "z")
    c: float = 0.2
    alpha: float = 1.0
    beta: float = 0.5
    epsilon: float = 1e-8
    lam: tuple[float, ...] = (1.0, 1.0, 0.1)
    approach_term: bool = True
    goal_term: bool = False
    stuck_escape: bool = True
    delta_e: float = 0.02
    delta_o: float = 0.05
    stuck_window: float = 1.0
    c_per_axis: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.axes or any(a not in ("x", "y", "z") for a in self.axes):
            raise ValueError(f"axes must be a nonempty subset of x/y/z, got {self.axes}")
        if self.c <= 0 or self.alpha <= 0 or self.epsilon <= 0:
            raise ValueError("c, alpha, epsilon must be positive")
        if not (0.0 <= self.beta < 1.0):
            raise ValueError("beta must be in [0, 1)")
        if len(self.lam) != len(self.axes) or any(l <= 0 for l in self.lam):
            raise ValueError("lam needs one positive entry per active axis")
        if self.c_per_axis is not None and len(self.c_per_axis) != len(self.axes):
            raise ValueError("c_per_axis needs one entry per active axis")
        if self.delta_e <= 0 or self.delta_o <= 0 or self.stuck_window <= 0:
            raise ValueError("stuck-escape thresholds must be positive")

    @property
    def axis_indices(self) -> tuple[int, ...]:
        return tuple(AXIS_INDEX[a] for a in self.axes)

    def probe_magnitudes(self) -> np.ndarray:
        if self.c_per_axis is not None:
            return np.asarray(self.c_per_axis, dtype=np.float64)
        return np.full(len(self.axes), self.c, dtype=np.float64)

    def to_dict(self) -> dict:
        return {
            "axes": list(self.axes),
            "c": self.c,
            "alpha": self.alpha,
            "beta": self.beta,
            "epsilon": self.epsilon,
            "lam": list(self.lam),
            "approach_term": self.approach_term,
            "goal_term": self.goal_term,
            "stuck_escape": self.stuck_escape,
            "delta_e": self.delta_e,
            "delta_o": self.delta_o,
            "stuck_window": self.stuck_window,
            "c_per_axis": list(self.c_per_axis) if self.c_per_axis else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerConfig":
        d = dict(d)
        for key in ("axes", "lam", "c_per_axis"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class ControllerState:
    """Per-trial mutable controller memory (single owner, never shared)."""

    t: int
    prev_pos: np.ndarray
    cur_pos: np.ndarray
    prev_obj: np.ndarray
    cur_obj: np.ndarray
    obj_initial: np.ndarray
    v: np.ndarray
    last_dV: np.ndarray
    target: np.ndarray | None = None
    pos_trace: list = field(default_factory=list)
    time: float = 0.0


def init_state(robot_pos: Vec3, obj_pos: Vec3, cfg: ControllerConfig,
               target: Vec3 | None = None, time: float = 0.0) -> ControllerState:
    r = robot_pos.to_array()
    o = obj_pos.to_array()
    n = len(cfg.axes)
    return ControllerState(
        t=0,
        prev_pos=r.copy(),
        cur_pos=r.copy(),
        prev_obj=o.copy(),
        cur_obj=o.copy(),
        obj_initial=o.copy(),
        v=np.zeros(n),
        last_dV=np.zeros(n),
        target=None if target is None else target.to_array(),
        pos_trace=[(time, r.copy())],
        time=time,
    )


def tick(state: ControllerState) -> int:
    """Advance to the next control step; returns the new step index."""
    state.t += 1
    return state.t


def observe(state: ControllerState, robot_pos: Vec3, obj_pos: Vec3, time: float):
    """Record the post-transition world state for the step just taken."""
    state.prev_pos = state.cur_pos
    state.cur_pos = robot_pos.to_array()
    state.prev_obj = state.cur_obj
    state.cur_obj = obj_pos.to_array()
    state.time = time
    state.pos_trace.append((time, state.cur_pos.copy()))
    # Keep only what the stuck window can ever need.
    horizon = time - 4.0  # generous multiple of the 1.0 s default window
    while len(state.pos_trace) > 2 and state.pos_trace[1][0] <= horizon:
        state.pos_trace.pop(0)


def similarity_gradient(sig, dx: np.ndarray) -> np.ndarray:
    """Per-axis gradient (r1 - r2) / dx_i; immobile axes contribute zero."""
    dx = np.asarray(dx, dtype=np.float64)
    dv = np.zeros_like(dx)
    ok = np.abs(dx) >= DX_EPS
    if sig is not None:
        np.divide(sig.diff, dx, out=dv, where=ok)
    return dv


def _squared_diff_gradient(a_now, a_prev, b_now, b_prev) -> np.ndarray:
    """Per-axis -((a_now-b_now)^2 - (a_prev-b_prev)^2) / (b_now - b_prev).

    The finite-difference gradient of -(a - b)^2 with respect to b over
    the step b_prev -> b_now; degenerate denominators contribute zero.
    """
    denom = b_now - b_prev
    num = (a_now - b_now) ** 2 - (a_prev - b_prev) ** 2
    out = np.zeros_like(denom)
    ok = np.abs(denom) >= DX_EPS
    np.divide(-num, denom, out=out, where=ok)
    return out


def augment_approach(dV: np.ndarray, state: ControllerState, cfg: ControllerConfig,
                     obj_now: np.ndarray | None = None,
                     obj_prev: np.ndarray | None = None) -> np.ndarray:
    """Add the end-effector-toward-object term to the gradient.

    `obj_now`/`obj_prev` override the recorded object positions so the
    stuck-escape retarget can steer the end effector without touching
    success bookkeeping.
    """
    idx = list(cfg.axis_indices)
    o_now = (state.cur_obj if obj_now is None else obj_now)[idx]
    o_prev = (state.prev_obj if obj_prev is None else obj_prev)[idx]
    r_now = state.cur_pos[idx]
    r_prev = state.prev_pos[idx]
    return dV + _squared_diff_gradient(o_now, o_prev, r_now, r_prev)


def goal_gradient(state: ControllerState, cfg: ControllerConfig) -> np.ndarray:
    """Known-goal replacement for the similarity gradient: push the object
    toward its target along each axis, from the object's own displacement."""
    if state.target is None:
        raise ValueError("goal gradient needs a target in the controller state")
    idx = list(cfg.axis_indices)
    tgt = state.target[idx]
    return _squared_diff_gradient(tgt, tgt, state.cur_obj[idx], state.prev_obj[idx])


def clip_gradient(dV: np.ndarray, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=np.float64)
    return np.clip(dV, -lam, lam)


def rmsprop_step(dV, v_prev, cfg: ControllerConfig):
    """RMSprop-scaled move and updated second-moment accumulator.

    Works elementwise, so scalars and per-axis arrays both pass through.
    """
    dV = np.asarray(dV, dtype=np.float64)
    v = cfg.beta * np.asarray(v_prev, dtype=np.float64) + (1.0 - cfg.beta) * dV ** 2
    f = cfg.alpha * dV / (np.sqrt(v) + cfg.epsilon)
    return f, v


def travel_distance(state: ControllerState, window: float) -> float:
    """Path length of the robot over the trailing `window` seconds."""
    t_lo = state.time - window
    total = 0.0
    prev = None
    for ts, pos in state.pos_trace:
        if ts < t_lo - 1e-12:
            prev = (ts, pos)
            continue
        if prev is not None:
            total += float(np.linalg.norm(pos - prev[1]))
        prev = (ts, pos)
    return total


def trace_span(state: ControllerState) -> float:
    if not state.pos_trace:
        return 0.0
    return state.time - state.pos_trace[0][0]


def stuck_escape(state: ControllerState, cfg: ControllerConfig) -> np.ndarray:
    """Effective steering target for the object position.

    Returns the handle position raised by 0.05 m in z when the robot has
    barely moved over the stuck window while the handle has barely moved
    since the start; otherwise the handle position unchanged. Only the
    approach term consumes this; success checks never see it.
    """
    if trace_span(state) + 1e-12 < cfg.stuck_window:
        return state.cur_obj
    d_e = travel_distance(state, cfg.stuck_window)
    displaced = float(np.linalg.norm(state.cur_obj - state.obj_initial))
    if d_e < cfg.delta_e and displaced < cfg.delta_o:
        return state.cur_obj + ESCAPE_OFFSET
    return state.cur_obj


def control_input(state: ControllerState, sig, cfg: ControllerConfig,
                  rng: SeededRng) -> np.ndarray:
    """Per-axis control input for step `state.t` (probe if odd, ascent if even).

    Updates the RMSprop accumulator only on even steps.
    """
    if state.t < 1:
        raise ValueError("control_input needs state.t >= 1 (call tick first)")
    if state.t % 2 == 1:
        delta = rademacher(rng, size=len(cfg.axes))
        return cfg.probe_magnitudes() * delta

    idx = list(cfg.axis_indices)
    if cfg.goal_term:
        dv = goal_gradient(state, cfg)
    else:
        dx = state.cur_pos[idx] - state.prev_pos[idx]
        dv = similarity_gradient(sig, dx)
    if cfg.approach_term:
        if cfg.stuck_escape:
            offset = stuck_escape(state, cfg) - state.cur_obj
        else:
            offset = 0.0
        dv = augment_approach(dv, state, cfg,
                              obj_now=state.cur_obj + offset,
                              obj_prev=state.prev_obj + offset)
    dv = clip_gradient(dv, cfg.lam)
    f, state.v = rmsprop_step(dv, state.v, cfg)
    state.last_dV = dv
    return f
