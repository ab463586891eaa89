"""Shared geometric types, seeded randomness, and small numeric helpers.

Everything downstream (controller, environments, harness) builds on two
contracts fixed here: all reals are float64, and any randomness flows
through :class:`SeededRng`, a counter-based stream keyed by
``(seed, stream)`` that is bit-identical across platforms and runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

#: Axis-name -> component-index map shared by controller and environments.
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def wrap_angle(theta: float) -> float:
    """Normalize an angle to the half-open interval (-pi, pi]."""
    return math.pi - (math.pi - theta) % (2.0 * math.pi)


@dataclass(frozen=True)
class Vec3:
    """A point or displacement in meters. Components must be finite."""

    x: float
    y: float
    z: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"non-finite Vec3 component {name}={value!r}")
            object.__setattr__(self, name, value)

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def scaled(self, k: float) -> "Vec3":
        return Vec3(k * self.x, k * self.y, k * self.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def from_array(cls, arr) -> "Vec3":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(float(arr[0]), float(arr[1]), float(arr[2]) if arr.shape[0] > 2 else 0.0)


def distance(a: Vec3, b: Vec3) -> float:
    """Euclidean distance between two points."""
    return (a - b).norm()


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position (z conventionally 0) plus heading in radians.

    The heading is normalized to (-pi, pi] on construction.
    """

    position: Vec3
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(float(self.heading)))


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


class SeededRng:
    """Counter-based random stream identified by ``(seed, stream)``.

    Backed by numpy's Philox generator, so the same key yields the same
    draw sequence on every platform. Child streams for parallel trials
    or per-axis draws come from :meth:`derive`, which mixes integer ids
    into the stream key without touching this stream's state.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream = int(stream) & _MASK64
        self._gen = None

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            key = np.array([self.seed, self.stream], dtype=np.uint64)
            self._gen = np.random.Generator(np.random.Philox(key=key))
        return self._gen

    def derive(self, *ids: int) -> "SeededRng":
        """A fresh independent stream keyed by this stream plus `ids`."""
        s = self.stream
        for k, i in enumerate(ids):
            salt = (0x9E3779B97F4A7C15 * (k + 1)) & _MASK64
            s = _splitmix64(s ^ _splitmix64((int(i) + salt) & _MASK64))
        return SeededRng(self.seed, s)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def rademacher(rng: SeededRng, size: int | None = None):
    """Draw +1 or -1 with probability 0.5 each.

    Returns a Python int for `size=None`, else an int64 array.
    """
    draws = rng.generator.integers(0, 2, size=size) * 2 - 1
    if size is None:
        return int(draws)
    return draws


def axis_components(v: Vec3, axes: tuple[str, ...]) -> np.ndarray:
    """Extract the named components of `v` as a float64 array."""
    return np.array([getattr(v, a) for a in axes], dtype=np.float64)


def displacement_from_axes(u: np.ndarray, axes: tuple[str, ...]) -> Vec3:
    """Expand per-axis values back into a Vec3 (missing axes are 0)."""
    full = [0.0, 0.0, 0.0]
    for value, name in zip(u, axes):
        full[AXIS_INDEX[name]] = float(value)
    return Vec3(*full)
