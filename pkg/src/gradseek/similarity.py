"""Feature-space similarity math and the pluggable similarity oracles.

The controller only ever sees a :class:`SimilaritySignal` — the cosine
similarities of a feature-space motion against an instruction text and
its opposite. Where those features come from is an oracle concern:
synthetic oracles fabricate them from ground-truth progress (so the
whole loop runs with no ML stack), and the remote oracle fetches real
embeddings from a bridge service over newline-delimited JSON.
"""

from __future__ import annotations

import base64
import json
import os
import socket
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import SeededRng, distance

NORM_EPS = 1e-12

#: Default address for the remote oracle when none is configured.
BRIDGE_ADDR_ENV = "GRADSEEK_BRIDGE_ADDR"


class SimilarityError(Exception):
    pass


class ZeroNormError(SimilarityError):
    """A vector (or feature difference) is too close to zero for a cosine."""


class DimMismatchError(SimilarityError):
    pass


class WrongOracleKindError(SimilarityError):
    pass


class BridgeError(Exception):
    """Base for remote-oracle failures; trials abort as Errored, not Failed."""


class TransportError(BridgeError):
    pass


class ProtocolError(BridgeError):
    pass


class ServiceError(BridgeError):
    pass


@dataclass(frozen=True)
class TextPair:
    """Instruction text plus the text describing the opposite action."""

    instruction: str
    opposite: str

    def __post_init__(self):
        if not self.instruction or not self.opposite:
            raise ValueError("both texts must be non-empty")
        if self.instruction == self.opposite:
            raise ValueError("instruction and opposite must differ")


@dataclass(frozen=True)
class SimilaritySignal:
    """The (R1, R2) similarity pair; `diff` is what the controller consumes."""

    r1: float
    r2: float

    def __post_init__(self):
        for r in (self.r1, self.r2):
            if not (-1.0 <= r <= 1.0):
                raise ValueError(f"similarity {r!r} outside [-1, 1]")

    @property
    def diff(self) -> float:
        return self.r1 - self.r2


def cosine(a, b) -> float:
    """Cosine similarity of two feature vectors, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatchError(f"dims differ: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < NORM_EPS or nb < NORM_EPS:
        raise ZeroNormError("cosine undefined for (near-)zero vector")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def direction_similarity(h_now, h_prev, texts) -> SimilaritySignal:
    """Similarity of the feature-space motion h_now - h_prev against both texts.

    Raises ZeroNormError when the difference is degenerate ("no observable
    change"); callers decide the fallback, typically a zero gradient.
    """
    h_now = np.asarray(h_now, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if h_now.shape != h_prev.shape:
        raise DimMismatchError(f"dims differ: {h_now.shape} vs {h_prev.shape}")
    d = h_now - h_prev
    if float(np.linalg.norm(d)) < NORM_EPS:
        raise ZeroNormError("feature difference is degenerate")
    g1, g2 = texts
    return SimilaritySignal(cosine(d, g1), cosine(d, g2))


# --- oracle specification ---------------------------------------------------

SIGNFLIP = "synthetic-signflip"
NOISE = "synthetic-noise"
REMOTE = "remote"


@dataclass(frozen=True)
class OracleSpec:
    """Which similarity source a trial uses, with that source's parameters."""

    kind: str
    p: float | None = None
    noise_scale: float | None = None
    endpoint: str | None = None

    def __post_init__(self):
        if self.kind == SIGNFLIP:
            if self.p is None or not (0.5 <= self.p <= 1.0):
                raise ValueError("signflip oracle needs p in [0.5, 1]")
            if self.noise_scale is not None or self.endpoint is not None:
                raise ValueError("signflip oracle takes only p")
        elif self.kind == NOISE:
            if self.noise_scale is None or self.noise_scale < 0.0:
                raise ValueError("noise oracle needs noise_scale >= 0")
            if self.p is not None or self.endpoint is not None:
                raise ValueError("noise oracle takes only noise_scale")
        elif self.kind == REMOTE:
            if not self.endpoint:
                raise ValueError("remote oracle needs an endpoint address")
            if self.p is not None or self.noise_scale is not None:
                raise ValueError("remote oracle takes only endpoint")
        else:
            raise ValueError(f"unknown oracle kind {self.kind!r}")

    @classmethod
    def signflip(cls, p: float) -> "OracleSpec":
        return cls(kind=SIGNFLIP, p=p)

    @classmethod
    def noise(cls, noise_scale: float) -> "OracleSpec":
        return cls(kind=NOISE, noise_scale=noise_scale)

    @classmethod
    def remote(cls, endpoint: str | None = None) -> "OracleSpec":
        endpoint = endpoint or os.environ.get(BRIDGE_ADDR_ENV)
        return cls(kind=REMOTE, endpoint=endpoint)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.p is not None:
            out["p"] = self.p
        if self.noise_scale is not None:
            out["noise_scale"] = self.noise_scale
        if self.endpoint is not None:
            out["endpoint"] = self.endpoint
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "OracleSpec":
        return cls(
            kind=d["kind"],
            p=d.get("p"),
            noise_scale=d.get("noise_scale"),
            endpoint=d.get("endpoint"),
        )


# --- synthetic feature construction ------------------------------------------

_DEFAULT_DIM = 8


@lru_cache(maxsize=64)
def task_text_axes(task_id: str, dim: int = _DEFAULT_DIM):
    """Fixed orthonormal (text axis, noise axis) pair for a task.

    Derived deterministically from the task id, so every run agrees on
    the synthetic feature geometry.
    """
    import hashlib

    if dim < 2:
        raise ValueError("feature dim must be >= 2")
    digest = hashlib.blake2b(task_id.encode("utf-8"), digest_size=8).digest()
    rng = SeededRng(int.from_bytes(digest, "big"), stream=0)
    u = rng.normal(size=dim)
    u /= np.linalg.norm(u)
    w = rng.normal(size=dim)
    w -= (w @ u) * u
    w /= np.linalg.norm(w)
    return u, w


def synthetic_text_features(task_id: str, dim: int = _DEFAULT_DIM):
    """Antipodal text features (+u, -u) on the task's text axis."""
    u, _ = task_text_axes(task_id, dim)
    return u, -u


def embed_progress(y: float, task_id: str, spec: OracleSpec, rng: SeededRng,
                   dim: int = _DEFAULT_DIM) -> np.ndarray:
    """Synthetic image feature: progress on the text axis plus encoder noise.

    Noise lands on both the text axis and the orthogonal axis (purely
    orthogonal noise could never flip the sign of r1 - r2 against
    antipodal texts, and then no noise scale could emulate an imperfect
    encoder). With noise_scale 0 the sign agreement is exact.
    """
    if spec.kind != NOISE:
        raise WrongOracleKindError(f"expected {NOISE}, got {spec.kind}")
    u, w = task_text_axes(task_id, dim)
    if spec.noise_scale > 0:
        eta_u, eta_w = rng.normal(0.0, spec.noise_scale, size=2)
    else:
        eta_u = eta_w = 0.0
    return (y + eta_u) * u + eta_w * w


def synthetic_embed(scene, task, spec: OracleSpec, rng: SeededRng,
                    dim: int = _DEFAULT_DIM) -> np.ndarray:
    """Embed a scene as if by an image encoder whose signal axis is the task text."""
    y = -distance(scene.target, scene.object)
    return embed_progress(y, task.id, spec, rng, dim)


def signflip_similarity(delta_y: float, p: float, rng: SeededRng) -> SimilaritySignal:
    """Similarity pair whose difference matches sign(delta_y) with probability p.

    Emulates a text-accuracy rate directly: r1 - r2 is +0.5*sign(delta_y)
    with probability p and -0.5*sign(delta_y) otherwise; zero progress
    change yields a zero signal.
    """
    if not (0.5 <= p <= 1.0):
        raise ValueError("p must be in [0.5, 1]")
    if delta_y == 0.0:
        return SimilaritySignal(0.0, 0.0)
    s = 1.0 if delta_y > 0 else -1.0
    if float(rng.uniform()) >= p:
        s = -s
    return SimilaritySignal(0.25 * s, -0.25 * s)


# --- oracle objects -----------------------------------------------------------


@dataclass
class Observation:
    """One control step's view of the world, as the oracle may consume it.

    `y` is the ground-truth progress (always available in simulation),
    `raster` the encoded camera image (remote oracle), and `feature`
    the cached embedding attached by the oracle's `prepare`.
    """

    y: float
    scene: object | None = None
    raster: bytes | None = None
    feature: np.ndarray | None = None


class SignflipOracle:
    def __init__(self, p: float, rng: SeededRng):
        self.p = p
        self.rng = rng

    def prepare(self, obs: Observation) -> Observation:
        return obs

    def signal(self, now: Observation, prev: Observation) -> SimilaritySignal:
        return signflip_similarity(now.y - prev.y, self.p, self.rng)


class NoiseOracle:
    def __init__(self, task_id: str, noise_scale: float, rng: SeededRng,
                 dim: int = _DEFAULT_DIM):
        self.spec = OracleSpec.noise(noise_scale)
        self.task_id = task_id
        self.rng = rng
        self.dim = dim
        self._texts = synthetic_text_features(task_id, dim)

    def prepare(self, obs: Observation) -> Observation:
        obs.feature = embed_progress(obs.y, self.task_id, self.spec, self.rng, self.dim)
        return obs

    def signal(self, now: Observation, prev: Observation) -> SimilaritySignal:
        return direction_similarity(now.feature, prev.feature, self._texts)


class RemoteOracle:
    """Similarity via a bridge service; text features fetched once per trial."""

    def __init__(self, client: "BridgeClient", texts: TextPair):
        self.client = client
        self.texts = texts

    def prepare(self, obs: Observation) -> Observation:
        if obs.raster is None:
            raise ProtocolError("remote oracle needs a rendered observation")
        obs.feature = self.client.embed_image(obs.raster)
        return obs

    def signal(self, now: Observation, prev: Observation) -> SimilaritySignal:
        g1 = self.client.embed_text(self.texts.instruction)
        g2 = self.client.embed_text(self.texts.opposite)
        return direction_similarity(now.feature, prev.feature, (g1, g2))


def make_oracle(spec: OracleSpec, task_id: str, texts: TextPair, rng: SeededRng):
    if spec.kind == SIGNFLIP:
        return SignflipOracle(spec.p, rng)
    if spec.kind == NOISE:
        return NoiseOracle(task_id, spec.noise_scale, rng)
    if spec.kind == REMOTE:
        return RemoteOracle(BridgeClient(spec.endpoint), texts)
    raise WrongOracleKindError(spec.kind)


def calibrate_noise_scale(task_id: str, target_accuracy: float, rng: SeededRng,
                          y_range: float = 0.2, n_pairs: int = 2000,
                          dim: int = _DEFAULT_DIM) -> float:
    """Bisect the noise scale so sign agreement over random progress pairs
    matches a target text-accuracy rate.

    Uses common random numbers across evaluations, so the agreement is a
    monotone function of the scale and bisection is well posed. The sign
    of r1 - r2 against antipodal texts equals the sign of the on-axis
    feature difference, which is what gets evaluated here.
    """
    if not (0.5 < target_accuracy <= 1.0):
        raise ValueError("target accuracy must be in (0.5, 1]")
    draw = rng.derive(0)
    ys = draw.uniform(-y_range, 0.0, size=(n_pairs, 2))
    etas = rng.derive(1).normal(0.0, 1.0, size=(n_pairs, 2))
    dy = ys[:, 0] - ys[:, 1]
    deta = etas[:, 0] - etas[:, 1]
    keep = np.abs(dy) > 1e-12

    def agreement(scale: float) -> float:
        on_axis = dy + scale * deta
        return float(np.mean((on_axis * dy > 0)[keep]))

    lo, hi = 0.0, y_range
    while agreement(hi) > target_accuracy and hi < 100.0 * y_range:
        hi *= 2.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if agreement(mid) > target_accuracy:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-9 * y_range:
            break
    return 0.5 * (lo + hi)


# --- bridge client ------------------------------------------------------------


class BridgeClient:
    """Newline-delimited JSON client for the embedding bridge.

    One request in flight per connection; text features are cached so a
    trial embeds each prompt once. Errors are split into Transport
    (socket), Protocol (malformed traffic), and Service (server said no).
    """

    def __init__(self, address: str, timeout: float = 30.0):
        if not address:
            raise TransportError(
                f"no bridge address configured (set {BRIDGE_ADDR_ENV} or pass one)")
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise TransportError(f"bad bridge address {address!r} (want host:port)")
        self.host = host
        self.port = int(port)
        self.timeout = timeout
        self._sock = None
        self._reader = None
        self._dim = None
        self._text_cache: dict[str, np.ndarray] = {}

    def _connect(self):
        if self._sock is not None:
            return
        try:
            self._sock = socket.create_connection((self.host, self.port), self.timeout)
            self._reader = self._sock.makefile("rb")
        except OSError as e:
            self._sock = None
            self._reader = None
            raise TransportError(f"cannot reach bridge at {self.host}:{self.port}: {e}") from e

    def close(self):
        if self._sock is not None:
            try:
                self._reader.close()
                self._sock.close()
            except OSError:
                pass
            self._sock = None
            self._reader = None

    def reset_text_cache(self):
        self._text_cache.clear()

    def request(self, payload: dict) -> dict:
        self._connect()
        try:
            self._sock.sendall(json.dumps(payload).encode("utf-8") + b"\n")
            line = self._reader.readline()
        except OSError as e:
            self.close()
            raise TransportError(f"bridge connection failed: {e}") from e
        if not line:
            self.close()
            raise TransportError("bridge closed the connection")
        try:
            resp = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ProtocolError(f"malformed bridge response: {e}") from e
        if not isinstance(resp, dict) or "ok" not in resp:
            raise ProtocolError(f"bridge response missing 'ok': {resp!r}")
        if not resp["ok"]:
            raise ServiceError(str(resp.get("error", "unspecified bridge error")))
        return resp

    def _vector(self, resp: dict) -> np.ndarray:
        vec = resp.get("vector")
        if not isinstance(vec, list) or not vec:
            raise ProtocolError("bridge response lacks a vector")
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ProtocolError("bridge vector is not a finite 1-d array")
        if self._dim is None:
            self._dim = arr.shape[0]
        elif arr.shape[0] != self._dim:
            raise ProtocolError(
                f"bridge dim changed mid-session: {arr.shape[0]} != {self._dim}")
        return arr

    def embed_text(self, text: str) -> np.ndarray:
        if not text:
            raise ProtocolError("refusing to embed empty text")
        if text in self._text_cache:
            return self._text_cache[text]
        vec = self._vector(self.request({"op": "embed_text", "text": text}))
        self._text_cache[text] = vec
        return vec

    def embed_image(self, png_bytes: bytes) -> np.ndarray:
        if not png_bytes:
            raise ProtocolError("refusing to embed an empty image")
        b64 = base64.b64encode(png_bytes).decode("ascii")
        return self._vector(self.request({"op": "embed_image", "png_b64": b64}))

    def info(self) -> dict:
        resp = self.request({"op": "info"})
        if "dim" not in resp or "model" not in resp:
            raise ProtocolError("info response missing dim/model")
        return resp
