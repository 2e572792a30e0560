"""Synthetic oracles: rendered traffic scenes with exact coverage ground
truth, seeded distribution samplers, and exact fractional Gaussian noise.

Everything here is deterministic given its seed; these generators are what
the rest of the test suite measures itself against.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

import numpy as np

from .density import Frame
from .errors import EmbeddingFailure, InvalidH, InvalidParams, InvalidSpec
from .lrd import TimeSeries

__all__ = [
    "VehicleEvent",
    "SceneSpec",
    "render_scene_sequence",
    "coverage_truth",
    "frames_from_spec",
    "random_scene_spec",
    "diurnal_scene_spec",
    "sample_distribution",
    "inverse_cdf",
    "gen_fgn",
]


@dataclass(frozen=True)
class VehicleEvent:
    enter_frame: int
    exit_frame: int  # exclusive
    x: int
    y: int
    width: int
    height: int
    intensity: int


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    background: int | np.ndarray
    vehicle_events: tuple[VehicleEvent, ...]
    noise_stddev: float
    frame_count: int
    seed: int

    def background_map(self) -> np.ndarray:
        if np.isscalar(self.background):
            return np.full((self.height, self.width), self.background, dtype=np.float64)
        return np.asarray(self.background, dtype=np.float64)

    def validate(self) -> None:
        if self.width < 1 or self.height < 1 or self.frame_count < 1:
            raise InvalidSpec("non-positive dimensions")
        if self.noise_stddev < 0:
            raise InvalidSpec("negative noise stddev")
        bg = self.background_map()
        for ev in self.vehicle_events:
            if not (0 <= ev.enter_frame < ev.exit_frame <= self.frame_count):
                raise InvalidSpec(f"bad event window {ev.enter_frame}..{ev.exit_frame}")
            if ev.x < 0 or ev.y < 0 or ev.x + ev.width > self.width or ev.y + ev.height > self.height:
                raise InvalidSpec("rectangle out of bounds")
            if ev.width < 1 or ev.height < 1:
                raise InvalidSpec("degenerate rectangle")
            patch = bg[ev.y : ev.y + ev.height, ev.x : ev.x + ev.width]
            if np.abs(ev.intensity - patch).min() <= 2 * self.noise_stddev:
                raise InvalidSpec("vehicle intensity too close to background")

    @staticmethod
    def from_json(text: str) -> "SceneSpec":
        obj = json.loads(text)
        events = tuple(VehicleEvent(**ev) for ev in obj.pop("vehicle_events"))
        return SceneSpec(vehicle_events=events, **obj)

    def to_json(self) -> str:
        obj = {
            "width": self.width,
            "height": self.height,
            "background": self.background
            if np.isscalar(self.background)
            else np.asarray(self.background).tolist(),
            "vehicle_events": [vars(ev) for ev in self.vehicle_events],
            "noise_stddev": self.noise_stddev,
            "frame_count": self.frame_count,
            "seed": self.seed,
        }
        return json.dumps(obj, sort_keys=True)


def render_scene_sequence(spec: SceneSpec) -> list[np.ndarray]:
    """Render every frame: background + active rectangles + clamped noise."""
    spec.validate()
    bg = spec.background_map()
    rng = np.random.default_rng(spec.seed)
    frames = []
    for t in range(spec.frame_count):
        img = bg.copy()
        for ev in spec.vehicle_events:
            if ev.enter_frame <= t < ev.exit_frame:
                img[ev.y : ev.y + ev.height, ev.x : ev.x + ev.width] = ev.intensity
        if spec.noise_stddev > 0:
            img += rng.normal(0.0, spec.noise_stddev, img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    return frames


def coverage_truth(spec: SceneSpec, t: int) -> float:
    """Exact union area fraction of rectangles active at frame t."""
    if not 0 <= t < spec.frame_count:
        raise IndexError(f"frame index {t} outside 0..{spec.frame_count - 1}")
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    for ev in spec.vehicle_events:
        if ev.enter_frame <= t < ev.exit_frame:
            mask[ev.y : ev.y + ev.height, ev.x : ev.x + ev.width] = True
    return int(mask.sum()) / (spec.width * spec.height)


def frames_from_spec(
    spec: SceneSpec,
    camera_id: str,
    t0: datetime | None = None,
    step_seconds: float = 60.0,
) -> list[Frame]:
    """Render a spec into timestamped Frames on a regular capture grid."""
    if t0 is None:
        t0 = datetime(2024, 1, 1, tzinfo=timezone.utc)
    arrays = render_scene_sequence(spec)
    return [
        Frame(camera_id, t0 + timedelta(seconds=i * step_seconds), arr)
        for i, arr in enumerate(arrays)
    ]


def random_scene_spec(
    seed: int,
    width: int = 100,
    height: int = 100,
    frame_count: int = 300,
    max_concurrent: int = 8,
    noise_stddev: float = 4.0,
    background: int = 60,
    vehicle_intensity: int = 200,
    dwell: tuple[int, int] = (4, 12),
) -> SceneSpec:
    """Random scene with 1..max_concurrent vehicles present at any frame.

    Vehicles are short-lived rectangles at random positions, so every pixel
    sees the background most of the time.
    """
    rng = np.random.default_rng(seed)
    events = []
    active: list[int] = []  # exit frames of currently-active vehicles
    target = int(rng.integers(1, max_concurrent + 1))
    for t in range(frame_count):
        active = [e for e in active if e > t]
        if rng.random() < 0.1:
            target = int(rng.integers(1, max_concurrent + 1))
        while len(active) < target:
            w = int(rng.integers(6, 16))
            h = int(rng.integers(4, 10))
            x = int(rng.integers(0, width - w))
            y = int(rng.integers(0, height - h))
            exit_frame = min(frame_count, t + int(rng.integers(*dwell)))
            if exit_frame <= t:
                continue
            events.append(
                VehicleEvent(t, exit_frame, x, y, w, h, vehicle_intensity)
            )
            active.append(exit_frame)
    return SceneSpec(
        width=width,
        height=height,
        background=background,
        vehicle_events=tuple(events),
        noise_stddev=noise_stddev,
        frame_count=frame_count,
        seed=seed,
    )


DIURNAL_PROFILE = {
    0: 1, 1: 1, 2: 1, 3: 1, 4: 1, 5: 2, 6: 3, 7: 5, 8: 7, 9: 5,
    10: 3, 11: 1, 12: 1, 13: 1, 14: 3, 15: 4, 16: 5, 17: 7, 18: 5,
    19: 3, 20: 2, 21: 2, 22: 1, 23: 1,
}


def diurnal_scene_spec(
    seed: int,
    frames_per_hour: int = 60,
    width: int = 100,
    height: int = 100,
) -> SceneSpec:
    """One synthetic day whose vehicle concurrency peaks at 8-9 and 17-18
    local and bottoms out over 11-13 (frame i falls in hour i // frames_per_hour)."""
    rng = np.random.default_rng(seed)
    frame_count = 24 * frames_per_hour
    events = []
    for hour, level in DIURNAL_PROFILE.items():
        start = hour * frames_per_hour
        for t in range(start, start + frames_per_hour, 5):
            for _ in range(level):
                w = int(rng.integers(6, 16))
                h = int(rng.integers(4, 10))
                x = int(rng.integers(0, width - w))
                y = int(rng.integers(0, height - h))
                events.append(
                    VehicleEvent(t, min(frame_count, t + 5), x, y, w, h, 200)
                )
    return SceneSpec(
        width=width,
        height=height,
        background=60,
        vehicle_events=tuple(events),
        noise_stddev=4.0,
        frame_count=frame_count,
        seed=seed,
    )


# --- seeded distribution sampling ---


def _check_positive(params: dict, names) -> None:
    for name in names:
        if params[name] <= 0 or not math.isfinite(params[name]):
            raise InvalidParams(f"{name} must be positive and finite")


def inverse_cdf(family: str, params: dict, u: np.ndarray) -> np.ndarray:
    """Closed-form quantile functions (exponential, weibull, loglogistic)."""
    u = np.asarray(u, dtype=np.float64)
    if family == "exponential":
        _check_positive(params, ["rate"])
        return -np.log1p(-u) / params["rate"]
    if family == "weibull":
        _check_positive(params, ["shape", "scale"])
        return params["scale"] * (-np.log1p(-u)) ** (1.0 / params["shape"])
    if family == "loglogistic":
        _check_positive(params, ["scale", "shape"])
        return params["scale"] * (u / (1.0 - u)) ** (1.0 / params["shape"])
    raise InvalidParams(f"no closed-form inverse CDF for {family}")


def _box_muller(rng: np.random.Generator, n: int) -> np.ndarray:
    pairs = (n + 1) // 2
    u1 = rng.random(pairs)
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:n]


def _marsaglia_tsang(rng: np.random.Generator, shape: float, n: int) -> np.ndarray:
    """Gamma(shape, 1) draws; shape < 1 handled by the power boost."""
    boost = None
    k = shape
    if shape < 1.0:
        boost = rng.random(n) ** (1.0 / shape)
        k = shape + 1.0
    d = k - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        x = _box_muller(rng, need)
        v = (1.0 + c * x) ** 3
        u = rng.random(need)
        ok = (v > 0) & (
            np.log(np.maximum(u, 1e-300))
            < 0.5 * x * x + d - d * v + d * np.log(np.where(v > 0, v, 1.0))
        )
        accepted = (d * v)[ok]
        out[filled : filled + accepted.size] = accepted
        filled += accepted.size
    if boost is not None:
        out *= boost
    return out


def sample_distribution(family: str, params: dict, n: int, seed: int) -> np.ndarray:
    """Seeded deterministic sampling for the five supported families."""
    if n < 1:
        raise InvalidParams("n must be >= 1")
    rng = np.random.default_rng(seed)
    if family in ("exponential", "weibull", "loglogistic"):
        return inverse_cdf(family, params, rng.random(n))
    if family == "normal":
        if params["sigma"] <= 0:
            raise InvalidParams("sigma must be positive")
        return params["mu"] + params["sigma"] * _box_muller(rng, n)
    if family == "gamma":
        _check_positive(params, ["shape", "scale"])
        return params["scale"] * _marsaglia_tsang(rng, params["shape"], n)
    raise InvalidParams(f"unknown family {family!r}")


# --- fractional Gaussian noise via circulant embedding ---


def fgn_autocov(H: float, k: np.ndarray) -> np.ndarray:
    k = np.abs(np.asarray(k, dtype=np.float64))
    return 0.5 * (
        (k + 1) ** (2 * H) - 2 * k ** (2 * H) + np.abs(k - 1) ** (2 * H)
    )


def gen_fgn(H: float, n: int, seed: int, subject: str | None = None) -> TimeSeries:
    """Exact unit-variance fractional Gaussian noise of length n.

    Circulant embedding: the covariance sequence is wrapped onto a circulant
    matrix whose eigenvalues come from one FFT; negative eigenvalues trigger
    a retry at the next power-of-two embedding size.
    """
    if not 0 < H < 1:
        raise InvalidH(f"H must be in (0,1), got {H}")
    if n < 2:
        raise InvalidH("n must be >= 2")
    rng = np.random.default_rng(seed)
    m = 1 << max(1, int(math.ceil(math.log2(2 * (n - 1)))))
    for _ in range(4):
        gamma = fgn_autocov(H, np.arange(m // 2 + 1))
        row = np.concatenate([gamma, gamma[-2:0:-1]])
        lam = np.fft.fft(row).real
        if lam.min() > -1e-8:
            lam = np.maximum(lam, 0.0)
            break
        m *= 2
    else:
        raise EmbeddingFailure(f"no nonnegative embedding up to size {m}")

    half = m // 2
    v = np.zeros(m, dtype=complex)
    z0, zh = rng.standard_normal(2)
    z_re = rng.standard_normal(half - 1)
    z_im = rng.standard_normal(half - 1)
    v[0] = math.sqrt(lam[0] / m) * z0
    v[half] = math.sqrt(lam[half] / m) * zh
    amp = np.sqrt(lam[1:half] / (2 * m))
    v[1:half] = amp * (z_re + 1j * z_im)
    v[half + 1 :] = np.conj(v[1:half][::-1])
    values = np.fft.fft(v).real[:n]
    return TimeSeries(
        subject=subject or f"fgn-H{H:g}",
        t0=datetime(2024, 1, 1, tzinfo=timezone.utc),
        step=1.0,
        values=values,
    )
