"""Synthetic clips with analytic ground truth.

Used for tests and demos when CDnet-2014 is not available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SyntheticClip", "moving_square", "oscillating_texture", "bounce"]


@dataclass
class SyntheticClip:
    name: str
    frames: list[np.ndarray]  # float64 in [0, 1]
    gts: list[np.ndarray]  # uint8, 0 background / 255 foreground

    def __len__(self) -> int:
        return len(self.frames)


def bounce(start: float, velocity: float, t: int, lo: float, hi: float) -> int:
    """Position of a point moving at ``velocity`` and reflecting inside [lo, hi]."""
    span = hi - lo
    if span <= 0:
        return int(lo)
    p = (start - lo + velocity * t) % (2 * span)
    return int(round(lo + (p if p <= span else 2 * span - p)))


def _texture(rng, height, width, low=0.1, high=0.6, cell=1):
    tex = rng.uniform(low, high, size=(-(-height // cell), -(-width // cell)))
    return np.kron(tex, np.ones((cell, cell)))[:height, :width]


def moving_square(
    n_frames: int = 40,
    height: int = 60,
    width: int = 80,
    size: int = 20,
    velocity: tuple[float, float] = (2.0, 1.0),
    seed: int = 0,
    noise: float = 0.0,
    value: float = 1.0,
    enter: int = 5,
) -> SyntheticClip:
    """White ``size``x``size`` square translating over static random texture.

    The first ``enter`` frames show only the background, matching the
    object-free start that background models are bootstrapped on.
    """
    rng = np.random.default_rng(seed)
    background = _texture(rng, height, width)
    vx, vy = velocity
    x0 = rng.uniform(0, width - size)
    y0 = rng.uniform(0, height - size)
    frames, gts = [], []
    for t in range(n_frames):
        x = bounce(x0, vx, t, 0, width - size)
        y = bounce(y0, vy, t, 0, height - size)
        frame = background.copy()
        gt = np.zeros((height, width), dtype=np.uint8)
        if t >= enter:
            frame[y : y + size, x : x + size] = value
            gt[y : y + size, x : x + size] = 255
        if noise:
            frame = np.clip(frame + rng.normal(0.0, noise, frame.shape), 0.0, 1.0)
        frames.append(frame)
        gts.append(gt)
    return SyntheticClip("synthetic_square", frames, gts)


def oscillating_texture(
    n_frames: int = 40,
    height: int = 60,
    width: int = 80,
    size: int = 16,
    period: int = 4,
    amplitude: float = 0.05,
    seed: int = 0,
    enter: int = 5,
) -> SyntheticClip:
    """Moving square over a background whose lower half flickers periodically.

    The flicker is a uniform brightness change, so it is background in the
    ground truth; a descriptor that is not illumination-robust will flag it.
    """
    rng = np.random.default_rng(seed)
    background = _texture(rng, height, width)
    lower = np.zeros((height, width), dtype=bool)
    lower[height // 2 :, :] = True
    frames, gts = [], []
    x0 = rng.uniform(0, width - size)
    for t in range(n_frames):
        frame = background.copy()
        frame[lower] += amplitude * np.sin(2 * np.pi * t / period)
        x = bounce(x0, 2.0, t, 0, width - size)
        y = height // 4 - size // 2
        gt = np.zeros((height, width), dtype=np.uint8)
        if t >= enter:
            frame[y : y + size, x : x + size] = 1.0
            gt[y : y + size, x : x + size] = 255
        frames.append(np.clip(frame, 0.0, 1.0))
        gts.append(gt)
    return SyntheticClip("synthetic_flicker", frames, gts)
