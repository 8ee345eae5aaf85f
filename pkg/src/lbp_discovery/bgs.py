"""Texture background subtraction driven by a pluggable LBP equation.

Every modelled pixel keeps ``K`` weighted LBP histograms.  A new frame's
window histogram is compared with them by histogram intersection; the best
match is blended towards the observation and gains weight, otherwise the
weakest slot is replaced.  Slots are kept sorted by weight, and the shortest
prefix whose weights exceed ``T_B`` is the background set.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .expr import Equation
from .lbp import LbpConfig, lbp_codes, region_histograms
from .metrics import Confusion, accumulate
from .records import EvalRecord

__all__ = [
    "BgsParams",
    "SceneModel",
    "EmptySequence",
    "EmptyScoringRange",
    "DimensionMismatch",
    "bootstrap_length",
    "init_model",
    "process_frame",
    "segment",
    "evaluate_equation",
]

_CHUNK = 4096


class EmptySequence(ValueError):
    pass


class EmptyScoringRange(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class BgsParams:
    K: int = 3
    T_P: float = 0.65
    T_B: float = 0.7
    alpha_b: float = 0.01
    alpha_w: float = 0.01
    stride: int = 1
    new_weight: float = 0.01

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        for name in ("T_P", "T_B", "alpha_b", "alpha_w", "new_weight"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class SceneModel:
    shape: tuple[int, int]
    rows: np.ndarray
    cols: np.ndarray
    hists: np.ndarray  # (n_rows, n_cols, K, bins)
    weights: np.ndarray  # (n_rows, n_cols, K), sorted descending per pixel
    frames_seen: int = 0


def bootstrap_length(n_frames: int) -> int:
    """Frames used only to build the model: 10% of the clip, at least 5."""
    return max(5, math.ceil(0.1 * n_frames))


def _grid(shape, cfg: LbpConfig, stride: int):
    H, W = shape
    m = cfg.margin
    if H <= 2 * m or W <= 2 * m:
        raise DimensionMismatch(f"frame {shape} too small for a {m}-pixel margin")
    return np.arange(m, H - m, stride), np.arange(m, W - m, stride)


def _observe(frame, eq, cfg, rows, cols) -> np.ndarray:
    codes = lbp_codes(frame, eq, cfg)
    return region_histograms(codes, cfg, rows, cols)


def init_model(first_frames, eq: Equation, cfg: LbpConfig, params: BgsParams, workers: int = 1) -> SceneModel:
    """Seed every slot from the first frame, then learn from the rest silently."""
    frames = list(first_frames)
    if not frames:
        raise EmptySequence("at least one bootstrap frame is required")
    first = np.asarray(frames[0], dtype=np.float64)
    rows, cols = _grid(first.shape, cfg, params.stride)
    h = _observe(first, eq, cfg, rows, cols)
    hists = np.repeat(h[:, :, None, :], params.K, axis=2)
    weights = np.zeros(h.shape[:2] + (params.K,))
    weights[..., 0] = 1.0
    model = SceneModel(first.shape, rows, cols, hists, weights, 1)
    for frame in frames[1:]:
        process_frame(model, frame, eq, cfg, params, workers=workers)
    return model


def _update(h, M, w, params: BgsParams):
    """Advance one block of pixels in place; returns the foreground flags.

    h: (N, B) observations, M: (N, K, B) model histograms, w: (N, K) weights.
    """
    N, K = w.shape
    ar = np.arange(N)
    inter = np.minimum(h[:, None, :], M).sum(axis=2)
    # zero-weight slots are unused placeholders and never match
    inter[w <= 0.0] = -1.0
    best = inter.argmax(axis=1)
    matched = inter[ar, best] >= params.T_P

    mi = ar[matched]
    mb = best[matched]
    M[mi, mb] = params.alpha_b * h[mi] + (1.0 - params.alpha_b) * M[mi, mb]
    w[mi] *= 1.0 - params.alpha_w
    w[mi, mb] += params.alpha_w

    ui = ar[~matched]
    # weights are sorted, so the last slot is the weakest
    M[ui, K - 1] = h[ui]
    w[ui, K - 1] = params.new_weight
    w /= w.sum(axis=1, keepdims=True)

    order = np.argsort(-w, axis=1, kind="stable")
    moved = np.flatnonzero(np.any(order != np.arange(K), axis=1))
    if moved.size:
        o = order[moved]
        w[moved] = np.take_along_axis(w[moved], o, axis=1)
        M[moved] = np.take_along_axis(M[moved], o[:, :, None], axis=1)

    n_background = (np.cumsum(w, axis=1) > params.T_B).argmax(axis=1) + 1
    position = (order == best[:, None]).argmax(axis=1)
    return ~matched | (position >= n_background)


def process_frame(model: SceneModel, frame, eq: Equation, cfg: LbpConfig, params: BgsParams, workers: int = 1) -> np.ndarray:
    """Update ``model`` with one frame and return its uint8 mask (1 = foreground).

    Pixels outside the modelled interior are labelled background.  Pixel
    blocks are independent, so ``workers`` threads give identical results.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != model.shape:
        raise DimensionMismatch(f"frame {frame.shape} vs model {model.shape}")
    h = _observe(frame, eq, cfg, model.rows, model.cols)
    nr, nc, B = h.shape
    K = params.K
    h = h.reshape(-1, B)
    M = model.hists.reshape(-1, K, B)
    w = model.weights.reshape(-1, K)
    fg = np.empty(len(h), dtype=bool)

    def run(start):
        stop = start + _CHUNK
        fg[start:stop] = _update(h[start:stop], M[start:stop], w[start:stop], params)

    starts = range(0, len(h), _CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    model.frames_seen += 1

    labels = fg.reshape(nr, nc).astype(np.uint8)
    mask = np.zeros(model.shape, dtype=np.uint8)
    s = params.stride
    m = cfg.margin
    H, W = model.shape
    block = np.repeat(np.repeat(labels, s, axis=0), s, axis=1)
    r0, c0 = model.rows[0], model.cols[0]
    hh = min(block.shape[0], H - m - r0)
    ww = min(block.shape[1], W - m - c0)
    mask[r0 : r0 + hh, c0 : c0 + ww] = block[:hh, :ww]
    return mask


def segment(frames, eq: Equation, cfg: LbpConfig, params: BgsParams, bootstrap: int | None = None, workers: int = 1):
    """Yield a mask for every frame after the bootstrap prefix."""
    frames = list(frames)
    n_boot = bootstrap_length(len(frames)) if bootstrap is None else bootstrap
    model = init_model(frames[: max(n_boot, 1)], eq, cfg, params, workers)
    for frame in frames[max(n_boot, 1) :]:
        yield process_frame(model, frame, eq, cfg, params, workers)


def evaluate_equation(
    eq: Equation,
    frames,
    gts,
    cfg: LbpConfig | None = None,
    params: BgsParams | None = None,
    bootstrap: int | None = None,
    scene: str = "",
    frame_indices=None,
    seed: int | None = None,
    workers: int = 1,
    shadow_as_ignored: bool = False,
) -> EvalRecord:
    """Segment a clip with ``eq`` and score the post-bootstrap frames."""
    cfg = LbpConfig() if cfg is None else cfg
    params = BgsParams() if params is None else params
    frames = list(frames)
    gts = list(gts)
    if len(frames) != len(gts):
        raise DimensionMismatch(f"{len(frames)} frames but {len(gts)} ground-truth masks")
    n_boot = bootstrap_length(len(frames)) if bootstrap is None else bootstrap
    n_boot = max(n_boot, 1)
    if len(frames) <= n_boot:
        raise EmptyScoringRange(f"{len(frames)} frames leave nothing to score after a {n_boot}-frame bootstrap")
    indices = list(range(len(frames))) if frame_indices is None else list(frame_indices)
    start = time.perf_counter()
    confusion = Confusion()
    for mask, gt in zip(segment(frames, eq, cfg, params, n_boot, workers), gts[n_boot:]):
        confusion = accumulate(mask, gt, confusion, shadow_as_ignored)
    config = {"lbp": asdict(cfg), "bgs": asdict(params), "bootstrap": n_boot}
    return EvalRecord.from_confusion(
        scene, eq, confusion, config, indices[n_boot:], time.perf_counter() - start, seed
    )
