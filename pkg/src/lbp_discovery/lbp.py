"""Local binary patterns whose thresholding term is an arbitrary equation.

Bit ``p`` of a code is set when ``eq(Z_p, C, a)`` is finite and non-negative,
where ``C`` is the centre intensity and ``Z_p`` the (bilinearly interpolated)
intensity at angle ``2*pi*p/P`` on a circle of radius ``R``.  Angles run
counter-clockwise as seen on screen, i.e. towards decreasing row index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .expr import Equation, evaluate

__all__ = [
    "LbpConfig",
    "Histogram",
    "OutOfInterior",
    "BinCountMismatch",
    "Unnormalized",
    "neighbor_offsets",
    "threshold",
    "lbp_code",
    "lbp_codes",
    "region_histogram",
    "region_histograms",
    "window_codes",
    "intersection",
]


class OutOfInterior(ValueError):
    pass


class BinCountMismatch(ValueError):
    pass


class Unnormalized(ValueError):
    pass


@dataclass(frozen=True)
class LbpConfig:
    P: int = 8
    R: float = 1.0
    a: float = 0.01
    region_radius: int = 4
    window: str = "square"  # or "circle"

    def __post_init__(self):
        if not 1 <= self.P <= 24:
            raise ValueError("P must lie in 1..24")
        if self.R <= 0:
            raise ValueError("R must be positive")
        if self.region_radius < 0:
            raise ValueError("region_radius must be non-negative")
        if self.window not in ("square", "circle"):
            raise ValueError("window must be 'square' or 'circle'")

    @property
    def bins(self) -> int:
        return 1 << self.P

    @property
    def code_margin(self) -> int:
        """Pixels lost at each border by circle sampling."""
        return int(math.ceil(self.R - 1e-9))

    @property
    def margin(self) -> int:
        return self.code_margin + self.region_radius

    def window_offsets(self) -> list[tuple[int, int]]:
        r = self.region_radius
        offs = [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
        if self.window == "circle":
            offs = [(dy, dx) for dy, dx in offs if dy * dy + dx * dx <= r * r + 1e-9]
        return offs


@dataclass
class Histogram:
    bins: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.float64)

    @property
    def P(self) -> int:
        return int(round(math.log2(len(self.bins))))


def neighbor_offsets(cfg: LbpConfig) -> list[tuple[float, float]]:
    """(dx, dy) of each sampling point; dy grows downwards.

    Offsets within 1e-9 of an integer are snapped so that axis-aligned
    neighbours read pixels directly.
    """
    out = []
    for p in range(cfg.P):
        theta = 2.0 * math.pi * p / cfg.P
        dx = cfg.R * math.cos(theta)
        dy = -cfg.R * math.sin(theta)
        if abs(dx - round(dx)) < 1e-9:
            dx = float(round(dx))
        if abs(dy - round(dy)) < 1e-9:
            dy = float(round(dy))
        out.append((dx, dy))
    return out


def threshold(u) -> np.ndarray:
    """s(u): 1 where u is finite and >= 0, else 0."""
    u = np.asarray(u)
    with np.errstate(invalid="ignore"):
        return np.isfinite(u) & (u >= 0)


def _shifted(img: np.ndarray, dx: float, dy: float, m: int) -> np.ndarray:
    """Image sampled at (x+dx, y+dy) for every interior pixel (margin ``m``)."""
    H, W = img.shape
    x0 = math.floor(dx)
    y0 = math.floor(dy)
    fx = dx - x0
    fy = dy - y0

    def window(oy, ox):
        return img[m + oy : H - m + oy, m + ox : W - m + ox]

    if fx == 0.0 and fy == 0.0:
        return window(y0, x0)
    top = (1 - fx) * window(y0, x0) + fx * window(y0, x0 + 1) if fx else window(y0, x0)
    if fy == 0.0:
        return top
    bottom = (1 - fx) * window(y0 + 1, x0) + fx * window(y0 + 1, x0 + 1) if fx else window(y0 + 1, x0)
    return (1 - fy) * top + fy * bottom


def lbp_codes(img, eq: Equation, cfg: LbpConfig) -> np.ndarray:
    """Codes for every pixel where the sampling circle fits.

    Returns an int64 array shaped like ``img`` with ``-1`` in the border band.
    """
    img = np.asarray(img, dtype=np.float64)
    H, W = img.shape
    m = cfg.code_margin
    out = np.full((H, W), -1, dtype=np.int64)
    if H <= 2 * m or W <= 2 * m:
        return out
    centre = img[m : H - m, m : W - m]
    codes = np.zeros(centre.shape, dtype=np.int64)
    for p, (dx, dy) in enumerate(neighbor_offsets(cfg)):
        z = _shifted(img, dx, dy, m)
        codes |= threshold(evaluate(eq, z, centre, cfg.a)).astype(np.int64) << p
    out[m : H - m, m : W - m] = codes
    return out


def _check_interior(img: np.ndarray, x: int, y: int, margin: int) -> None:
    H, W = img.shape
    if not (margin <= x < W - margin and margin <= y < H - margin):
        raise OutOfInterior(f"pixel ({x}, {y}) is within {margin} px of the border")


def lbp_code(img, x: int, y: int, eq: Equation, cfg: LbpConfig) -> int:
    img = np.asarray(img, dtype=np.float64)
    m = cfg.code_margin
    _check_interior(img, x, y, m)
    patch = img[y - m : y + m + 1, x - m : x + m + 1]
    return int(lbp_codes(patch, eq, cfg)[m, m])


def region_histogram(img, x: int, y: int, eq: Equation, cfg: LbpConfig, normalized: bool = True) -> Histogram:
    """Histogram of LBP codes over the window centred on (x, y)."""
    img = np.asarray(img, dtype=np.float64)
    _check_interior(img, x, y, cfg.margin)
    m = cfg.margin
    patch = img[y - m : y + m + 1, x - m : x + m + 1]
    codes = lbp_codes(patch, eq, cfg)
    c = m
    counts = np.zeros(cfg.bins)
    for dy, dx in cfg.window_offsets():
        counts[codes[c + dy, c + dx]] += 1
    if normalized:
        return Histogram(counts / counts.sum(), True)
    return Histogram(counts, False)


def window_codes(codes: np.ndarray, cfg: LbpConfig, rows, cols) -> np.ndarray:
    """Codes inside each pixel's window, shape (len(rows) * len(cols), window size)."""
    offsets = cfg.window_offsets()
    out = np.empty((len(rows) * len(cols), len(offsets)), dtype=np.int64)
    for k, (dy, dx) in enumerate(offsets):
        out[:, k] = codes[np.ix_(rows + dy, cols + dx)].ravel()
    return out


def region_histograms(codes: np.ndarray, cfg: LbpConfig, rows=None, cols=None) -> np.ndarray:
    """Normalised window histograms for a grid of pixels.

    Parameters
    ----------
    codes
        Output of :func:`lbp_codes`.
    rows, cols
        1-D index arrays selecting the modelled pixels; every selected pixel
        must lie at least ``cfg.margin`` from the border.  Default: all
        interior pixels.

    Returns
    -------
    ndarray of shape (len(rows), len(cols), 2**P)
    """
    H, W = codes.shape
    m = cfg.margin
    if rows is None:
        rows = np.arange(m, H - m)
    if cols is None:
        cols = np.arange(m, W - m)
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    B = cfg.bins
    n = len(rows) * len(cols)
    wc = window_codes(codes, cfg, rows, cols)
    flat = wc + (np.arange(n, dtype=np.int64) * B)[:, None]
    counts = np.bincount(flat.ravel(), minlength=n * B).astype(np.float64)
    return counts.reshape(len(rows), len(cols), B) / wc.shape[1]


def intersection(h1: Histogram, h2: Histogram, tol: float = 1e-9) -> float:
    """Histogram intersection, sum of bin-wise minima."""
    if len(h1.bins) != len(h2.bins):
        raise BinCountMismatch(f"{len(h1.bins)} vs {len(h2.bins)} bins")
    for h in (h1, h2):
        if not h.normalized or abs(h.bins.sum() - 1.0) > tol:
            raise Unnormalized("intersection needs normalized histograms")
    return float(np.minimum(h1.bins, h2.bins).sum())
