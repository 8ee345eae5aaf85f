"""Confusion counts against CDnet-style ground truth, scores and diff images."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "DimensionMismatch",
    "Confusion",
    "GT_POSITIVE",
    "GT_SHADOW",
    "GT_OUTSIDE_ROI",
    "GT_UNKNOWN",
    "accumulate",
    "scores",
    "fscore",
    "render_diff",
    "write_score_table",
]

GT_BACKGROUND = 0
GT_SHADOW = 50
GT_OUTSIDE_ROI = 85
GT_UNKNOWN = 170
GT_POSITIVE = 255

WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
RED = (255, 0, 0)
GREEN = (0, 255, 0)
GRAY = (128, 128, 128)


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0
    ignored: int = 0

    def __add__(self, other: "Confusion") -> "Confusion":
        return Confusion(
            self.tp + other.tp,
            self.tn + other.tn,
            self.fp + other.fp,
            self.fn + other.fn,
            self.ignored + other.ignored,
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn + self.ignored

    def as_dict(self) -> dict:
        return asdict(self)


def _labels(gt: np.ndarray, shadow_as_ignored: bool):
    gt = np.asarray(gt)
    ignored = (gt == GT_OUTSIDE_ROI) | (gt == GT_UNKNOWN)
    if shadow_as_ignored:
        ignored |= gt == GT_SHADOW
    positive = (gt == GT_POSITIVE) & ~ignored
    return positive, ignored


def _check(mask, gt):
    mask = np.asarray(mask)
    gt = np.asarray(gt)
    if mask.shape != gt.shape:
        raise DimensionMismatch(f"mask {mask.shape} vs ground truth {gt.shape}")
    return mask != 0, gt


def accumulate(mask, gt, c: Confusion | None = None, shadow_as_ignored: bool = False) -> Confusion:
    """Add one frame's counts to ``c``.

    Ground-truth 255 is positive, 0 and 50 (hard shadow) negative, 85 and 170
    ignored.  Any non-zero mask value means foreground.
    """
    fg, gt = _check(mask, gt)
    positive, ignored = _labels(gt, shadow_as_ignored)
    scored = ~ignored
    frame = Confusion(
        tp=int(np.count_nonzero(fg & positive)),
        tn=int(np.count_nonzero(~fg & ~positive & scored)),
        fp=int(np.count_nonzero(fg & ~positive & scored)),
        fn=int(np.count_nonzero(~fg & positive)),
        ignored=int(np.count_nonzero(ignored)),
    )
    return frame if c is None else c + frame


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def fscore(precision: float, recall: float) -> float:
    return _ratio(2.0 * precision * recall, precision + recall)


def scores(c: Confusion) -> tuple[float, float, float]:
    """(precision, recall, F-score); every 0/0 is taken as 0."""
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    return precision, recall, fscore(precision, recall)


def render_diff(mask, gt, shadow_as_ignored: bool = False) -> np.ndarray:
    """RGB uint8 image: TP white, TN black, FP red, FN green, ignored gray."""
    fg, gt = _check(mask, gt)
    positive, ignored = _labels(gt, shadow_as_ignored)
    out = np.zeros(gt.shape + (3,), dtype=np.uint8)
    out[fg & positive] = WHITE
    out[fg & ~positive] = RED
    out[~fg & positive] = GREEN
    out[ignored] = GRAY
    return out


def write_score_table(rows, path) -> None:
    """CSV with header scene,equation,precision,recall,fscore,frames."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scene", "equation", "precision", "recall", "fscore", "frames"])
        for row in rows:
            writer.writerow([row["scene"], row["equation"], repr(row["precision"]), repr(row["recall"]), repr(row["fscore"]), row["frames"]])
