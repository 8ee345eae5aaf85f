"""CDnet-layout scene ingestion, frame-range views and run artifacts.

Expected layout::

    <root>/<scene>/input/in000001.jpg        (png also accepted)
    <root>/<scene>/groundtruth/gt000001.png
    <root>/<scene>/temporalROI.txt           "first last", optional
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .records import EvalRecord, SchemaVersionMismatch, load_records, persist

log = logging.getLogger(__name__)

__all__ = [
    "Scene",
    "MissingDirectory",
    "IndexGap",
    "ResolutionMismatch",
    "OverlappingRanges",
    "EmptyRange",
    "EvalRecord",
    "SchemaVersionMismatch",
    "load_scene",
    "split_unseen",
    "parse_range",
    "persist",
    "load_records",
    "write_masks",
    "write_scene",
    "DEFAULT_SIZE",
]

DEFAULT_SIZE = (180, 120)  # (width, height)

_IN = re.compile(r"^in(\d+)\.(?:jpg|jpeg|png)$", re.IGNORECASE)
_GT = re.compile(r"^gt(\d+)\.png$", re.IGNORECASE)


class MissingDirectory(FileNotFoundError):
    pass


class IndexGap(ValueError):
    pass


class ResolutionMismatch(ValueError):
    pass


class OverlappingRanges(ValueError):
    pass


class EmptyRange(ValueError):
    pass


@dataclass
class Scene:
    """A contiguous, index-aligned run of input and ground-truth frames."""

    name: str
    inputs: list[Path]
    gts: list[Path]
    indices: list[int]
    roi: tuple[int, int]
    resolution: tuple[int, int]  # (width, height) after optional downscaling
    downscale: tuple[int, int] | None = None
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.indices)

    def frames(self) -> list[np.ndarray]:
        """Grey-level frames as float64 in [0, 1]."""
        out = []
        for p in self.inputs:
            with Image.open(p) as im:
                im = im.convert("L")
                if self.downscale and im.size != self.downscale:
                    im = im.resize(self.downscale, Image.BOX)
                out.append(np.asarray(im, dtype=np.float64) / 255.0)
        return out

    def ground_truth(self) -> list[np.ndarray]:
        """Label frames as uint8; nearest-neighbour resampling keeps label values intact."""
        out = []
        for p in self.gts:
            with Image.open(p) as im:
                im = im.convert("L")
                if self.downscale and im.size != self.downscale:
                    im = im.resize(self.downscale, Image.NEAREST)
                out.append(np.asarray(im, dtype=np.uint8))
        return out

    def view(self, first: int, last: int) -> "Scene":
        """Sub-scene over frame indices ``first..last`` (inclusive, clipped)."""
        keep = [k for k, i in enumerate(self.indices) if first <= i <= last]
        return replace(
            self,
            inputs=[self.inputs[k] for k in keep],
            gts=[self.gts[k] for k in keep],
            indices=[self.indices[k] for k in keep],
            warnings=list(self.warnings),
        )


def parse_range(text: str) -> tuple[int, int]:
    """Parse ``"a..b"`` (inclusive)."""
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text)
    if not m:
        raise ValueError(f"frame range must look like 'a..b', got {text!r}")
    a, b = int(m.group(1)), int(m.group(2))
    if b < a:
        raise ValueError(f"frame range {text!r} is decreasing")
    return a, b


def _index(directory: Path, pattern) -> dict[int, Path]:
    out = {}
    for p in directory.iterdir():
        m = pattern.match(p.name)
        if m:
            out[int(m.group(1))] = p
    return out


def _size(path: Path) -> tuple[int, int]:
    with Image.open(path) as im:
        return im.size


def load_scene(root, name: str, frame_range=None, downscale=None) -> Scene:
    """Index a CDnet scene directory.

    Parameters
    ----------
    frame_range
        Inclusive ``(first, last)`` or ``"first..last"``; clipped to the
        temporal ROI with a recorded warning.  Default: the whole ROI.
    downscale
        Target ``(width, height)``; frames are area-averaged, ground truth
        is resampled nearest-neighbour.  Frames already no larger than the
        target are left as they are.
    """
    base = Path(root) / name
    in_dir, gt_dir = base / "input", base / "groundtruth"
    for d in (base, in_dir, gt_dir):
        if not d.is_dir():
            raise MissingDirectory(f"missing directory {d}")
    inputs = _index(in_dir, _IN)
    gts = _index(gt_dir, _GT)
    if not inputs:
        raise EmptyRange(f"{in_dir} holds no in%06d images")

    roi_file = base / "temporalROI.txt"
    if roi_file.is_file():
        first, last = (int(v) for v in roi_file.read_text().split()[:2])
    else:
        first, last = min(inputs), max(inputs)

    warnings = []
    if frame_range is None:
        lo, hi = first, last
    else:
        if isinstance(frame_range, str):
            frame_range = parse_range(frame_range)
        lo, hi = (int(v) for v in frame_range)
        if lo < first or hi > last:
            msg = f"{name}: range {lo}..{hi} clipped to ROI {first}..{last}"
            warnings.append(msg)
            log.warning(msg)
            lo, hi = max(lo, first), min(hi, last)
    if hi < lo:
        raise EmptyRange(f"{name}: no frames left in range {lo}..{hi}")

    indices = list(range(lo, hi + 1))
    missing = [i for i in indices if i not in inputs or i not in gts]
    if missing:
        raise IndexGap(f"{name}: frame {missing[0]} lacks an input or ground-truth file ({len(missing)} gaps)")

    in_paths = [inputs[i] for i in indices]
    gt_paths = [gts[i] for i in indices]
    size = _size(in_paths[0])
    for p in in_paths + gt_paths:
        s = _size(p)
        if s != size:
            raise ResolutionMismatch(f"{p.name} is {s[0]}x{s[1]}, expected {size[0]}x{size[1]}")
    if downscale and size[0] <= downscale[0] and size[1] <= downscale[1]:
        downscale = None  # never upsample
    resolution = tuple(downscale) if downscale else size
    return Scene(name, in_paths, gt_paths, indices, (first, last), resolution, tuple(downscale) if downscale else None, warnings)


def split_unseen(scene: Scene, seen_range, unseen_count: int, unseen_start: int | None = None) -> tuple[Scene, Scene]:
    """Split ``scene`` into a search view and a held-out view.

    The unseen view has ``unseen_count`` frames starting at ``unseen_start``
    (default: right after the seen range), clipped to the loaded frames.
    """
    if isinstance(seen_range, str):
        seen_range = parse_range(seen_range)
    a, b = seen_range
    if unseen_count < 0:
        raise ValueError("unseen_count must be >= 0")
    start = b + 1 if unseen_start is None else unseen_start
    end = start + unseen_count - 1
    if unseen_count and start <= b and end >= a:
        raise OverlappingRanges(f"unseen {start}..{end} overlaps seen {a}..{b}")
    seen = scene.view(a, b)
    unseen = scene.view(start, end) if unseen_count else scene.view(1, 0)
    if unseen_count and len(unseen) < unseen_count:
        msg = f"{scene.name}: only {len(unseen)} of {unseen_count} unseen frames available"
        unseen.warnings.append(msg)
        log.warning(msg)
    return seen, unseen


def write_masks(masks, indices, out_dir) -> list[Path]:
    """Write binary masks as ``bin%06d.png`` (255 foreground)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for mask, i in zip(masks, indices):
        p = out / f"bin{i:06d}.png"
        Image.fromarray((np.asarray(mask) > 0).astype(np.uint8) * 255).save(p)
        paths.append(p)
    return paths


def write_scene(frames, gts, root, name: str, first_index: int = 1) -> Path:
    """Write a clip in CDnet layout.

    Frames are stored as 8-bit PNG (``in%06d.png``) so the written clip
    round-trips without compression artefacts.
    """
    base = Path(root) / name
    (base / "input").mkdir(parents=True, exist_ok=True)
    (base / "groundtruth").mkdir(parents=True, exist_ok=True)
    n = 0
    for n, (frame, gt) in enumerate(zip(frames, gts)):
        i = first_index + n
        pixels = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
        Image.fromarray(pixels).save(base / "input" / f"in{i:06d}.png")
        Image.fromarray(np.asarray(gt, dtype=np.uint8)).save(base / "groundtruth" / f"gt{i:06d}.png")
    (base / "temporalROI.txt").write_text(f"{first_index} {first_index + n}\n")
    return base
