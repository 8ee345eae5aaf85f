"""Evaluation records and their JSON-lines persistence."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .metrics import Confusion, scores

__all__ = ["SCHEMA_VERSION", "SchemaVersionMismatch", "EvalRecord", "persist", "load_records"]

SCHEMA_VERSION = 1


class SchemaVersionMismatch(ValueError):
    pass


@dataclass
class EvalRecord:
    scene: str
    equation: str
    structure: str
    operators: list[int]
    config: dict
    confusion: Confusion
    precision: float
    recall: float
    fscore: float
    frames: list[int] = field(default_factory=list)  # scored frame indices
    wall_time: float = 0.0
    seed: int | None = None

    @classmethod
    def from_confusion(cls, scene, equation, confusion: Confusion, config, frames, wall_time=0.0, seed=None):
        p, r, f = scores(confusion)
        return cls(
            scene=scene,
            equation=equation.text,
            structure=equation.source_structure.text,
            operators=list(equation.operators),
            config=config,
            confusion=confusion,
            precision=p,
            recall=r,
            fscore=f,
            frames=list(frames),
            wall_time=wall_time,
            seed=seed,
        )

    def to_json(self) -> str:
        d = asdict(self)
        d["schema"] = SCHEMA_VERSION
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "EvalRecord":
        d = json.loads(line)
        version = d.pop("schema", None)
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(f"record schema {version!r}, expected {SCHEMA_VERSION}")
        d["confusion"] = Confusion(**d["confusion"])
        return cls(**d)

    def key(self) -> tuple:
        """Everything except timing, for run-to-run comparisons."""
        return (self.scene, self.equation, tuple(self.operators), self.confusion, self.fscore, tuple(self.frames))


def persist(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def load_records(path) -> list[EvalRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        return [EvalRecord.from_json(line) for line in fh if line.strip()]
