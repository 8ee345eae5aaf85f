"""End-to-end search: tune the VAE, generate structures, mutate operators, report.

Candidate evaluations are independent jobs.  With ``workers > 1`` they are
fanned out to a process pool; results are always collected in candidate
order, so the worker count never changes the outcome.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import partial
from pathlib import Path

import numpy as np

from . import mocmaes
from .bgs import BgsParams, evaluate_equation
from .expr import (
    BASELINE,
    Equation,
    apply_operators,
    iter_operator_vectors,
    load_corpus,
    mutation_count,
    parse_structure,
    validate,
)
from .lbp import LbpConfig
from .metrics import write_score_table
from .records import EvalRecord, load_records, persist
from .vae.model import VaeConfig, VaeModel, sample, train

log = logging.getLogger(__name__)

__all__ = [
    "VAE_SPACE",
    "RunConfig",
    "NoValidStructures",
    "EmptyRecords",
    "load_run_config",
    "tune_vae",
    "generate",
    "discover",
    "report",
    "WORST_VAE",
    "baseline_record",
]

# Choice lists of the VAE hyper-parameter search, in search-vector order.
VAE_SPACE: dict[str, list] = {
    "enc_hidden": [125, 256, 512],
    "dec_hidden": [512, 800],
    "enc_layers": [1, 2, 4, 6],
    "dec_layers": [1, 2, 4, 6],
    "enc_dropout": [0.01, 0.02, 0.01, 0.1, 0.2],
    "dec_dropout": [0.01, 0.02, 0.01, 0.1, 0.2],
    "n_batch": [32, 64, 512],
    "learning_rate": [0.001, 0.005],
    "optimizer": ["Adam", "Adadelta", "RMSprop"],
}

WORST_VAE = (1e6, 1e6)


class NoValidStructures(RuntimeError):
    pass


class EmptyRecords(ValueError):
    pass


@dataclass
class RunConfig:
    vae_space: dict = field(default_factory=lambda: {k: list(v) for k, v in VAE_SPACE.items()})
    L: int = 2
    K: int = 2
    cap: int = 1024
    scenes: list = field(default_factory=list)
    frames: dict = field(default_factory=dict)  # scene -> "a..b"
    objective: str = "precision_recall"  # or "fscore"
    seed: int = 0
    workers: int = 1
    mu: int = 2
    latent_dim: int = 16
    vae_max_epochs: int = 150
    vae_max_steps: int | None = None
    temperature: float = 1.0
    downscale: tuple | None = (180, 120)
    lbp: LbpConfig = field(default_factory=LbpConfig)
    bgs: BgsParams = field(default_factory=BgsParams)

    def __post_init__(self):
        if self.L < 1 or self.K < 1:
            raise ValueError("L and K must be >= 1")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")
        if self.objective not in ("precision_recall", "fscore"):
            raise ValueError("objective must be 'precision_recall' or 'fscore'")
        if self.workers < 1 or self.mu < 1:
            raise ValueError("workers and mu must be >= 1")


def _coerce(text: str, like):
    if isinstance(like, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text.strip()


def _apply_section(obj, section) -> dict:
    out = {}
    for f in fields(obj):
        if f.name in section:
            out[f.name] = _coerce(section[f.name], getattr(obj, f.name))
    return out


def load_run_config(path, base: RunConfig | None = None) -> RunConfig:
    """Read an INI-style file with [run], [vae_space], [lbp], [bgs] and [frames] sections.

    ``[vae_space]`` values are JSON lists; ``[frames]`` maps scene names to
    ``a..b`` ranges; ``scenes`` in ``[run]`` is comma-separated.
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(f"cannot read config file {path}")
    cfg = base or RunConfig()
    changes: dict = {}
    if cp.has_section("run"):
        run = cp["run"]
        for key in ("L", "K", "cap", "seed", "workers", "mu", "latent_dim", "vae_max_epochs"):
            if key in run:
                changes[key] = int(run[key])
        for key in ("temperature",):
            if key in run:
                changes[key] = float(run[key])
        if "objective" in run:
            changes["objective"] = run["objective"].strip()
        if "vae_max_steps" in run:
            changes["vae_max_steps"] = int(run["vae_max_steps"]) or None
        if "scenes" in run:
            changes["scenes"] = [s.strip() for s in run["scenes"].split(",") if s.strip()]
        if "downscale" in run:
            v = run["downscale"].strip().lower()
            changes["downscale"] = None if v in ("", "none", "off") else tuple(int(x) for x in v.split("x"))
    if cp.has_section("vae_space"):
        space = dict(cfg.vae_space)
        for key, value in cp["vae_space"].items():
            if key not in VAE_SPACE:
                raise ValueError(f"unknown VAE hyper-parameter {key!r}")
            space[key] = json.loads(value)
        changes["vae_space"] = space
    if cp.has_section("frames"):
        cased = configparser.ConfigParser()
        cased.optionxform = str  # scene names are case-sensitive
        cased.read(path)
        changes["frames"] = dict(cased["frames"])
    if cp.has_section("lbp"):
        changes["lbp"] = replace(cfg.lbp, **_apply_section(cfg.lbp, cp["lbp"]))
    if cp.has_section("bgs"):
        changes["bgs"] = replace(cfg.bgs, **_apply_section(cfg.bgs, cp["bgs"]))
    return replace(cfg, **changes)


# -- worker plumbing ---------------------------------------------------------


def _map(fn, jobs, workers: int, initializer=None, initargs=()):
    """Ordered map, in-process for one worker, process pool otherwise."""
    if workers <= 1 or len(jobs) <= 1:
        if initializer:
            initializer(*initargs)
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(workers, initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, jobs))


# -- VAE tuning --------------------------------------------------------------


def _vae_config(cfg: RunConfig, choice: dict) -> VaeConfig:
    return VaeConfig(
        **choice,
        latent_dim=cfg.latent_dim,
        seed=cfg.seed,
        max_epochs=cfg.vae_max_epochs,
    )


def _train_candidate(job):
    make_cfg, corpus, max_steps, temperature = job
    try:
        model, rep = train(make_cfg(), corpus, max_steps=max_steps, uve_temperature=temperature)
    except Exception as exc:  # a failed candidate is scored worst-case, never fatal
        log.warning("VAE candidate failed: %s", exc)
        return None, {"error": f"{type(exc).__name__}: {exc}"}
    best = rep.early_stop_epoch - 1
    return model, {"recon": rep.recon[best], "kl": rep.kl[best], "uve": rep.uve, "epochs": len(rep.total)}


def tune_vae(cfg: RunConfig, corpus=None):
    """Search VAE hyper-parameters with a budget of ``cfg.L`` trainings.

    Candidates come from one MO-CMA-ES run minimising (reconstruction, KL)
    over the unit cube, decoded onto ``cfg.vae_space``.  Returns the model
    with the highest UVE (earliest candidate on ties) and the trace: one dict
    per candidate with its configuration, losses, UVE and generation.
    """
    corpus = load_corpus() if corpus is None else list(corpus)
    names = list(cfg.vae_space)
    space = [cfg.vae_space[n] for n in names]
    rng = np.random.default_rng(cfg.seed)
    trace: list[dict] = []
    best = {"model": None, "uve": -1}

    def run(points, generation):
        budget = cfg.L - len(trace)
        choices = [dict(zip(names, mocmaes.encode_categorical(space, x))) for x in points[: max(budget, 0)]]
        jobs = [(partial(_vae_config, cfg, c), corpus, cfg.vae_max_steps, cfg.temperature) for c in choices]
        results = _map(_train_candidate, jobs, cfg.workers)
        out = []
        for c, (model, res) in zip(choices, results):
            entry = {"index": len(trace), "generation": generation, "config": c, **res}
            trace.append(entry)
            if model is None:
                out.append(WORST_VAE)
                continue
            if res["uve"] > best["uve"]:
                best.update(model=model, uve=res["uve"], index=entry["index"])
            out.append((res["recon"], res["kl"]))
        # points beyond the budget are never trained; non-finite values drop them
        out += [(math.inf, math.inf)] * (len(points) - len(out))
        return out

    mu = min(cfg.mu, cfg.L)
    xs = [rng.uniform(0.0, 1.0, len(names)) for _ in range(mu)]
    pop = mocmaes.init_population(xs, 0.3, run(xs, 0))
    generation = 0
    while len(trace) < cfg.L:
        generation += 1
        kids = mocmaes.ask(pop, rng)
        pop = mocmaes.tell(pop, kids, run([k.x for k in kids], generation))
    if best["model"] is None:
        raise RuntimeError("every VAE candidate failed to train")
    for entry in trace:
        entry["selected"] = entry["index"] == best["index"]
    return best["model"], trace


def generate(model: VaeModel, count: int, corpus=None, seed: int = 0, temperature: float = 1.0, attempts: int = 20) -> list[str]:
    """Up to ``count`` distinct valid structures absent from ``corpus``, canonically spaced, in draw order."""
    corpus = set(load_corpus() if corpus is None else corpus)
    out: list[str] = []
    seen: set[str] = set()
    for attempt in range(attempts):
        for s in sample(model, max(4 * count, 16), seed + attempt, temperature):
            if not validate(s):
                continue
            s = parse_structure(s).text
            if s not in seen and s not in corpus:
                seen.add(s)
                out.append(s)
                if len(out) == count:
                    return out
    return out


# -- equation search ---------------------------------------------------------

_CLIP: dict = {}


def _set_clip(frames, gts, lbp, bgs, scene, indices, seed):
    _CLIP.update(frames=frames, gts=gts, lbp=lbp, bgs=bgs, scene=scene, indices=indices, seed=seed)


def _evaluate_text(text: str):
    c = _CLIP
    try:
        return evaluate_equation(
            Equation(text), c["frames"], c["gts"], c["lbp"], c["bgs"],
            scene=c["scene"], frame_indices=c["indices"], seed=c["seed"],
        )
    except Exception as exc:  # skip the candidate, keep the run alive
        log.warning("evaluation of %r failed: %s", text, exc)
        return None


def _objectives(rec: EvalRecord | None, mode: str):
    if rec is None:
        return (1.0, 1.0)
    if mode == "fscore":
        return (1.0 - rec.fscore, 1.0 - rec.fscore)
    return (1.0 - rec.precision, 1.0 - rec.recall)


def _search_structure(structure, cfg: RunConfig, evaluate_batch, rng) -> list[EvalRecord]:
    s = parse_structure(structure)
    if mutation_count(s) <= cfg.cap:
        texts = [apply_operators(s, v).text for v in iter_operator_vectors(s)]
        return [r for r in evaluate_batch(texts) if r is not None]

    codes = [list(c) for c in s.choices()]
    cache: dict[tuple, EvalRecord | None] = {}
    order: list[tuple] = []

    def batch(points):
        vectors = [tuple(mocmaes.encode_categorical(codes, x)) for x in points]
        fresh = []
        for v in vectors:
            if v not in cache and v not in fresh and len(order) + len(fresh) < cfg.cap:
                fresh.append(v)
        for v, rec in zip(fresh, evaluate_batch([apply_operators(s, v).text for v in fresh])):
            cache[v] = rec
            order.append(v)
        return [_objectives(cache[v], cfg.objective) if v in cache else (math.inf, math.inf) for v in vectors]

    mu = cfg.mu
    xs = [rng.uniform(0.0, 1.0, len(codes)) for _ in range(mu)]
    pop = mocmaes.init_population(xs, 0.3, batch(xs))
    stall = 0
    while len(order) < cfg.cap and stall < 50:
        before = len(order)
        kids = mocmaes.ask(pop, rng)
        pop = mocmaes.tell(pop, kids, batch([k.x for k in kids]))
        stall = stall + 1 if len(order) == before else 0
    return [cache[v] for v in order if cache[v] is not None]


def discover(
    cfg: RunConfig,
    model: VaeModel | None,
    frames,
    gts,
    scene: str = "",
    frame_indices=None,
    corpus=None,
    structures=None,
    records_path=None,
):
    """Search operator assignments of ``cfg.K`` structures on one clip.

    Structures are sampled from ``model`` (valid, distinct, unseen) unless
    given explicitly.  Each structure is enumerated exhaustively when it has
    at most ``cfg.cap`` mutations, otherwise searched by MO-CMA-ES with a
    budget of ``cfg.cap`` distinct evaluations.  Returns (winner, records)
    where the winner has the highest F-score (first in candidate order on
    ties).
    """
    if structures is None:
        if model is None:
            raise ValueError("either a model or explicit structures are required")
        structures = generate(model, cfg.K, corpus, cfg.seed, cfg.temperature)
        if not structures:
            raise NoValidStructures("the model produced no valid unseen structure")
        if len(structures) < cfg.K:
            log.warning("only %d of %d requested structures found", len(structures), cfg.K)
    else:
        structures = [parse_structure(s).text for s in structures][: cfg.K]

    frames = [np.asarray(f, dtype=np.float64) for f in frames]
    gts = [np.asarray(g) for g in gts]
    indices = list(range(len(frames))) if frame_indices is None else list(frame_indices)
    initargs = (frames, gts, cfg.lbp, cfg.bgs, scene, indices, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    records: list[EvalRecord] = []

    pool = ProcessPoolExecutor(cfg.workers, initializer=_set_clip, initargs=initargs) if cfg.workers > 1 else None
    if pool is None:
        _set_clip(*initargs)

    def evaluate_batch(texts):
        if pool is None:
            return [_evaluate_text(t) for t in texts]
        return list(pool.map(_evaluate_text, texts))

    try:
        for structure in structures:
            start = time.perf_counter()
            found = _search_structure(structure, cfg, evaluate_batch, rng)
            log.info("%s: %d equations in %.1fs", structure, len(found), time.perf_counter() - start)
            records += found
    finally:
        if pool is not None:
            pool.shutdown()
    if not records:
        raise NoValidStructures("no candidate equation could be evaluated")
    winner = max(records, key=lambda r: r.fscore)
    if records_path is not None:
        persist(records, records_path)
    return winner, records


def baseline_record(cfg: RunConfig, frames, gts, scene: str = "", frame_indices=None) -> EvalRecord:
    """Score of the reference threshold Z - C + a under the run's settings."""
    return evaluate_equation(BASELINE, frames, gts, cfg.lbp, cfg.bgs, scene=scene, frame_indices=frame_indices, seed=cfg.seed)


# -- reporting ---------------------------------------------------------------


def report(records_path, out_dir) -> list[dict]:
    """Write ``<scene>_scores.csv`` per scene and ``summary.csv``; return the summary rows."""
    records = load_records(records_path) if not isinstance(records_path, list) else records_path
    if not records:
        raise EmptyRecords("no records to report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    by_scene: dict[str, list[EvalRecord]] = {}
    for r in records:
        by_scene.setdefault(r.scene, []).append(r)
    summary = []
    for scene in sorted(by_scene):
        recs = by_scene[scene]
        rows = [
            {"scene": r.scene, "equation": r.equation, "precision": r.precision, "recall": r.recall, "fscore": r.fscore, "frames": len(r.frames)}
            for r in recs
        ]
        write_score_table(rows, out / f"{scene or 'scene'}_scores.csv")
        best = max(recs, key=lambda r: r.fscore)
        summary.append(
            {"scene": scene, "structure": best.structure, "equation": best.equation,
             "precision": best.precision, "recall": best.recall, "fscore": best.fscore}
        )
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scene", "structure", "equation", "precision", "recall", "fscore"])
        for row in summary:
            writer.writerow([row["scene"], row["structure"], row["equation"], repr(row["precision"]), repr(row["recall"]), repr(row["fscore"])])
    return summary
