"""Command-line entry point.

Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from PIL import Image

from . import dataset, pipeline, synthetic
from .bgs import evaluate_equation, segment, bootstrap_length
from .expr import GrammarError, load_corpus, parse_equation
from .metrics import render_diff
from .records import SchemaVersionMismatch, persist
from .vae import checkpoint
from .vae.model import VaeConfig, sample, train

log = logging.getLogger("lbp_discovery")

EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 2, 3, 4

_DATA_ERRORS = (
    FileNotFoundError,
    dataset.IndexGap,
    dataset.ResolutionMismatch,
    dataset.EmptyRange,
    dataset.OverlappingRanges,
    GrammarError,
    SchemaVersionMismatch,
    checkpoint.CheckpointError,
    pipeline.EmptyRecords,
    pipeline.NoValidStructures,
)

SYNTHETIC = {"synthetic_square": synthetic.moving_square, "synthetic_flicker": synthetic.oscillating_texture}


class UsageError(Exception):
    pass


def _run_config(args) -> pipeline.RunConfig:
    cfg = pipeline.RunConfig()
    if getattr(args, "config", None):
        try:
            cfg = pipeline.load_run_config(args.config)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"bad config file: {exc}") from exc
    changes = {}
    for name in ("cap", "workers", "seed"):
        value = getattr(args, name, None)
        if value is not None:
            changes[name] = value
    try:
        return replace(cfg, **changes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _out(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _clip(args, cfg):
    """(name, frames, gts, indices) from a CDnet directory or a built-in synthetic clip."""
    name = args.scene
    if not name:
        raise UsageError("--scene is required")
    if args.dataset:
        scene = dataset.load_scene(args.dataset, name, args.frames or cfg.frames.get(name), cfg.downscale)
        return name, scene.frames(), scene.ground_truth(), scene.indices
    if name not in SYNTHETIC:
        raise UsageError(f"without --dataset the scene must be one of {sorted(SYNTHETIC)}")
    clip = SYNTHETIC[name](seed=cfg.seed)
    indices = list(range(1, len(clip) + 1))
    frames, gts = clip.frames, clip.gts
    if args.frames:
        a, b = dataset.parse_range(args.frames)
        keep = [k for k, i in enumerate(indices) if a <= i <= b]
        frames, gts, indices = [frames[k] for k in keep], [gts[k] for k in keep], [indices[k] for k in keep]
    return name, frames, gts, indices


def _vae_config(args) -> VaeConfig:
    import configparser

    values = {}
    if args.config:
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise FileNotFoundError(f"cannot read config file {args.config}")
        if cp.has_section("vae"):
            defaults = VaeConfig()
            for key, text in cp["vae"].items():
                if not hasattr(defaults, key):
                    raise UsageError(f"unknown [vae] key {key!r}")
                like = getattr(defaults, key)
                values[key] = type(like)(text) if not isinstance(like, str) else text.strip()
    if args.seed is not None:
        values["seed"] = args.seed
    try:
        return VaeConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _corpus(args):
    return load_corpus(args.corpus) if getattr(args, "corpus", None) else load_corpus()


# -- subcommands -------------------------------------------------------------


def cmd_train_vae(args) -> int:
    cfg = _vae_config(args)
    model, rep = train(cfg, _corpus(args), max_steps=args.max_steps)
    out = _out(args)
    checkpoint.save(model, out / "vae.ckpt")
    (out / "train_report.json").write_text(json.dumps(asdict(rep), indent=1))
    print(f"epochs={len(rep.total)} best_epoch={rep.early_stop_epoch} total={rep.total[rep.early_stop_epoch - 1]:.4f} uve={rep.uve}")
    return 0


def cmd_tune_vae(args) -> int:
    cfg = _run_config(args)
    model, trace = pipeline.tune_vae(cfg, _corpus(args))
    out = _out(args)
    checkpoint.save(model, out / "vae.ckpt")
    (out / "tune_trace.json").write_text(json.dumps(trace, indent=1))
    chosen = next(t for t in trace if t["selected"])
    print(f"selected candidate {chosen['index']} uve={chosen['uve']} config={json.dumps(chosen['config'])}")
    return 0


def cmd_generate(args) -> int:
    model = checkpoint.load(args.model)
    seed = 0 if args.seed is None else args.seed
    if args.raw:
        lines = sample(model, args.count, seed, args.temperature)
    else:
        lines = pipeline.generate(model, args.count, _corpus(args), seed, args.temperature)
    text = "".join(s + "\n" for s in lines)
    if args.out:
        (_out(args) / "structures.txt").write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_discover(args) -> int:
    cfg = _run_config(args)
    if args.k is not None:
        cfg = replace(cfg, K=args.k)
    name, frames, gts, indices = _clip(args, cfg)
    structures = None
    model = None
    if args.structures:
        structures = [s for s in Path(args.structures).read_text().splitlines() if s.strip()]
    elif args.model:
        model = checkpoint.load(args.model)
    else:
        raise UsageError("discover needs --model or --structures")
    out = _out(args)
    winner, records = pipeline.discover(
        cfg, model, frames, gts, scene=name, frame_indices=indices,
        corpus=_corpus(args), structures=structures, records_path=out / "records.jsonl",
    )
    print(f"{len(records)} equations evaluated; best {winner.equation} P={winner.precision:.4f} R={winner.recall:.4f} F={winner.fscore:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    try:
        eq = parse_equation(args.equation)
    except GrammarError as exc:
        raise UsageError(f"--equation: {exc}") from exc
    name, frames, gts, indices = _clip(args, cfg)
    rec = evaluate_equation(eq, frames, gts, cfg.lbp, cfg.bgs, scene=name, frame_indices=indices, seed=cfg.seed)
    out = _out(args)
    persist([rec], out / "record.jsonl")
    if args.masks:
        n_boot = bootstrap_length(len(frames))
        masks = list(segment(frames, eq, cfg.lbp, cfg.bgs, n_boot))
        dataset.write_masks(masks, indices[n_boot:], out / "masks")
        (out / "diffs").mkdir(exist_ok=True)
        for mask, gt, i in zip(masks, gts[n_boot:], indices[n_boot:]):
            Image.fromarray(render_diff(mask, gt)).save(out / "diffs" / f"diff{i:06d}.png")
    print(f"{rec.equation} P={rec.precision:.4f} R={rec.recall:.4f} F={rec.fscore:.4f}")
    return 0


def cmd_report(args) -> int:
    summary = pipeline.report(args.records, _out(args))
    for row in summary:
        print(f"{row['scene']}: {row['equation']} P={row['precision']:.4f} R={row['recall']:.4f} F={row['fscore']:.4f}")
    return 0


def cmd_synth(args) -> int:
    seed = 0 if args.seed is None else args.seed
    name = args.scene or "synthetic_square"
    if name not in SYNTHETIC:
        raise UsageError(f"synthetic scene must be one of {sorted(SYNTHETIC)}")
    clip = SYNTHETIC[name](n_frames=args.n_frames, seed=seed)
    base = dataset.write_scene(clip.frames, clip.gts, _out(args), name)
    print(base)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lbp-discovery", description="Search LBP thresholding equations for background subtraction.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=False, search=False):
        p.add_argument("--config", help="key = value file with [section] headers")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--corpus", help="structure corpus file (default: bundled)")
        if data:
            p.add_argument("--dataset", help="CDnet root directory; omit for built-in synthetic scenes")
            p.add_argument("--scene")
            p.add_argument("--frames", help="inclusive frame range a..b")
        if search:
            p.add_argument("--cap", type=int)
            p.add_argument("--workers", type=int)
        return p

    p = common(sub.add_parser("train-vae", help="train one VAE on the structure corpus"))
    p.add_argument("--max-steps", type=int)
    p.set_defaults(func=cmd_train_vae)

    p = common(sub.add_parser("tune-vae", help="hyper-parameter search over VAE configurations"), search=True)
    p.set_defaults(func=cmd_tune_vae)

    p = common(sub.add_parser("generate", help="sample unseen valid structures"))
    p.add_argument("--model", required=True)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--raw", action="store_true", help="print raw samples without filtering")
    p.set_defaults(func=cmd_generate)

    p = common(sub.add_parser("discover", help="mutation search on one scene"), data=True, search=True)
    p.add_argument("--model")
    p.add_argument("--structures", help="file with one structure per line")
    p.add_argument("--k", type=int, help="number of structures")
    p.set_defaults(func=cmd_discover)

    p = common(sub.add_parser("evaluate", help="score one equation on one scene"), data=True, search=True)
    p.add_argument("--equation", default="Z - C + a")
    p.add_argument("--masks", action="store_true", help="also write masks and diff images")
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("report", help="score tables and best-equation summary"))
    p.add_argument("--records", required=True)
    p.set_defaults(func=cmd_report)

    p = common(sub.add_parser("synth", help="write a synthetic scene in CDnet layout"))
    p.add_argument("--scene", help=f"one of {sorted(SYNTHETIC)}")
    p.add_argument("--n-frames", type=int, default=40)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
