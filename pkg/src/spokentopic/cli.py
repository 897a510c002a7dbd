"""Command-line entry point: ``gen``, ``train``, ``eval``, ``gradcheck``.

Errors are reported on stderr as a single line ``spokentopic-error <code>: <message>``
and the process exits with status 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import gradcheck, pipeline
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_run_config
from .metrics import accuracy, confusion_matrix, format_confusion
from .synthcorpus import SPLITS, generate_corpus, load_split, save_corpus

log = logging.getLogger("spokentopic")

VARIANTS = [v.value for v in pipeline.Variant]


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def checkpoint_path(cfg: RunConfig, stage: str, variant: str | None = None) -> Path:
    name = f"fusion_{variant}.ckpt" if stage == "fusion" else f"{stage}.ckpt"
    return Path(cfg.checkpoint_dir) / name


def _load_config(args) -> RunConfig:
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _require_checkpoints(cfg: RunConfig, needed: list[tuple[str, str | None]]) -> dict:
    missing = [str(checkpoint_path(cfg, s, v)) for s, v in needed if not checkpoint_path(cfg, s, v).is_file()]
    if missing:
        raise CliError("missing-checkpoint", "required checkpoint(s) not found: " + ", ".join(missing))
    return {s: load_checkpoint(checkpoint_path(cfg, s, v)) for s, v in needed}


def cmd_gen(args) -> int:
    cfg = _load_config(args)
    out = Path(cfg.corpus_dir)
    if not out.is_dir():
        raise CliError("io", f"output directory does not exist: {out}")
    corpus = generate_corpus(cfg.corpus)
    save_corpus(corpus, out)
    for name in SPLITS:
        print(f"{name}: {len(corpus.split(name))} documents")
    print(f"topics: {cfg.corpus.num_topics}")
    return 0


def _load_docs(cfg: RunConfig, split: str):
    try:
        return load_split(cfg.corpus_dir, split)
    except FileNotFoundError as exc:
        raise CliError("io", str(exc)) from None


def cmd_train(args) -> int:
    cfg = _load_config(args)
    stage = pipeline.Stage(args.stage)
    variant = pipeline.Variant.parse(args.variant or cfg.model.variant).value
    needed = {"a2p": [], "p2w": [("a2p", None)], "fusion": [("a2p", None), ("p2w", None)]}[stage.value]
    prereqs = _require_checkpoints(cfg, needed)
    train = _load_docs(cfg, "train")
    if not train:
        raise CliError("data", "training split is empty")
    dev = _load_docs(cfg, "dev") if stage is pipeline.Stage.FUSION else None
    ckpt = pipeline.train_stage(stage, train, cfg.model, prereqs, variant=variant, dev=dev)
    Path(cfg.checkpoint_dir).mkdir(parents=True, exist_ok=True)
    path = checkpoint_path(cfg, stage.value, variant)
    save_checkpoint(ckpt, path)
    print(f"final loss {ckpt.meta['loss']:.6f}")
    print(f"wrote {path}")
    return 0


def evaluate_split(cfg: RunConfig, variant: str, docs) -> tuple[list[int], list[int]]:
    """Predictions and truths for ``docs``; an all-blank document is predicted as -1."""
    cks = _require_checkpoints(cfg, [("a2p", None), ("p2w", None), ("fusion", variant)])
    a2p = pipeline.load_a2p(cks["a2p"], cfg.model)
    p2w = pipeline.load_p2w(cks["p2w"], cfg.model)
    system = pipeline.load_system(cks["fusion"], cfg.model)
    pairs = pipeline.extract_features(a2p, p2w, docs, cfg.model.batch_size)
    present = [p for p in pairs if p is not None]
    scored = iter(pipeline.predict(system, present, cfg.model)) if present else iter(())
    preds = [next(scored) if p is not None else -1 for p in pairs]
    return preds, [d.topic for d in docs]


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    variant = pipeline.Variant.parse(args.variant).value
    docs = _load_docs(cfg, args.split)
    if not docs:
        raise CliError("empty-split", f"split {args.split!r} has no documents")
    preds, truths = evaluate_split(cfg, variant, docs)
    acc = accuracy(preds, truths)
    print(f"variant {variant} split {args.split}: {sum(p == t for p, t in zip(preds, truths))}/{len(truths)} correct")
    print(format_confusion(confusion_matrix(preds, truths, cfg.model.num_topics)))
    print(f"ACC={acc:.4f}")
    return 0


def cmd_gradcheck(args) -> int:
    seeds = tuple(range(args.seeds))
    worst = 0.0
    for name, suite in gradcheck.SUITES.items():
        err = max(max(suite(s).values()) for s in seeds)
        worst = max(worst, err)
        status = "ok" if err < gradcheck.TOLERANCE else "FAIL"
        print(f"{name:12s} max_rel_err={err:.3e} {status}")
    if worst >= gradcheck.TOLERANCE:
        raise CliError("gradcheck", f"max relative error {worst:.3e} >= {gradcheck.TOLERANCE}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spokentopic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")

    p = sub.add_parser("gen", help="generate and serialise the synthetic corpus")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train one stage")
    common(p)
    p.add_argument("--stage", required=True, choices=[s.value for s in pipeline.Stage])
    p.add_argument("--variant", choices=VARIANTS, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="report topic accuracy for one system")
    common(p)
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--split", default="test", choices=list(SPLITS))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--seeds", type=int, default=3)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root = logging.getLogger("spokentopic")
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO)
    root.propagate = False
    try:
        return args.func(args)
    except CliError as exc:
        code, msg = exc.code, str(exc)
    except ConfigError as exc:
        code, msg = "config", str(exc)
    except CheckpointError as exc:
        code, msg = "checkpoint", str(exc)
    except pipeline.MissingPrerequisiteError as exc:
        code, msg = "missing-checkpoint", str(exc)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        code, msg = "io", str(exc)
    except ValueError as exc:
        code, msg = "invalid", str(exc)
    print(f"spokentopic-error {code}: {msg}".replace("\n", " "), file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
