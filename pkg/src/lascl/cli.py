"""Command-line entry point: ``lascl {gen-data,train,eval,gradcheck,dump}``.

Exit codes: 0 success, 1 usage error, 2 runtime or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import checkpoint as ckpt_io
from . import gradcheck
from .corpus import SPLITS, Dataset, generate_synthetic, kshot_sample, load_jsonl, write_jsonl
from .errors import LasclError
from .evaluation import (
    LPConfig,
    direct_test,
    embed_dataset,
    export_embeddings,
    linear_probe_train,
    report_from_predictions,
)
from .hierarchy import TemplateSpec, truncate_bottom_up
from .losses import LossVariant
from .training import TrainConfig, train, write_history

log = logging.getLogger("lascl")

DEFAULT_TEMPLATE = "It contains {label} news."
EXIT_USAGE = 1
EXIT_FAILURE = 2

class UsageError(Exception):
    pass

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")

def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v

def _non_negative_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v

def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v

def _noise(text: str) -> float:
    v = float(text)
    if not 0 <= v < 1:
        raise argparse.ArgumentTypeError(f"must be in [0, 1), got {v}")
    return v

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="lascl", description=__doc__.splitlines()[0], formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_, formatter_class=fmt)
        p.add_argument("--config", type=Path, help="JSON file of flag defaults; explicit flags win")
        return p

    g = add("gen-data", "write a synthetic hierarchical corpus as JSONL")
    g.add_argument("--branches", type=_positive_int, default=4)
    g.add_argument("--leaves-per-branch", type=_positive_int, default=3)
    g.add_argument("--per-class", type=_positive_int, default=100)
    g.add_argument("--vocab-shared", type=_positive_int, default=50)
    g.add_argument("--vocab-leaf", type=_positive_int, default=20)
    g.add_argument("--noise", type=_noise, default=0.1)
    g.add_argument("--depth", type=_positive_int, default=2, help="taxonomy depth (>= 2)")
    g.add_argument("--seed", type=int, default=7)
    g.add_argument("--out", type=Path, required=True)

    t = add("train", "train an encoder and label centers")
    t.add_argument("--data", type=Path, required=True)
    t.add_argument("--variant", choices=[v.value for v in LossVariant], default="lisc")
    t.add_argument("--tau", type=_positive_float, default=0.3, help="contrastive temperature (published setting)")
    t.add_argument("--batch", type=_positive_int, default=32, help="batch size (published setting)")
    t.add_argument("--epochs", type=_non_negative_int, default=20, help="(published setting)")
    t.add_argument("--lr", type=_positive_float, default=1e-3, help="peak learning rate, decayed linearly; the published 1e-5 targets a pretrained transformer")
    t.add_argument("--weight-decay", type=float, default=0.1, help="decoupled decay (published setting)")
    t.add_argument("--reencode-every", type=_positive_int, default=500,
                   help="steps between label re-encodings (published setting)")
    t.add_argument("--eval-every", type=_positive_int, default=256, help="steps between validations (published setting)")
    t.add_argument("--patience", type=_positive_int, default=5,
                   help="validations without improvement before stopping (published setting)")
    t.add_argument("--kshot", type=_positive_int, default=None, help="keep k training examples per class")
    t.add_argument("--bottom-up-levels", type=_positive_int, default=None,
                   help="keep only the last L names of every label path")
    t.add_argument("--template", default=DEFAULT_TEMPLATE,
                   help="label sentence pattern with {label} and {label[Lk]}")
    t.add_argument("--descriptions", type=Path, default=None,
                   help='JSON map "a/b/c" label path -> description sentence')
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=Path, required=True, help="output directory")

    e = add("eval", "score a checkpoint on a dataset")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--mode", choices=["dt", "lp", "lp-label-init"], default="dt")
    e.add_argument("--split", choices=list(SPLITS), default="test")
    e.add_argument("--lp-per-class", type=_positive_int, default=100,
                   help="balanced probe sample size per class")
    e.add_argument("--lp-epochs", type=_non_negative_int, default=10, help="(published setting)")
    e.add_argument("--lp-lr", type=_positive_float, default=5e-3, help="(published setting)")
    e.add_argument("--lp-weight-decay", type=float, default=0.01, help="(published setting)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", type=Path, default=None, help="also write the report JSON here")

    gc = add("gradcheck", "finite-difference check of every analytic gradient")
    gc.add_argument("--trials", type=_positive_int, default=20)
    gc.add_argument("--seed", type=int, default=0)

    d = add("dump", "write similarity matrices or embeddings as CSV")
    d.add_argument("--checkpoint", type=Path, required=True)
    what = d.add_mutually_exclusive_group(required=True)
    what.add_argument("--similarity", type=Path, help="CSV of W and S")
    what.add_argument("--embeddings", type=Path, help="CSV of instance and label embeddings")
    d.add_argument("--data", type=Path, default=None, help="dataset for --embeddings")
    d.add_argument("--split", choices=list(SPLITS) + ["all"], default="test")
    return parser

def _config_arg(argv: Sequence[str]) -> tuple[Optional[str], Optional[str]]:
    command = next((a for a in argv if a in COMMANDS), None)
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            return command, argv[i + 1]
        if a.startswith("--config="):
            return command, a.split("=", 1)[1]
    return command, None

def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    """Parse ``argv`` with defaults taken from ``--config`` when given."""
    command, config_path = _config_arg(argv)
    if command is None or config_path is None:
        return parser.parse_args(argv)
    sub = parser._subparsers._group_actions[0].choices[command]
    known = {a.dest for a in sub._actions} - {"help", "config"}
    try:
        overrides = json.loads(Path(config_path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read config {config_path}: {exc}")
    if not isinstance(overrides, dict):
        parser.error("config file must hold a JSON object")
    overrides = {k.replace("-", "_"): v for k, v in overrides.items()}
    unknown = sorted(set(overrides) - known)
    if unknown:
        parser.error(f"unknown config keys for {command}: {', '.join(unknown)}")
    for action in sub._actions:
        if action.dest not in overrides:
            continue
        value = overrides[action.dest]
        if action.type is not None and value is not None:
            try:
                value = action.type(str(value))
            except (argparse.ArgumentTypeError, ValueError) as exc:
                parser.error(f"config key {action.dest}: {exc}")
        if action.choices is not None and value not in action.choices:
            parser.error(f"config key {action.dest}: {value!r} not in {list(action.choices)}")
        action.required = False
        action.default = value
    return parser.parse_args(argv)

# --- commands -------------------------------------------------------------

def cmd_gen_data(args) -> int:
    if args.depth < 2:
        raise UsageError("--depth must be >= 2")
    splits, tree = generate_synthetic(
        args.branches, args.leaves_per_branch, args.per_class, args.vocab_shared,
        args.vocab_leaf, args.noise, args.seed, depth=args.depth,
    )
    n = write_jsonl(args.out, splits, tree)
    sizes = " ".join(f"{name}={len(splits[name])}" for name in SPLITS)
    print(f"C={tree.num_classes} N={n} {sizes}")
    return 0

def _load_descriptions(path: Optional[Path], label_paths: list[list[str]]) -> dict[int, str]:
    if path is None:
        return {}
    raw = json.loads(path.read_text(encoding="utf-8"))
    index = {"/".join(p): c for c, p in enumerate(label_paths)}
    unknown = sorted(set(raw) - set(index))
    if unknown:
        raise LasclError(f"descriptions for unknown label paths: {unknown}")
    return {index[k]: str(v) for k, v in raw.items()}

def cmd_train(args) -> int:
    splits, tree = load_jsonl(args.data)
    label_paths = tree.paths()
    overrides = _load_descriptions(args.descriptions, label_paths)
    if args.kshot is not None:
        splits = dict(splits)
        splits["train"] = kshot_sample(splits["train"], args.kshot, args.seed)
    train_tree = tree if args.bottom_up_levels is None else truncate_bottom_up(tree, args.bottom_up_levels)

    config = TrainConfig(
        variant=args.variant, tau=args.tau, batch_size=args.batch, epochs=args.epochs,
        lr=args.lr, weight_decay=args.weight_decay, reencode_every=args.reencode_every,
        eval_every=args.eval_every, patience=args.patience, seed=args.seed,
    )
    state, _ = train(config, splits, train_tree, TemplateSpec(args.template), overrides)
    best = state.best

    run_config = config.to_dict()
    run_config.update(kshot=args.kshot, bottom_up_levels=args.bottom_up_levels,
                      n_train=len(splits["train"]))
    args.out.mkdir(parents=True, exist_ok=True)
    ckpt = ckpt_io.Checkpoint(
        best.params, best.labels, run_config, label_paths, train_tree.paths(),
        args.template, best.step, best.val_node_acc,
    )
    ckpt_io.save(ckpt, args.out / "checkpoint.json")
    write_history(args.out / "history.csv", state)
    print(f"variant={config.variant.value} n_train={len(splits['train'])} steps={state.step} "
          f"best_step={best.step} val_nodeAcc={best.val_node_acc:.4f}")
    return 0

def _dataset_for(ckpt: ckpt_io.Checkpoint, path: Path, split: str) -> list[Dataset]:
    """Load ``path`` and renumber its examples into the checkpoint's classes."""
    splits, tree = load_jsonl(path)
    index = ckpt.class_index()
    remap = {}
    for c, p in enumerate(tree.paths()):
        if tuple(p) not in index:
            raise LasclError(f"label path {'/'.join(p)} is not known to the checkpoint")
        remap[c] = index[tuple(p)]
    names = SPLITS if split == "all" else (split,)
    out = []
    for name in names:
        ds = splits[name]
        out.append(Dataset([type(e)(e.text, remap[e.class_index]) for e in ds.examples], name))
    return out

def cmd_eval(args) -> int:
    ckpt = ckpt_io.load(args.checkpoint)
    tree = ckpt.tree
    (target,) = _dataset_for(ckpt, args.data, args.split)
    if not target.examples:
        raise LasclError(f"split {args.split} of {args.data} is empty")

    if args.mode == "dt":
        report = direct_test(ckpt.params, ckpt.labels, target, tree)
    else:
        (train_set,) = _dataset_for(ckpt, args.data, "train")
        (val_set,) = _dataset_for(ckpt, args.data, "validation")
        probe_set = kshot_sample(train_set, args.lp_per_class, args.seed)
        Zp = embed_dataset(ckpt.params, probe_set)
        validation = None
        if val_set.examples:
            validation = (embed_dataset(ckpt.params, val_set), val_set.labels)
        config = LPConfig(lr=args.lp_lr, weight_decay=args.lp_weight_decay,
                          epochs=args.lp_epochs, temperature=ckpt.config.get("tau", 0.3), seed=args.seed)
        init = "label_embeddings" if args.mode == "lp-label-init" else "random"
        probe = linear_probe_train(Zp, probe_set.labels, tree.num_classes, init,
                                   ckpt.labels.U, config, validation)
        Z = embed_dataset(ckpt.params, target)
        report = report_from_predictions(tree, Z, target.labels, probe.predict(Z), args.mode)
        report.extra = {"lp_examples": len(probe_set)}
    report.extra = {**report.extra, "split": args.split}

    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out is not None:
        args.out.write_text(text + "\n", encoding="utf-8")
    return 0

def cmd_gradcheck(args) -> int:
    worst = gradcheck.run(args.trials, args.seed)
    failed = False
    for name, err in worst.items():
        ok = err <= gradcheck.TOLERANCE
        failed |= not ok
        print(f"{name:8s} max_rel_err={err:.3e} {'ok' if ok else 'FAIL'}")
    return EXIT_FAILURE if failed else 0

def cmd_dump(args) -> int:
    ckpt = ckpt_io.load(args.checkpoint)
    if args.similarity is not None:
        names = ["/".join(p) for p in ckpt.label_paths]
        with open(args.similarity, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["matrix", "class"] + names)
            for key, M in (("W", ckpt.labels.W), ("S", ckpt.labels.S)):
                for name, row in zip(names, M):
                    writer.writerow([key, name] + [repr(float(v)) for v in row])
        print(f"wrote {2 * len(names)} rows to {args.similarity}")
        return 0

    if args.data is None:
        raise UsageError("--embeddings needs --data")
    parts = _dataset_for(ckpt, args.data, args.split)
    dataset = Dataset([e for p in parts for e in p.examples], args.split)
    rows = export_embeddings(ckpt.params, dataset, ckpt.labels, args.embeddings)
    print(f"wrote {rows} rows to {args.embeddings}")
    return 0

COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "dump": cmd_dump,
}

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = _apply_config(parser, sys.argv[1:] if argv is None else list(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"lascl {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LasclError, ValueError, KeyError, OSError) as exc:
        print(f"lascl {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE

if __name__ == "__main__":
    sys.exit(main())
