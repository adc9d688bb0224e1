"""Datasets: JSONL ingestion, a synthetic hierarchical corpus, k-shot sampling
and feature hashing of raw text."""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyDataset, ParseError
from .hierarchy import LabelTree, build_tree

SPLITS = ("train", "validation", "test")
MAX_TOKENS = 128
DEFAULT_BUCKETS = 4096

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


@dataclass(frozen=True)
class Example:
    text: str
    class_index: int


@dataclass
class Dataset:
    examples: list[Example]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.class_index for e in self.examples], dtype=np.int64)

    def class_counts(self) -> Counter:
        return Counter(e.class_index for e in self.examples)


@dataclass(frozen=True)
class FeatureVector:
    counts: dict[int, int] = field(default_factory=dict)
    num_buckets: int = DEFAULT_BUCKETS

    def __len__(self) -> int:
        return len(self.counts)


def fnv1a_64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def hash_vectorize(text: str, num_buckets: int = DEFAULT_BUCKETS) -> FeatureVector:
    """Lowercased whitespace tokens (first 128 kept), FNV-1a hashed into buckets."""
    if not _is_power_of_two(num_buckets):
        raise ValueError(f"num_buckets must be a power of two, got {num_buckets}")
    counts: dict[int, int] = {}
    for token in text.lower().split()[:MAX_TOKENS]:
        bucket = fnv1a_64(token.encode("utf-8")) % num_buckets
        counts[bucket] = counts.get(bucket, 0) + 1
    return FeatureVector(counts, num_buckets)


def _check_train(splits: dict[str, Dataset], num_classes: int) -> None:
    train = splits.get("train")
    if train is None or not train.examples:
        raise EmptyDataset("train split is empty")
    missing = set(range(num_classes)) - set(train.class_counts())
    if missing:
        warnings.warn(f"classes absent from the train split: {sorted(missing)}")


def load_jsonl(path: str | Path) -> tuple[dict[str, Dataset], LabelTree]:
    """Read ``{"text", "label_path", "split"?}`` records.

    Returns the examples grouped by split name plus the tree built from the
    distinct label paths, classes numbered by first appearance.
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(line_no, str(exc)) from None
            if not isinstance(rec, dict):
                raise ParseError(line_no, "expected a JSON object")
            text, label_path = rec.get("text"), rec.get("label_path")
            split = rec.get("split", "train")
            if not isinstance(text, str):
                raise ParseError(line_no, "'text' must be a string")
            if (
                not isinstance(label_path, list)
                or not label_path
                or not all(isinstance(x, str) for x in label_path)
            ):
                raise ParseError(line_no, "'label_path' must be a non-empty list of strings")
            if split not in SPLITS:
                raise ParseError(line_no, f"unknown split {split!r}")
            records.append((text, tuple(label_path), split))
    if not records:
        raise EmptyDataset(f"{path} contains no examples")

    class_of: dict[tuple[str, ...], int] = {}
    for _, label_path, _ in records:
        class_of.setdefault(label_path, len(class_of))
    tree = build_tree((c, list(p)) for p, c in class_of.items())

    splits = {name: Dataset([], name) for name in SPLITS}
    for text, label_path, split in records:
        splits[split].examples.append(Example(text, class_of[label_path]))
    _check_train(splits, tree.num_classes)
    return splits, tree


def write_jsonl(path: str | Path, splits: dict[str, Dataset], tree: LabelTree) -> int:
    """Write splits back out in the JSONL format; returns the number of lines."""
    paths = tree.paths()
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name in SPLITS:
            for ex in splits.get(name, Dataset([], name)).examples:
                rec = {"text": ex.text, "label_path": paths[ex.class_index], "split": name}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
                n += 1
    return n


def synthetic_label_paths(branches: int, leaves_per_branch: int, depth: int = 2) -> list[list[str]]:
    """Class-ordered label paths of the synthetic taxonomy.

    Node names are the first word of the matching vocabulary (``b{i}w0`` for
    branch ``i``, ``l{c}w0`` for leaf ``c``) so label sentences share tokens
    with the texts. ``depth`` > 2 inserts intermediate groups below each
    branch; leaves are split into two groups at every inserted level.
    """
    if depth < 2:
        raise ValueError("depth must be >= 2")
    paths = []
    for b in range(branches):
        for j in range(leaves_per_branch):
            c = b * leaves_per_branch + j
            path = [f"b{b}w0"]
            for level in range(2, depth):
                group = (j >> (depth - 1 - level)) & 1
                path.append(f"b{b}g{level}{group}")
            path.append(f"l{c}w0")
            paths.append(path)
    return paths


def generate_synthetic(
    branches: int = 4,
    leaves_per_branch: int = 3,
    per_class: int = 100,
    vocab_shared: int = 50,
    vocab_leaf: int = 20,
    noise: float = 0.1,
    seed: int = 7,
    *,
    vocab_noise: int = 500,
    depth: int = 2,
) -> tuple[dict[str, Dataset], LabelTree]:
    """Sample a hierarchical corpus whose leaves share branch vocabulary.

    Each text has 20 tokens: branch words ``b{i}w{j}`` with probability 0.4,
    leaf words ``l{c}w{j}`` with probability 0.6 - noise and noise words
    ``z{j}`` with probability ``noise``. Within each class, examples go
    round-robin to train (8 of 10), validation (1) and test (1).
    """
    for name, v in [
        ("branches", branches),
        ("leaves_per_branch", leaves_per_branch),
        ("per_class", per_class),
        ("vocab_shared", vocab_shared),
        ("vocab_leaf", vocab_leaf),
        ("vocab_noise", vocab_noise),
    ]:
        if v < 1:
            raise ValueError(f"{name} must be >= 1")
    if not 0 <= noise < 1:
        raise ValueError("noise must be in [0, 1)")

    rng = np.random.default_rng(seed)
    tree = build_tree(enumerate(synthetic_label_paths(branches, leaves_per_branch, depth)))
    probs = np.array([0.4, 0.6 - noise, noise]) if noise <= 0.6 else None
    if probs is None:
        # leaf share cannot go negative; the branch share absorbs the rest
        probs = np.array([1.0 - noise, 0.0, noise])

    splits = {name: Dataset([], name) for name in SPLITS}
    for c in range(tree.num_classes):
        b = c // leaves_per_branch
        for e in range(per_class):
            kinds = rng.choice(3, size=20, p=probs)
            tokens = []
            for kind in kinds:
                if kind == 0:
                    tokens.append(f"b{b}w{rng.integers(vocab_shared)}")
                elif kind == 1:
                    tokens.append(f"l{c}w{rng.integers(vocab_leaf)}")
                else:
                    tokens.append(f"z{rng.integers(vocab_noise)}")
            r = e % 10
            split = "train" if r < 8 else "validation" if r == 8 else "test"
            splits[split].examples.append(Example(" ".join(tokens), c))
    return splits, tree


def kshot_sample(dataset: Dataset, k: int, seed: int) -> Dataset:
    """Keep ``min(k, |class|)`` examples of every class, in original order."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, ex in enumerate(dataset.examples):
        by_class.setdefault(ex.class_index, []).append(i)
    keep: set[int] = set()
    for c in sorted(by_class):
        idx = by_class[c]
        if len(idx) <= k:
            keep.update(idx)
        else:
            keep.update(idx[i] for i in rng.choice(len(idx), size=k, replace=False))
    return Dataset([ex for i, ex in enumerate(dataset.examples) if i in keep], dataset.split)


def vectorize_all(texts: Iterable[str], num_buckets: int) -> list[FeatureVector]:
    return [hash_vectorize(t, num_buckets) for t in texts]


def texts_of(examples: Sequence[Example]) -> list[str]:
    return [e.text for e in examples]
