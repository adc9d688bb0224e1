"""JSON checkpoints.

Floats are written with Python's shortest round-trip repr, so a
save/load cycle reproduces every array bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .encoder import EncoderParams, PARAM_NAMES
from .hierarchy import LabelTree, build_tree
from .label_space import LabelSpace

FORMAT = "lascl-checkpoint/1"


@dataclass
class Checkpoint:
    params: EncoderParams
    labels: LabelSpace
    config: dict
    label_paths: list[list[str]]  # original taxonomy, class order
    train_label_paths: list[list[str]]  # taxonomy the label sentences were built from
    template: str
    step: int = 0
    val_node_acc: Optional[float] = None

    @property
    def tree(self) -> LabelTree:
        return build_tree(enumerate(self.label_paths))

    def class_index(self) -> dict[tuple[str, ...], int]:
        return {tuple(p): c for c, p in enumerate(self.label_paths)}


def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).tolist()


def to_dict(ckpt: Checkpoint) -> dict:
    return {
        "format": FORMAT,
        "dims": {
            "num_buckets": ckpt.params.E.shape[0],
            "embed_dim": ckpt.params.E.shape[1],
            "hidden_dim": ckpt.params.W1.shape[1],
            "out_dim": ckpt.params.W2.shape[1],
        },
        "seed": ckpt.config.get("seed"),
        "config": ckpt.config,
        "step": ckpt.step,
        "val_nodeAcc": ckpt.val_node_acc,
        "template": ckpt.template,
        "label_paths": ckpt.label_paths,
        "train_label_paths": ckpt.train_label_paths,
        "params": {name: _arr(a) for name, a in ckpt.params.items()},
        "label_space": {
            "sentences": ckpt.labels.sentences,
            "U": _arr(ckpt.labels.U),
            "W": _arr(ckpt.labels.W),
            "S": _arr(ckpt.labels.S),
            "reencode_every": ckpt.labels.reencode_every,
            "last_reencode_step": ckpt.labels.last_reencode_step,
        },
    }


def from_dict(doc: dict) -> Checkpoint:
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a {FORMAT} document")
    p = doc["params"]
    params = EncoderParams(**{name: np.array(p[name], dtype=np.float64) for name in PARAM_NAMES})
    ls = doc["label_space"]
    labels = LabelSpace(
        sentences=list(ls["sentences"]),
        U=np.array(ls["U"], dtype=np.float64),
        W=np.array(ls["W"], dtype=np.float64),
        S=np.array(ls["S"], dtype=np.float64),
        reencode_every=int(ls["reencode_every"]),
        last_reencode_step=int(ls["last_reencode_step"]),
    )
    return Checkpoint(
        params, labels, doc["config"], doc["label_paths"], doc["train_label_paths"],
        doc["template"], doc.get("step", 0), doc.get("val_nodeAcc"),
    )


def save(ckpt: Checkpoint, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(ckpt), fh, allow_nan=False)
        fh.write("\n")


def load(path: str | Path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
