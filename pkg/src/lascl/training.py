"""Training loop for the encoder and label centers."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from .corpus import Dataset, hash_vectorize
from .encoder import EncoderDims, EncoderParams, backward, encode_batch, init_params
from .evaluation import embed_dataset, hierarchical_accuracies
from .hierarchy import LabelTree, TemplateSpec
from .label_space import LabelSpace, init_label_space, nn_classify_batch, reencode
from .losses import DEFAULT_TAU, LossVariant, loss_variant
from .optim import AdamMoments, adam_step, lr_at

log = logging.getLogger(__name__)

__all__ = ["TrainConfig", "TrainState", "Snapshot", "train", "lr_at", "adam_step", "write_history"]


@dataclass
class TrainConfig:
    variant: LossVariant = LossVariant.LISC
    tau: float = DEFAULT_TAU
    batch_size: int = 32
    epochs: int = 20
    # 1e-5 suits BERT fine-tuning; this encoder is trained from scratch
    lr: float = 1e-3
    weight_decay: float = 0.1
    reencode_every: int = 500
    eval_every: int = 256
    patience: int = 5
    seed: int = 0
    num_buckets: int = 4096
    embed_dim: int = 64
    hidden_dim: int = 64
    out_dim: int = 32

    def __post_init__(self):
        self.variant = LossVariant(self.variant)
        for name in ("tau", "batch_size", "lr", "reencode_every", "eval_every", "patience"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 0 or self.weight_decay < 0:
            raise ValueError("epochs and weight_decay must be non-negative")

    @property
    def dims(self) -> EncoderDims:
        return EncoderDims(self.num_buckets, self.embed_dim, self.hidden_dim, self.out_dim)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        return d


@dataclass
class Snapshot:
    params: EncoderParams
    labels: LabelSpace
    step: int
    val_node_acc: float


@dataclass
class TrainState:
    params: EncoderParams
    labels: LabelSpace
    enc_moments: AdamMoments
    u_moments: AdamMoments
    step: int = 0
    best: Optional[Snapshot] = None
    history: list[dict] = field(default_factory=list)
    validations: list[tuple[int, float]] = field(default_factory=list)
    stopped_early: bool = False


def validation_node_acc(params: EncoderParams, labels: LabelSpace, dataset: Dataset, tree: LabelTree) -> float:
    Z = embed_dataset(params, dataset)
    pred = nn_classify_batch(labels, Z)
    return hierarchical_accuracies(tree, dataset.labels, pred)[0]


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        # contrastive terms need two instances
        if len(idx) >= 2:
            yield idx


def steps_per_epoch(n: int, batch_size: int) -> int:
    full, rest = divmod(n, batch_size)
    return full + (1 if rest >= 2 else 0)


def train(
    config: TrainConfig,
    splits: Mapping[str, Dataset],
    tree: LabelTree,
    template: TemplateSpec,
    overrides: Optional[Mapping[int, str]] = None,
) -> tuple[TrainState, list[dict]]:
    """Optimize the encoder (and label centers when the variant uses them).

    The returned state holds the final parameters; ``state.best`` is the
    snapshot with the highest validation direct-test leaf accuracy, replaced
    only on strict improvement. Training stops after ``patience`` validations
    without improvement.
    """
    train_set, val_set = splits["train"], splits.get("validation")
    if not train_set.examples:
        raise ValueError("train split is empty")
    if val_set is None or not val_set.examples:
        raise ValueError("validation split is empty")

    rng = np.random.default_rng(config.seed)
    params = init_params(config.dims, config.seed)
    labels = init_label_space(params, tree, template, overrides, config.reencode_every)
    state = TrainState(
        params,
        labels,
        AdamMoments.zeros_like(params.as_dict()),
        AdamMoments.zeros_like({"U": labels.U}),
    )

    fvs = [hash_vectorize(e.text, config.num_buckets) for e in train_set.examples]
    y_all = train_set.labels
    total = config.epochs * steps_per_epoch(len(fvs), config.batch_size)

    def validate() -> bool:
        acc = validation_node_acc(state.params, state.labels, val_set, tree)
        state.validations.append((state.step, acc))
        improved = state.best is None or acc > state.best.val_node_acc
        if improved:
            state.best = Snapshot(state.params.copy(), state.labels.copy(), state.step, acc)
        log.info("step %d val nodeAcc %.4f%s", state.step, acc, " *" if improved else "")
        return improved

    validate()
    if total == 0:
        return state, state.history

    stale, u_t = 0, 0
    for _ in range(config.epochs):
        for idx in _batches(len(fvs), config.batch_size, rng):
            batch_fvs = [fvs[i] for i in idx]
            lr = lr_at(state.step, total, config.lr)
            Z = encode_batch(state.params, batch_fvs)
            out = loss_variant(config.variant, Z, y_all[idx], state.labels.U, config.tau, state.labels.S)

            grads = backward(state.params, batch_fvs, out.grad_z)
            new, state.enc_moments = adam_step(
                state.params.as_dict(), grads.as_dict(), state.enc_moments,
                lr, config.weight_decay, state.step + 1,
            )
            state.params = EncoderParams(**new)
            if config.variant.uses_centers:
                u_t += 1
                new_u, state.u_moments = adam_step(
                    {"U": state.labels.U}, {"U": out.grad_U}, state.u_moments,
                    lr, config.weight_decay, u_t,
                )
                state.labels.U = new_u["U"]
            state.step += 1

            relabeled = reencode(state.labels, state.params, state.step)
            if relabeled is not state.labels:
                state.labels = relabeled
                state.u_moments = AdamMoments.zeros_like({"U": relabeled.U})
                u_t = 0

            row = {"step": state.step, "lr": lr, "loss": out.value, "val_nodeAcc": None}
            if state.step % config.eval_every == 0 or state.step == total:
                stale = 0 if validate() else stale + 1
                row["val_nodeAcc"] = state.validations[-1][1]
            state.history.append(row)
            if stale >= config.patience:
                state.stopped_early = True
                return state, state.history
    return state, state.history


def write_history(path: str | Path, state: TrainState) -> None:
    """CSV of step, lr, loss, val_nodeAcc; the step-0 validation comes first."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "lr", "loss", "val_nodeAcc"])
        if state.validations and state.validations[0][0] == 0:
            writer.writerow([0, "", "", repr(state.validations[0][1])])
        for row in state.history:
            val = row["val_nodeAcc"]
            writer.writerow([row["step"], repr(row["lr"]), repr(row["loss"]), "" if val is None else repr(val)])
