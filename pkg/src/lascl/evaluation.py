"""Direct testing, linear probes, hierarchical accuracies and cluster geometry."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import pdist

from .corpus import Dataset, hash_vectorize
from .encoder import EncoderParams, cosine_matrix, cosine_matrix_backward, encode_batch
from .errors import EmptyProbeSet, InsufficientData, UnknownClass
from .hierarchy import LabelTree, ancestor_at_depth
from .label_space import LabelSpace, nn_classify_batch
from .optim import AdamMoments, adam_step


@dataclass
class MetricsReport:
    nodeAcc: float
    midAcc: float
    rootAcc: float
    intra_dist: Optional[float]
    inter_dist: Optional[float]
    n_examples: int
    mode: str = "dt"
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def hierarchical_accuracy(tree: LabelTree, true_class: int, pred_class: int) -> tuple[int, int, int]:
    """Leaf, parent and top-level agreement indicators for one prediction.

    When either leaf sits directly under the root its parent carries no
    information, so the parent indicator falls back to the top-level one.
    """
    for c in (true_class, pred_class):
        if not 0 <= c < tree.num_classes:
            raise UnknownClass(c)
    true_leaf, pred_leaf = tree.leaf(true_class), tree.leaf(pred_class)
    root = int(ancestor_at_depth(tree, true_class, 1) == ancestor_at_depth(tree, pred_class, 1))
    if min(true_leaf.depth, pred_leaf.depth) < 2:
        mid = root
    else:
        mid = int(true_leaf.parent == pred_leaf.parent)
    return int(true_class == pred_class), mid, root


def hierarchical_accuracies(
    tree: LabelTree, y_true: Sequence[int], y_pred: Sequence[int]
) -> tuple[float, float, float]:
    if len(y_true) == 0:
        raise InsufficientData("no examples to score")
    hits = np.array([hierarchical_accuracy(tree, int(t), int(p)) for t, p in zip(y_true, y_pred)])
    node, mid, root = hits.mean(axis=0)
    return float(node), float(mid), float(root)


def cluster_distances(embeddings: np.ndarray, labels_y: Sequence[int]) -> tuple[float, float]:
    """Mean within-class and cross-class Euclidean distances of unit-normalized points.

    ``intra`` averages, over classes with at least two points, the mean
    pairwise distance inside the class; ``inter`` averages over every pair of
    points with different labels.
    """
    X = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels_y)
    if X.shape[0] != y.shape[0]:
        raise InsufficientData("embeddings and labels differ in length")
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)

    classes = np.unique(y)
    if classes.size < 2:
        raise InsufficientData("need at least two classes")
    intra = [pdist(X[y == c]).mean() for c in classes if (y == c).sum() >= 2]
    if not intra:
        raise InsufficientData("no class has two or more points")

    iu, ju = np.triu_indices(X.shape[0], k=1)
    cross = y[iu] != y[ju]
    inter = pdist(X)[cross].mean()
    return float(np.mean(intra)), float(inter)


def _safe_cluster_distances(Z, y):
    try:
        return cluster_distances(Z, y)
    except InsufficientData:
        return None, None


def embed_dataset(encoder: EncoderParams, dataset: Dataset) -> np.ndarray:
    fvs = [hash_vectorize(e.text, encoder.E.shape[0]) for e in dataset.examples]
    return encode_batch(encoder, fvs)


def report_from_predictions(
    tree: LabelTree, Z: np.ndarray, y_true: np.ndarray, y_pred: np.ndarray, mode: str
) -> MetricsReport:
    node, mid, root = hierarchical_accuracies(tree, y_true, y_pred)
    intra, inter = _safe_cluster_distances(Z, y_true)
    return MetricsReport(node, mid, root, intra, inter, int(len(y_true)), mode)


def direct_test(
    encoder: EncoderParams, labels: LabelSpace, dataset: Dataset, tree: LabelTree
) -> MetricsReport:
    """Classify with the label centers as a nearest-neighbour head."""
    if not dataset.examples:
        raise InsufficientData("empty dataset")
    Z = embed_dataset(encoder, dataset)
    pred = nn_classify_batch(labels, Z)
    return report_from_predictions(tree, Z, dataset.labels, pred, "dt")


# --- linear probe ---------------------------------------------------------


@dataclass
class LPConfig:
    lr: float = 5e-3
    weight_decay: float = 0.01
    epochs: int = 10
    batch_size: int = 32
    temperature: float = 0.3
    seed: int = 0


@dataclass
class LinearProbe:
    weight: np.ndarray  # d x C
    bias: np.ndarray  # C
    init_mode: str = "random"
    temperature: float = 0.3

    def logits(self, Z: np.ndarray) -> np.ndarray:
        return cosine_matrix(np.atleast_2d(Z), self.weight.T) / self.temperature + self.bias

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(Z), axis=1)

    def accuracy(self, Z: np.ndarray, y: np.ndarray) -> float:
        return float(np.mean(self.predict(Z) == y))


def _ce_grads(probe: LinearProbe, Z: np.ndarray, y: np.ndarray):
    logits = probe.logits(Z)
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    dlogits = p.copy()
    dlogits[np.arange(len(y)), y] -= 1.0
    dlogits /= len(y)
    _, dW = cosine_matrix_backward(Z, probe.weight.T, dlogits / probe.temperature)
    return dW.T, dlogits.sum(axis=0)


def linear_probe_train(
    embeddings: np.ndarray,
    labels_y: Sequence[int],
    num_classes: int,
    init: str = "random",
    labelU: Optional[np.ndarray] = None,
    config: Optional[LPConfig] = None,
    validation: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> LinearProbe:
    """Train a cosine-logit softmax classifier on frozen embeddings.

    ``init="label_embeddings"`` starts from the label centers ``labelU`` with a
    zero bias. The returned probe is the epoch with the best accuracy on
    ``validation`` (the training data when not given).
    """
    config = config or LPConfig()
    Z = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels_y, dtype=np.int64)
    if Z.shape[0] == 0:
        raise EmptyProbeSet("no probe examples")
    rng = np.random.default_rng(config.seed)
    d = Z.shape[1]
    if init == "label_embeddings":
        if labelU is None:
            raise ValueError("label_embeddings init needs labelU")
        weight = np.array(labelU, dtype=np.float64)
    elif init == "random":
        a = np.sqrt(6.0 / (d + num_classes))
        weight = rng.uniform(-a, a, size=(d, num_classes))
    else:
        raise ValueError(f"unknown init mode {init!r}")
    probe = LinearProbe(weight, np.zeros(num_classes), init, config.temperature)
    if config.epochs == 0:
        return probe

    Zv, yv = validation if validation is not None else (Z, y)
    params = {"weight": probe.weight, "bias": probe.bias}
    moments = AdamMoments.zeros_like(params)
    best, best_acc, t = None, -1.0, 0
    for _ in range(config.epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), config.batch_size):
            idx = order[start:start + config.batch_size]
            probe = LinearProbe(params["weight"], params["bias"], init, config.temperature)
            gW, gb = _ce_grads(probe, Z[idx], y[idx])
            t += 1
            params, moments = adam_step(
                params, {"weight": gW, "bias": gb}, moments, config.lr, config.weight_decay, t
            )
        probe = LinearProbe(params["weight"], params["bias"], init, config.temperature)
        acc = probe.accuracy(Zv, yv)
        if acc > best_acc:
            best, best_acc = probe, acc
    return best


# --- export ---------------------------------------------------------------


def export_embeddings(
    encoder: EncoderParams, dataset: Dataset, labels: LabelSpace, path: str | Path
) -> int:
    """Write instance rows then label-center rows; returns the data row count."""
    Z = embed_dataset(encoder, dataset)
    d = labels.U.shape[0]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "class_index"] + [f"x{i}" for i in range(d)])
        for ex, z in zip(dataset.examples, Z):
            writer.writerow(["instance", ex.class_index] + [repr(float(v)) for v in z])
        for c in range(labels.num_classes):
            writer.writerow(["label", c] + [repr(float(v)) for v in labels.U[:, c]])
    return len(dataset.examples) + labels.num_classes
