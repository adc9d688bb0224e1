"""Label-aware supervised contrastive losses with exact gradients.

Every term is a log-ratio that training should increase; the functions here
return its negated batch mean, so lower is better. Gradients are taken with
respect to the instance embeddings ``Z`` (``n x d``) and the label centers
``U`` (``d x C``). Class similarities ``S`` are treated as constants.

Instance-instance terms (plain and temperature-scaled), per anchor ``i``::

    l_i = mean_{j in P_i} sim(z_i, z_j) / tau
          - log sum_{k in N_i} exp(sim(z_i, z_k) / (tau * S[y_i, y_k]))

with ``P_i`` the other in-batch examples of class ``y_i`` and ``N_i`` the
examples of other classes. Positives never appear in the denominator, so the
values can be negative. Anchors with an empty ``P_i`` or ``N_i`` are left
out of the mean.

Instance-center terms, per instance::

    l_i = sim(z_i, u_{y_i}) / tau
          - log sum_{c != y_i} exp(sim(z_i, u_c) / (tau * S[y_i, c]))

where the sum runs over all other classes, not just those in the batch.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .encoder import cosine_matrix, cosine_matrix_backward
from .errors import ShapeMismatch, SingleClass

DEFAULT_TAU = 0.3


class LossVariant(str, enum.Enum):
    SCL = "scl"
    LI = "li"
    LIUC = "liuc"
    LIC = "lic"
    LISC = "lisc"

    @property
    def uses_centers(self) -> bool:
        return self in (LossVariant.LIUC, LossVariant.LIC, LossVariant.LISC)


@dataclass
class LossOutput:
    value: float
    grad_z: np.ndarray
    grad_U: np.ndarray
    degenerate: bool = False

    def __add__(self, other: "LossOutput") -> "LossOutput":
        return LossOutput(
            self.value + other.value,
            self.grad_z + other.grad_z,
            self.grad_U + other.grad_U,
            self.degenerate or other.degenerate,
        )


def _check(Z: np.ndarray, y: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if Z.ndim != 2 or y.shape != (Z.shape[0],):
        raise ShapeMismatch(f"Z {Z.shape} and y {y.shape} do not align")
    if not tau > 0:
        raise ValueError("tau must be positive")
    return Z, y


def _logsumexp_weights(logits: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise logsumexp over masked entries and the matching softmax weights."""
    masked = np.where(mask, logits, -np.inf)
    peak = masked.max(axis=1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    e = np.where(mask, np.exp(masked - peak), 0.0)
    total = e.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        lse = np.log(total[:, 0]) + peak[:, 0]
        weights = np.where(total > 0, e / total, 0.0)
    return lse, weights


def _instance_instance(Z, y, tau, S, num_classes: int) -> LossOutput:
    n = Z.shape[0]
    if n < 2:
        raise ValueError("batch size must be >= 2")
    same = y[:, None] == y[None, :]
    pos = same & ~np.eye(n, dtype=bool)
    neg = ~same
    n_pos = pos.sum(axis=1)
    valid = (n_pos > 0) & neg.any(axis=1)
    grad_U = np.zeros((Z.shape[1], num_classes))
    n_valid = int(valid.sum())
    if n_valid == 0:
        return LossOutput(0.0, np.zeros_like(Z), grad_U, degenerate=True)

    sim = cosine_matrix(Z, Z)
    scale = tau * S[y[:, None], y[None, :]]
    lse, softmax = _logsumexp_weights(sim / scale, neg)
    pos_mean = np.where(pos, sim, 0.0).sum(axis=1) / np.maximum(n_pos, 1) / tau
    per_anchor = np.where(valid, pos_mean - lse, 0.0)
    value = -per_anchor.sum() / n_valid

    # d(value)/d(sim)
    G = np.where(pos, 1.0 / (tau * np.maximum(n_pos, 1))[:, None], 0.0) - softmax / scale
    G = -np.where(valid[:, None], G, 0.0) / n_valid
    dA, dB = cosine_matrix_backward(Z, Z, G)
    return LossOutput(float(value), dA + dB, grad_U)


def _instance_center(Z, y, U, tau, S) -> LossOutput:
    U = np.asarray(U, dtype=np.float64)
    if U.shape[0] != Z.shape[1]:
        raise ShapeMismatch(f"U has {U.shape[0]} rows, embeddings have {Z.shape[1]} dims")
    n, C = Z.shape[0], U.shape[1]
    if C < 2:
        raise SingleClass("instance-center loss needs at least two classes")
    if n == 0:
        return LossOutput(0.0, np.zeros_like(Z), np.zeros_like(U), degenerate=True)
    if y.min() < 0 or y.max() >= C:
        raise ShapeMismatch(f"labels out of range for {C} classes")

    centers = U.T
    sim = cosine_matrix(Z, centers)
    rows = np.arange(n)
    own = np.zeros((n, C), dtype=bool)
    own[rows, y] = True
    scale = tau * S[y]
    lse, softmax = _logsumexp_weights(sim / scale, ~own)
    value = -(sim[rows, y] / tau - lse).mean()

    G = np.where(own, 1.0 / tau, 0.0) - softmax / scale
    G = -G / n
    dZ, dC = cosine_matrix_backward(Z, centers, G)
    return LossOutput(float(value), dZ, dC.T.copy())


def loss_scl(Z, y, tau: float = DEFAULT_TAU, num_classes: int | None = None) -> LossOutput:
    """Supervised contrastive term with an unscaled temperature."""
    Z, y = _check(Z, y, tau)
    C = num_classes or (int(y.max()) + 1 if y.size else 1)
    return _instance_instance(Z, y, tau, np.ones((C, C)), C)


def loss_sii(Z, y, tau: float, S) -> LossOutput:
    """Instance-instance term with negatives' temperature scaled by ``S``."""
    Z, y = _check(Z, y, tau)
    S = np.asarray(S, dtype=np.float64)
    return _instance_instance(Z, y, tau, S, S.shape[0])


def loss_ic(Z, y, U, tau: float = DEFAULT_TAU) -> LossOutput:
    """Instance-center term with label columns of ``U`` as centers."""
    Z, y = _check(Z, y, tau)
    C = np.asarray(U).shape[1]
    return _instance_center(Z, y, U, tau, np.ones((C, C)))


def loss_sic(Z, y, U, tau: float, S) -> LossOutput:
    Z, y = _check(Z, y, tau)
    return _instance_center(Z, y, U, tau, np.asarray(S, dtype=np.float64))


def loss_variant(variant, Z, y, U, tau: float, S) -> LossOutput:
    """Dispatch to one of SCL, LI, LIUC, LIC or LISC; terms and gradients add."""
    variant = LossVariant(variant)
    C = np.asarray(U).shape[1]
    if variant is LossVariant.SCL:
        return loss_scl(Z, y, tau, C)
    if variant is LossVariant.LI:
        return loss_sii(Z, y, tau, S)
    if variant is LossVariant.LIUC:
        return loss_scl(Z, y, tau, C) + loss_ic(Z, y, U, tau)
    if variant is LossVariant.LIC:
        return loss_sii(Z, y, tau, S) + loss_ic(Z, y, U, tau)
    return loss_sii(Z, y, tau, S) + loss_sic(Z, y, U, tau, S)
