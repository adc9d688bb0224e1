"""Sentence encoder over hashed features.

A text's feature vector is mean-pooled through a bucket embedding table and
passed through a two-layer tanh MLP::

    m = sum_t count_t * E[t] / sum_t count_t
    z = W2^T tanh(W1^T m + b1) + b2

Everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .corpus import FeatureVector
from .errors import ShapeMismatch

COSINE_EPS = 1e-12
PARAM_NAMES = ("E", "W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class EncoderDims:
    num_buckets: int = 4096
    embed_dim: int = 64
    hidden_dim: int = 64
    out_dim: int = 32

    def __post_init__(self):
        if min(self.num_buckets, self.embed_dim, self.hidden_dim, self.out_dim) < 1:
            raise ValueError(f"all dimensions must be positive: {self}")


@dataclass
class EncoderParams:
    E: np.ndarray
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def dims(self) -> EncoderDims:
        return EncoderDims(self.E.shape[0], self.E.shape[1], self.W1.shape[1], self.W2.shape[1])

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def as_dict(self) -> dict[str, np.ndarray]:
        return dict(self.items())

    def copy(self) -> "EncoderParams":
        return EncoderParams(**{k: v.copy() for k, v in self.items()})

    @classmethod
    def zeros_like(cls, other: "EncoderParams") -> "EncoderParams":
        return cls(**{k: np.zeros_like(v) for k, v in other.items()})


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(dims: EncoderDims, seed: int) -> EncoderParams:
    """Glorot-uniform matrices, zero biases."""
    rng = np.random.default_rng(seed)
    return EncoderParams(
        E=_glorot(rng, dims.num_buckets, dims.embed_dim),
        W1=_glorot(rng, dims.embed_dim, dims.hidden_dim),
        b1=np.zeros(dims.hidden_dim),
        W2=_glorot(rng, dims.hidden_dim, dims.out_dim),
        b2=np.zeros(dims.out_dim),
    )


def _pool_index(fvs: Sequence[FeatureVector], num_buckets: int):
    """Flatten a batch into (row, bucket, weight) triples for mean pooling."""
    rows, buckets, weights = [], [], []
    for i, fv in enumerate(fvs):
        total = sum(fv.counts.values())
        for bucket, count in fv.counts.items():
            if not 0 <= bucket < num_buckets:
                raise ShapeMismatch(f"bucket {bucket} out of range for {num_buckets} buckets")
            rows.append(i)
            buckets.append(bucket)
            weights.append(count / total)
    return (
        np.asarray(rows, dtype=np.int64),
        np.asarray(buckets, dtype=np.int64),
        np.asarray(weights, dtype=np.float64),
    )


def _forward(params: EncoderParams, fvs: Sequence[FeatureVector]):
    rows, buckets, weights = _pool_index(fvs, params.E.shape[0])
    M = np.zeros((len(fvs), params.E.shape[1]))
    np.add.at(M, rows, weights[:, None] * params.E[buckets])
    H = np.tanh(M @ params.W1 + params.b1)
    Z = H @ params.W2 + params.b2
    return Z, (rows, buckets, weights, M, H)


def encode_batch(params: EncoderParams, fvs: Sequence[FeatureVector]) -> np.ndarray:
    """Embeddings of a batch as an ``(n, d)`` array, rows in input order."""
    if not fvs:
        return np.zeros((0, params.W2.shape[1]))
    return _forward(params, fvs)[0]


def encode(params: EncoderParams, fv: FeatureVector) -> np.ndarray:
    return encode_batch(params, [fv])[0]


def backward(
    params: EncoderParams, fvs: Sequence[FeatureVector], grad_z: np.ndarray
) -> EncoderParams:
    """Parameter gradient of ``sum_i <grad_z[i], encode(fvs[i])>``."""
    grad_z = np.asarray(grad_z, dtype=np.float64)
    if grad_z.shape != (len(fvs), params.W2.shape[1]):
        raise ShapeMismatch(
            f"grad_z has shape {grad_z.shape}, expected {(len(fvs), params.W2.shape[1])}"
        )
    grads = EncoderParams.zeros_like(params)
    if not fvs:
        return grads
    _, (rows, buckets, weights, M, H) = _forward(params, fvs)
    grads.W2 = H.T @ grad_z
    grads.b2 = grad_z.sum(axis=0)
    gA = (grad_z @ params.W2.T) * (1.0 - H * H)
    grads.W1 = M.T @ gA
    grads.b1 = gA.sum(axis=0)
    gM = gA @ params.W1.T
    np.add.at(grads.E, buckets, weights[:, None] * gM[rows])
    return grads


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b) + COSINE_EPS))


def cosine_matrix(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarities between the rows of ``A`` and ``B``."""
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    return (A @ B.T) / (np.outer(na, nb) + COSINE_EPS)


def cosine_matrix_backward(
    A: np.ndarray, B: np.ndarray, G: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Pull ``G = dL/dcos(A, B)`` back to ``(dL/dA, dL/dB)``.

    Zero-norm rows get the gradient of the numerator only; the norm term is
    not differentiable there.
    """
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    D = np.outer(na, nb) + COSINE_EPS
    P = A @ B.T
    GD = G / D
    R = GD * P / D
    with np.errstate(divide="ignore", invalid="ignore"):
        ua = np.where(na[:, None] > 0, A / na[:, None], 0.0)
        ub = np.where(nb[:, None] > 0, B / nb[:, None], 0.0)
    dA = GD @ B - ua * (R @ nb)[:, None]
    dB = GD.T @ A - ub * (R.T @ na)[:, None]
    return dA, dB
