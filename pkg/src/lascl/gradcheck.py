"""Central finite-difference checks of the analytic gradients."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .corpus import FeatureVector
from .encoder import EncoderDims, backward, encode_batch, init_params
from .label_space import scale_matrix, similarity_matrix
from .losses import LossVariant, loss_variant

FD_STEP = 1e-5
TOLERANCE = 1e-4
MIN_GRAD = 1e-8


def numeric_grad(f: Callable[[], float], x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central differences of ``f`` w.r.t. every entry of ``x`` (perturbed in place)."""
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f()
        flat[i] = orig - h
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray, min_grad: float = MIN_GRAD) -> float:
    """Largest per-coordinate relative error over coordinates with |analytic| > min_grad."""
    a, n = np.ravel(analytic), np.ravel(numeric)
    mask = np.abs(a) > min_grad
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(a[mask] - n[mask]) / np.maximum(np.abs(a[mask]), np.abs(n[mask]))))


def random_feature_vectors(rng: np.random.Generator, n: int, num_buckets: int) -> list[FeatureVector]:
    fvs = []
    for _ in range(n):
        k = int(rng.integers(1, 6))
        buckets = rng.choice(num_buckets, size=k, replace=False)
        fvs.append(FeatureVector({int(b): int(rng.integers(1, 4)) for b in buckets}, num_buckets))
    return fvs


def check_encoder(rng: np.random.Generator) -> float:
    dims = EncoderDims(16, 4, 5, 3)
    params = init_params(dims, int(rng.integers(2**31)))
    params.b1 = rng.normal(size=dims.hidden_dim) * 0.1
    params.b2 = rng.normal(size=dims.out_dim) * 0.1
    fvs = random_feature_vectors(rng, 4, dims.num_buckets)
    gz = rng.normal(size=(len(fvs), dims.out_dim))
    grads = backward(params, fvs, gz)

    def objective() -> float:
        return float(np.sum(gz * encode_batch(params, fvs)))

    return max(max_rel_error(g, numeric_grad(objective, p)) for (_, p), (_, g)
               in zip(params.items(), grads.items()))


def random_loss_inputs(rng: np.random.Generator, n: int = 6, C: int = 3, d: int = 4):
    y = np.concatenate([np.arange(C), rng.integers(0, C, size=n - C)])
    rng.shuffle(y)
    Z = rng.normal(size=(n, d))
    U = rng.normal(size=(d, C))
    S = scale_matrix(similarity_matrix(rng.normal(size=(d, C))))
    return Z, y, U, S


def check_variant(variant: LossVariant, rng: np.random.Generator, tau: float = 0.3) -> float:
    Z, y, U, S = random_loss_inputs(rng)
    out = loss_variant(variant, Z, y, U, tau, S)

    def objective() -> float:
        return loss_variant(variant, Z, y, U, tau, S).value

    return max(max_rel_error(out.grad_z, numeric_grad(objective, Z)),
               max_rel_error(out.grad_U, numeric_grad(objective, U)))


def run(trials: int = 20, seed: int = 0) -> dict[str, float]:
    """Max relative error per component over ``trials`` random instances."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst = {"encoder": 0.0, **{v.value: 0.0 for v in LossVariant}}
    for _ in range(trials):
        worst["encoder"] = max(worst["encoder"], check_encoder(rng))
        for v in LossVariant:
            worst[v.value] = max(worst[v.value], check_variant(v, rng))
    return worst
