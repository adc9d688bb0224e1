"""AdamW with a linear learning-rate decay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import ShapeMismatch

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class AdamMoments:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "AdamMoments":
        return cls({k: np.zeros_like(p) for k, p in params.items()},
                   {k: np.zeros_like(p) for k, p in params.items()})

    def copy(self) -> "AdamMoments":
        return AdamMoments({k: a.copy() for k, a in self.m.items()},
                           {k: a.copy() for k, a in self.v.items()})


def lr_at(step: int, total_steps: int, base_lr: float) -> float:
    """Linear decay from ``base_lr`` at step 0 to zero at ``total_steps``; no warmup."""
    if total_steps <= 0:
        return base_lr
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside 0..{total_steps}")
    return base_lr * (1.0 - step / total_steps)


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    moments: AdamMoments,
    lr: float,
    weight_decay: float,
    t: int,
) -> tuple[dict[str, np.ndarray], AdamMoments]:
    """One bias-corrected Adam update with decoupled weight decay.

    Decay ``p <- p - lr * wd * p`` is applied before the Adam step. Inputs are
    not modified.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    new_params, m_out, v_out = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")
        m = BETA1 * moments.m[name] + (1.0 - BETA1) * g
        v = BETA2 * moments.v[name] + (1.0 - BETA2) * g * g
        m_hat = m / (1.0 - BETA1 ** t)
        v_hat = v / (1.0 - BETA2 ** t)
        decayed = p - lr * weight_decay * p
        new_params[name] = decayed - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        m_out[name], v_out[name] = m, v
    return new_params, AdamMoments(m_out, v_out)
