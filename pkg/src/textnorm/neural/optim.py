"""Adam with bias correction, global-norm gradient clipping and divergence
detection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tensor import Parameter


class TrainingDiverged(RuntimeError):
    """A parameter or loss went non-finite during training."""


def clip_grad_norm(params: list[Parameter], max_norm: float) -> float:
    """Rescale all gradients when their global L2 norm exceeds max_norm.

    Returns the scale that was applied (1.0 when unchanged).
    """
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = math.sqrt(total)
    if norm <= max_norm or norm == 0.0:
        return 1.0
    scale = max_norm / norm
    for p in params:
        if p.grad is not None:
            p.grad *= scale
    return scale


@dataclass
class AdamState:
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: list[Parameter], state: AdamState) -> None:
    """One Adam update across all parameters; verifies the result is finite."""
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p in params:
        g = p.grad
        if g is None:
            continue
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.data)
        v = state.v.get(p.name)
        if v is None:
            v = state.v[p.name] = np.zeros_like(p.data)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= (state.learning_rate / bc1) * m / (
            np.sqrt(v / bc2) + state.eps)
        if not np.all(np.isfinite(p.data)):
            raise TrainingDiverged(
                f"non-finite values in parameter {p.name} after step {state.t}")
