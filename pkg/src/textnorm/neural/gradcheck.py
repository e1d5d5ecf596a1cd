"""Central-difference validation of the analytic gradients.

Every backward rule in this package is checked against
(f(θ+ε) − f(θ−ε)) / 2ε in float64; the loss closure must be deterministic
(teacher forcing, dropout off).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Parameter, Tensor


def finite_diff_check(loss_fn: Callable[[], Tensor],
                      params: list[Parameter], eps: float = 1e-5,
                      max_coords_per_param: int = 16,
                      rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and numeric gradients.

    Samples up to ``max_coords_per_param`` coordinates per parameter
    (all of them when the parameter is small). Requires float64 parameters.
    """
    for p in params:
        if p.data.dtype != np.float64:
            raise ValueError(f"finite_diff_check needs float64 parameters, "
                             f"{p.name} is {p.data.dtype}")
    if rng is None:
        rng = np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {p.name: p.grad.copy() for p in params}
    worst = 0.0
    for p in params:
        flat = p.data.reshape(-1)
        size = flat.shape[0]
        if size <= max_coords_per_param:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords_per_param, replace=False)
        for c in coords:
            saved = flat[c]
            flat[c] = saved + eps
            f_plus = loss_fn().item()
            flat[c] = saved - eps
            f_minus = loss_fn().item()
            flat[c] = saved
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = analytic[p.name].reshape(-1)[c]
            rel = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
