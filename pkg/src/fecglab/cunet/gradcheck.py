"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np


def finite_difference_grads(loss_fn, params, eps: float = 1e-5):
    """Numerical gradient of loss_fn() w.r.t. each (name, Tensor) parameter.

    loss_fn must re-evaluate the forward pass from the current parameter
    values and return a float.
    """
    grads = []
    for name, p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = loss_fn()
            flat[i] = orig - eps
            lo = loss_fn()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        grads.append((name, g))
    return grads


def max_relative_error(analytic, numeric, floor: float = 1e-8):
    """Worst relative disagreement across all parameters.

    The floor keeps near-zero gradient entries from inflating the ratio.
    """
    worst = 0.0
    worst_name = None
    for (name, ga), (_, gn) in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(ga), np.abs(gn)), floor)
        err = float(np.max(np.abs(ga - gn) / denom))
        if err > worst:
            worst, worst_name = err, name
    return worst, worst_name
