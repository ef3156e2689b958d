"""Central finite-difference validation of the hand-written backward passes."""

from __future__ import annotations

import numpy as np


def finite_difference_check(loss_and_grad, store, eps=1e-5, max_coords=64, seed=0):
    """Compare analytic gradients with central differences.

    ``loss_and_grad`` is a zero-argument callable returning a scalar loss; it
    must accumulate gradients into ``store`` as a side effect and depend on
    nothing but the current store parameters.  Tensors larger than
    ``max_coords`` are subsampled.  Returns the max over checked coordinates
    of |g_fd - g| / max(1, |g_fd|, |g|); run in 64-bit for meaningful output.
    """
    rng = np.random.default_rng(seed)
    store.zero_grads()
    loss_and_grad()
    analytic = {name: store.grad(name).copy() for name in store.names()}

    worst = 0.0
    for name in store.names():
        param = store.param(name)
        flat = param.reshape(-1)
        size = flat.size
        if size <= max_coords:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=max_coords, replace=False)
        g_flat = analytic[name].reshape(-1)
        for c in coords:
            original = flat[c]
            flat[c] = original + eps
            store.zero_grads()
            f_plus = loss_and_grad()
            flat[c] = original - eps
            store.zero_grads()
            f_minus = loss_and_grad()
            flat[c] = original
            g_fd = (f_plus - f_minus) / (2.0 * eps)
            g = g_flat[c]
            err = abs(g_fd - g) / max(1.0, abs(g_fd), abs(g))
            worst = max(worst, err)
    # restore the analytic gradients so callers can keep using them
    for name in store.names():
        np.copyto(store.grad(name), analytic[name])
    return worst
