"""Named parameter storage with gradient buffers and the Adam update."""

from __future__ import annotations

import numpy as np


class NaNGradient(FloatingPointError):
    """A gradient buffer contains NaN or Inf."""


class ParamStore:
    """Flat registry of named tensors plus same-shape gradient buffers.

    Arrays are shared by reference: a layer keeps the array it registered,
    so in-place optimizer updates are visible to the layer without any
    re-binding.  Gradients accumulate; callers zero them between steps.
    """

    def __init__(self):
        self._params = {}
        self._grads = {}

    def register(self, name, value):
        if name in self._params:
            raise KeyError(f"parameter {name!r} already registered")
        value = np.ascontiguousarray(value, dtype=np.float64)
        self._params[name] = value
        self._grads[name] = np.zeros_like(value)
        return value

    def names(self):
        return list(self._params)

    def param(self, name):
        return self._params[name]

    def grad(self, name):
        return self._grads[name]

    def zero_grads(self):
        for g in self._grads.values():
            g[...] = 0.0

    def state_dict(self):
        """Copies of all parameters, keyed by name."""
        return {k: v.copy() for k, v in self._params.items()}

    def load_state_dict(self, state):
        for name, value in state.items():
            target = self._params[name]
            if target.shape != value.shape:
                raise ValueError(f"shape mismatch for {name!r}: "
                                 f"{target.shape} vs {value.shape}")
            np.copyto(target, value)


class AdamState:
    """Bias-corrected Adam: per-parameter moment buffers and a step counter."""

    def __init__(self, store, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {name: np.zeros_like(store.param(name)) for name in store.names()}
        self.v = {name: np.zeros_like(store.param(name)) for name in store.names()}


def adam_step(store, opt):
    """Apply one Adam update in place.

    Gradients are left untouched; zeroing between steps is the caller's job.
    Raises NaNGradient before touching any parameter if a buffer is not finite.
    """
    for name in opt.m:
        if not np.all(np.isfinite(store.grad(name))):
            raise NaNGradient(f"non-finite gradient in {name!r}")
    opt.step += 1
    t = opt.step
    bc1 = 1.0 - opt.beta1 ** t
    bc2 = 1.0 - opt.beta2 ** t
    for name in opt.m:
        g = store.grad(name)
        m = opt.m[name]
        v = opt.v[name]
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        update = (m / bc1) / (np.sqrt(v / bc2) + opt.eps)
        store.param(name)[...] -= opt.lr * update
