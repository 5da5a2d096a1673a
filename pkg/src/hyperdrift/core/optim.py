"""Adam with a per-epoch exponential learning-rate decay."""

from __future__ import annotations

from typing import Sequence

import numpy as np


class Adam:
    """Adam over a list of arrays.

    The arrays are re-bound as views into one flat buffer so a step is a few
    vectorised operations regardless of the number of parameter tensors. The
    caller's list is updated in place to hold those views.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-2, decay: float = 0.96,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        sizes = [p.size for p in params]
        self.flat = np.concatenate([np.ravel(p) for p in params]) if params else np.zeros(0)
        offsets = np.cumsum([0] + sizes)
        for i, p in enumerate(params):
            params[i] = self.flat[offsets[i]:offsets[i + 1]].reshape(p.shape)
        self.params = params
        self._offsets = offsets
        self.base_lr = lr
        self.decay = decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros_like(self.flat)
        self.v = np.zeros_like(self.flat)
        self.t = 0
        self.epoch = 0

    @property
    def lr(self) -> float:
        return self.base_lr * self.decay**self.epoch

    def step(self, grads: Sequence[np.ndarray]) -> None:
        """Update the parameters in place."""
        g = np.concatenate([np.ravel(x) for x in grads])
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * g
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * g * g
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        self.flat -= self.lr * (self.m / c1) / (np.sqrt(self.v / c2) + self.eps)

    def end_epoch(self) -> None:
        self.epoch += 1


class EarlyStopping:
    """Stop once the loss has not improved by ``tol`` for ``patience`` epochs."""

    def __init__(self, patience: int = 20, tol: float = 1e-6):
        self.patience = patience
        self.tol = tol
        self.best = np.inf
        self.stale = 0

    def update(self, loss: float) -> bool:
        if loss < self.best - self.tol:
            self.best = loss
            self.stale = 0
        else:
            self.stale += 1
        return self.stale >= self.patience
