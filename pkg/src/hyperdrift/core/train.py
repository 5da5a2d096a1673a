"""Generic minibatch loop shared by the three detectors."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from hyperdrift.core.autodiff import Tape, Var, backward
from hyperdrift.core.optim import Adam, EarlyStopping

BatchLoss = Callable[[Tape, list[Var], np.ndarray], Var]


def fit(
    arrays: list[np.ndarray],
    batch_loss: BatchLoss,
    n: int,
    *,
    epochs: int,
    lr: float,
    decay: float,
    batch_size: int,
    rng: np.random.Generator,
    patience: int = 20,
    tol: float = 1e-6,
    on_epoch: Callable[[int], np.ndarray | None] | None = None,
) -> list[float]:
    """Minimise ``batch_loss`` over ``n`` samples by Adam.

    ``arrays`` is updated in place: its entries are replaced by views into the
    optimiser's flat buffer and hold the trained values on return.

    ``batch_loss(tape, leaves, idx)`` builds the loss for sample indices ``idx``;
    ``leaves`` mirror ``arrays`` on the tape. ``on_epoch(epoch)`` may return a
    replacement index pool for that epoch (e.g. freshly pseudo-labelled rows).
    Returns the per-epoch mean losses.
    """
    opt = Adam(arrays, lr=lr, decay=decay)
    stopper = EarlyStopping(patience=patience, tol=tol)
    history: list[float] = []
    pool = np.arange(n)
    for epoch in range(epochs):
        if on_epoch is not None:
            fresh = on_epoch(epoch)
            if fresh is not None:
                pool = fresh
        order = pool[rng.permutation(len(pool))]
        total = 0.0
        for start in range(0, len(order), batch_size):
            idx = order[start:start + batch_size]
            tape = Tape()
            leaves = [tape.leaf(a) for a in arrays]
            loss = batch_loss(tape, leaves, idx)
            grads = backward(tape, loss)
            opt.step(grads)
            total += float(loss.value) * len(idx)
        history.append(total / max(len(order), 1))
        opt.end_epoch()
        if stopper.update(history[-1]):
            break
    return history
