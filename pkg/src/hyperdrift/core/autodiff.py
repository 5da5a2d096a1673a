"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tape` records every primitive applied to :class:`Var` objects in
creation order. :func:`backward` walks the record in reverse and accumulates
vector-Jacobian products into each parent. Broadcasting is supported for the
elementwise primitives; gradients are summed back to the operand shape.

The primitive set is deliberately small (matmul, batched vec-mat product,
add/sub/mul, relu, exp, log, clip, sum, mean, reshape,
transpose). Everything the
detectors differentiate is composed from these.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from hyperdrift.errors import ContractError, ShapeError


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """A value on a tape. Leaves carry ``requires_grad=True``."""

    __slots__ = ("value", "parents", "vjp", "grad", "requires_grad", "tape")

    def __init__(self, tape: "Tape", value, parents=(), vjp=None, requires_grad=False):
        self.tape = tape
        if type(value) is not np.ndarray or value.dtype != np.float64:
            value = np.asarray(value, dtype=np.float64)
        self.value = value
        self.parents: tuple[Var, ...] = parents
        self.vjp: Callable[[np.ndarray], Sequence[np.ndarray]] | None = vjp
        if not requires_grad:
            for p in parents:
                if p.requires_grad:
                    requires_grad = True
                    break
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    def __repr__(self) -> str:
        return f"Var(shape={self.shape}, requires_grad={self.requires_grad})"

    def _lift(self, other) -> "Var":
        return other if isinstance(other, Var) else self.tape.constant(other)

    def __add__(self, other):
        return add(self, self._lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, self._lift(other))

    def __rsub__(self, other):
        return sub(self._lift(other), self)

    def __mul__(self, other):
        return mul(self, self._lift(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, self.tape.constant(-1.0))

    def __matmul__(self, other):
        return matmul(self, self._lift(other))


class Tape:
    """Append-only record of one differentiable evaluation.

    A tape belongs to a single training call and a single thread.
    """

    def __init__(self) -> None:
        self.nodes: list[Var] = []
        self.leaves: list[Var] = []

    def leaf(self, value) -> Var:
        """Differentiable input. The array is referenced, not copied."""
        v = Var(self, value, requires_grad=True)
        self.nodes.append(v)
        self.leaves.append(v)
        return v

    def constant(self, value) -> Var:
        v = Var(self, value)
        self.nodes.append(v)
        return v

    def _op(self, value, parents, vjp) -> Var:
        v = Var(self, value, parents, vjp)
        self.nodes.append(v)
        return v


def add(a: Var, b: Var) -> Var:
    return a.tape._op(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Var, b: Var) -> Var:
    return a.tape._op(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
    )


def mul(a: Var, b: Var) -> Var:
    av, bv = a.value, b.value
    return a.tape._op(
        av * bv,
        (a, b),
        lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)),
    )


def matmul(a: Var, b: Var) -> Var:
    """2-D matrix product ``a @ b``."""
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shapes {a.shape} and {b.shape} do not chain")
    av, bv = a.value, b.value
    return a.tape._op(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def batched_vecmat(x: Var, w: Var) -> Var:
    """Per-row product ``out[b] = x[b] @ w[b]`` for ``x (B,i)`` and ``w (B,i,j)``."""
    if x.value.ndim != 2 or w.value.ndim != 3 or x.shape[:2] != w.shape[:2]:
        raise ShapeError(f"batched_vecmat shapes {x.shape} and {w.shape} do not chain")
    xv, wv = x.value, w.value
    return x.tape._op(
        np.einsum("bi,bij->bj", xv, wv),
        (x, w),
        lambda g: (np.einsum("bj,bij->bi", g, wv), xv[:, :, None] * g[:, None, :]),
    )


def relu(a: Var) -> Var:
    mask = a.value > 0
    return a.tape._op(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def exp(a: Var) -> Var:
    out = np.exp(a.value)
    return a.tape._op(out, (a,), lambda g: (g * out,))


def log(a: Var) -> Var:
    av = a.value
    return a.tape._op(np.log(av), (a,), lambda g: (g / av,))


def clip(a: Var, lo: float, hi: float) -> Var:
    mask = (a.value >= lo) & (a.value <= hi)
    return a.tape._op(np.clip(a.value, lo, hi), (a,), lambda g: (g * mask,))


def sum_(a: Var, axis: int | None = None, keepdims: bool = False) -> Var:
    shape = a.shape

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return a.tape._op(a.value.sum(axis=axis, keepdims=keepdims), (a,), vjp)


def mean(a: Var, axis: int | None = None, keepdims: bool = False) -> Var:
    n = a.value.size if axis is None else a.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), a.tape.constant(1.0 / n))


def reshape(a: Var, shape: tuple[int, ...]) -> Var:
    old = a.shape
    return a.tape._op(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


def backward(tape: Tape, root: Var) -> list[np.ndarray]:
    """Reverse accumulation from a scalar ``root``.

    Returns gradients for ``tape.leaves`` in leaf-creation order and also sets
    ``leaf.grad``. Leaves that do not influence ``root`` get zero gradients.
    """
    if root.tape is not tape:
        raise ContractError("root does not belong to this tape")
    if root.value.size != 1:
        raise ContractError(f"backward needs a scalar root, got shape {root.shape}")
    for node in tape.nodes:
        node.grad = None
    root.grad = np.ones_like(root.value)
    for node in reversed(tape.nodes):
        if node.grad is None or node.vjp is None:
            continue
        for parent, g in zip(node.parents, node.vjp(node.grad)):
            if not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g
    grads = []
    for leaf in tape.leaves:
        if leaf.grad is None:
            leaf.grad = np.zeros_like(leaf.value)
        grads.append(leaf.grad)
    return grads


def transpose(a: Var) -> Var:
    """Transpose of a 2-D Var."""
    return a.tape._op(a.value.T, (a,), lambda g: (g.T,))
