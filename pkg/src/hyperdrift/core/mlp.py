"""Dense multilayer perceptrons: specs, parameter sets, forward passes."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from hyperdrift.core import autodiff as ad
from hyperdrift.errors import ShapeError


class Activation(str, Enum):
    RELU = "relu"
    IDENTITY = "identity"


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths plus one activation per weight layer."""

    widths: tuple[int, ...]
    activations: tuple[Activation, ...]

    def __post_init__(self):
        if len(self.widths) < 2 or any(w < 1 for w in self.widths):
            raise ShapeError(f"invalid widths {self.widths}")
        if len(self.activations) != len(self.widths) - 1:
            raise ShapeError("need one activation per layer")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "activations", tuple(Activation(a) for a in self.activations))

    @classmethod
    def relu_net(cls, widths: Sequence[int], linear_at: Sequence[int] = ()) -> "MlpSpec":
        """ReLU on every layer except the last and any index in ``linear_at``."""
        n = len(widths) - 1
        acts = [
            Activation.IDENTITY if (i == n - 1 or i in linear_at) else Activation.RELU
            for i in range(n)
        ]
        return cls(tuple(widths), tuple(acts))

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def layer_shapes(self) -> list[tuple[int, int]]:
        return [(self.widths[i], self.widths[i + 1]) for i in range(self.n_layers)]


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Layer:
    weight: np.ndarray  # (n_in, n_out); forward is x @ weight + bias
    bias: np.ndarray  # (n_out,)


class ParameterSet:
    """Ordered, read-only (weight, bias) pairs; layer n is ``params[n]``."""

    __slots__ = ("layers",)

    def __init__(self, layers: Sequence[tuple[np.ndarray, np.ndarray]]):
        built = []
        for i, (w, b) in enumerate(layers):
            w, b = _frozen(w), _frozen(b)
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if built and built[-1].weight.shape[1] != w.shape[0]:
                raise ShapeError(f"layer {i} input width does not chain")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite entries")
            built.append(Layer(w, b))
        self.layers: tuple[Layer, ...] = tuple(built)

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, n: int) -> Layer:
        return self.layers[n]

    def __iter__(self):
        return iter(self.layers)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParameterSet) or len(self) != len(other):
            return NotImplemented if not isinstance(other, ParameterSet) else False
        return all(
            np.array_equal(a.weight, b.weight) and np.array_equal(a.bias, b.bias)
            for a, b in zip(self.layers, other.layers)
        )

    def shapes(self) -> list[tuple[int, int]]:
        return [layer.weight.shape for layer in self.layers]

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]`` (copies, writeable)."""
        out = []
        for layer in self.layers:
            out.extend([layer.weight.copy(), layer.bias.copy()])
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "ParameterSet":
        return cls([(arrays[i], arrays[i + 1]) for i in range(0, len(arrays), 2)])

    def __add__(self, other: "ParameterSet") -> "ParameterSet":
        if self.shapes() != other.shapes():
            raise ShapeError("parameter sets have different shapes")
        return ParameterSet(
            [(a.weight + b.weight, a.bias + b.bias) for a, b in zip(self.layers, other.layers)]
        )


def init_params(spec: MlpSpec, rng: np.random.Generator) -> ParameterSet:
    """Glorot-uniform weights, zero biases."""
    layers = []
    for n_in, n_out in spec.layer_shapes():
        limit = np.sqrt(6.0 / (n_in + n_out))
        layers.append((rng.uniform(-limit, limit, size=(n_in, n_out)), np.zeros(n_out)))
    return ParameterSet(layers)


def _act(x: np.ndarray, act: Activation) -> np.ndarray:
    return np.maximum(x, 0.0) if act is Activation.RELU else x


def rowwise(h, w) -> np.ndarray:
    """``h @ w`` where each output row is independent of the batch around it.

    BLAS kernels round a row differently depending on where it sits in the
    batch, so chunked and single-step scoring would disagree in the last bit.
    """
    return np.einsum("...i,io->...o", h, w)


def mlp_forward(params: ParameterSet, spec: MlpSpec, x) -> np.ndarray:
    """Evaluate the network on one vector ``(d,)`` or a batch ``(B, d)``."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != spec.widths[0]:
        raise ShapeError(f"input width {h.shape[-1]} != {spec.widths[0]}")
    if len(params) != spec.n_layers:
        raise ShapeError("parameter set does not match spec")
    for layer, act in zip(params.layers, spec.activations):
        h = _act(rowwise(h, layer.weight) + layer.bias, act)
    return h


def tape_forward(weights: Sequence[tuple[ad.Var, ad.Var]], spec: MlpSpec, x: ad.Var) -> ad.Var:
    """Taped batch forward; ``weights`` holds (W, b) Vars per layer."""
    h = x
    for (w, b), act in zip(weights, spec.activations):
        h = h @ w + b
        if act is Activation.RELU:
            h = ad.relu(h)
    return h


def tape_forward_shifted(
    weights: Sequence[tuple[ad.Var, ad.Var]],
    shifts: Sequence[tuple[ad.Var, ad.Var]],
    spec: MlpSpec,
    x: ad.Var,
) -> ad.Var:
    """Taped forward with per-instance additive shifts.

    ``shifts[n]`` holds ``(dW (B, n_in, n_out), db (B, n_out))``; row b of the
    batch is evaluated with weights ``W + dW[b]`` and bias ``b + db[b]``.
    """
    h = x
    for (w, b), (dw, db), act in zip(weights, shifts, spec.activations):
        h = h @ w + ad.batched_vecmat(h, dw) + b + db
        if act is Activation.RELU:
            h = ad.relu(h)
    return h


def shifted_forward(params: ParameterSet, spec: MlpSpec, x: np.ndarray, shifts) -> np.ndarray:
    """Numpy counterpart of :func:`tape_forward_shifted` for a batch."""
    h = np.asarray(x, dtype=np.float64)
    for layer, (dw, db), act in zip(params.layers, shifts, spec.activations):
        h = _act(rowwise(h, layer.weight) + np.einsum("bi,bij->bj", h, dw) + layer.bias + db, act)
    return h
