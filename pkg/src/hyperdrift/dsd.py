"""Dynamic detector: an instance-conditioned hypernetwork over the static autoencoder.

For every autoencoder layer n the hypernetwork maps the instance to an
embedding ``e_n = head_n(shared(x))`` and from it to a weight shift

    dW_n = (W1_n e_n + b1_n) W2_n + b2_n + offset_n

where ``W1_n e_n + b1_n`` has one entry per input neuron and ``W2_n`` is a
single row with one entry per output neuron, so the instance-dependent part is
rank one. Bias shifts come from a parallel generator of the same form with a
single column. The dynamic autoencoder uses ``theta_s + shift``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hyperdrift.config import RunConfig
from hyperdrift.core import autodiff as ad
from hyperdrift.core.mlp import (
    Activation,
    MlpSpec,
    ParameterSet,
    init_params,
    mlp_forward,
    rowwise,
    shifted_forward,
    tape_forward,
    tape_forward_shifted,
)
from hyperdrift.core.train import fit
from hyperdrift.errors import ContractError, ShapeError
from hyperdrift.scd import AnomalyScore, AutoencoderModel, ScoreSource, mse_loss, _as_matrix

# order of arrays inside one LayerGenerator
_FIELDS = (
    "head_w", "head_b",
    "w1", "b1", "w2", "b2", "offset",
    "bias_w1", "bias_b1", "bias_w2", "bias_b2", "bias_offset",
)


@dataclass(frozen=True)
class LayerGenerator:
    """Parameters producing the shift of one target layer (n_in x n_out)."""

    head_w: np.ndarray  # (share_dim, d_e)
    head_b: np.ndarray  # (d_e,)
    w1: np.ndarray  # (n_in, d_e)
    b1: np.ndarray  # (n_in,)
    w2: np.ndarray  # (1, n_out)
    b2: np.ndarray  # (n_in, n_out)
    offset: np.ndarray  # (n_in, n_out)
    bias_w1: np.ndarray  # (n_out, d_e)
    bias_b1: np.ndarray  # (n_out,)
    bias_w2: np.ndarray  # (1, 1)
    bias_b2: np.ndarray  # (n_out, 1)
    bias_offset: np.ndarray  # (n_out, 1)

    @property
    def target_shape(self) -> tuple[int, int]:
        return self.b2.shape

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, f) for f in _FIELDS]


@dataclass(frozen=True)
class HyperNetwork:
    share_spec: MlpSpec
    share: ParameterSet
    generators: tuple[LayerGenerator, ...]

    @property
    def input_dim(self) -> int:
        return self.share_spec.widths[0]

    @property
    def embed_dim(self) -> int:
        return self.generators[0].head_w.shape[1]

    @property
    def n_layers(self) -> int:
        return len(self.generators)

    def arrays(self) -> list[np.ndarray]:
        """Flat writeable copies: shared-encoder arrays then each generator's."""
        out = self.share.arrays()
        for g in self.generators:
            out.extend(np.array(a) for a in g.arrays())
        return out

    def from_arrays(self, arrays) -> "HyperNetwork":
        n_share = 2 * len(self.share)
        share = ParameterSet.from_arrays(arrays[:n_share])
        gens = []
        k = n_share
        for _ in self.generators:
            chunk = arrays[k:k + len(_FIELDS)]
            gens.append(LayerGenerator(*[_readonly(a) for a in chunk]))
            k += len(_FIELDS)
        return HyperNetwork(self.share_spec, share, tuple(gens))


@dataclass(frozen=True)
class ShiftBundle:
    """Per-layer ``(dW, db)``; leading batch axis when produced for many instances."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def pairs(self):
        return list(zip(self.weights, self.biases))


def _readonly(a) -> np.ndarray:
    out = np.array(a, dtype=np.float64)
    out.flags.writeable = False
    return out


def init_hypernetwork(scd_model: AutoencoderModel, config: RunConfig,
                      rng: np.random.Generator, zero_output: bool = True) -> HyperNetwork:
    """Glorot-initialised encoder, heads and first generator layers.

    With ``zero_output`` the generator output layers start at zero, so every
    generated shift is zero and the dynamic detector equals the static one.
    """
    d = scd_model.input_dim
    share_spec = MlpSpec((d, config.share_dim), (Activation.RELU,))
    share = init_params(share_spec, rng)
    d_e = config.embed_dim

    def glorot(shape):
        limit = np.sqrt(6.0 / sum(shape))
        return rng.uniform(-limit, limit, size=shape)

    def out_layer(shape):
        return np.zeros(shape) if zero_output else glorot(shape) * 0.1

    gens = []
    for n_in, n_out in scd_model.spec.layer_shapes():
        gens.append(LayerGenerator(
            head_w=glorot((config.share_dim, d_e)), head_b=np.zeros(d_e),
            w1=glorot((n_in, d_e)), b1=np.zeros(n_in),
            w2=out_layer((1, n_out)), b2=out_layer((n_in, n_out)), offset=out_layer((n_in, n_out)),
            bias_w1=glorot((n_out, d_e)), bias_b1=np.zeros(n_out),
            bias_w2=out_layer((1, 1)), bias_b2=out_layer((n_out, 1)),
            bias_offset=out_layer((n_out, 1)),
        ))
    return HyperNetwork(share_spec, share, tuple(
        LayerGenerator(*[_readonly(a) for a in g.arrays()]) for g in gens))


def _check_input(hyper: HyperNetwork, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != hyper.input_dim:
        raise ShapeError(f"expected {hyper.input_dim} features, got {arr.shape[-1]}")
    return arr


def embed(hyper: HyperNetwork, x, n: int) -> np.ndarray:
    """Layer-specific embedding ``head_n(shared(x))``."""
    if not 0 <= n < hyper.n_layers:
        raise IndexError(f"layer index {n} out of range 0..{hyper.n_layers - 1}")
    arr = _check_input(hyper, x)
    g = hyper.generators[n]
    return rowwise(mlp_forward(hyper.share, hyper.share_spec, arr), g.head_w) + g.head_b


def generate_shifts(hyper: HyperNetwork, x) -> ShiftBundle:
    """Shifts for a batch ``(B, d)``: weights ``(B, n_in, n_out)``, biases ``(B, n_out)``."""
    xm = _as_matrix(_check_input(hyper, x))
    shared = mlp_forward(hyper.share, hyper.share_spec, xm)
    weights, biases = [], []
    for g in hyper.generators:
        e = rowwise(shared, g.head_w) + g.head_b
        v = rowwise(e, g.w1.T) + g.b1
        weights.append(v[:, :, None] * g.w2[None, :, :] + (g.b2 + g.offset))
        u = rowwise(e, g.bias_w1.T) + g.bias_b1
        biases.append((u[:, :, None] * g.bias_w2[None] + (g.bias_b2 + g.bias_offset))[:, :, 0])
    return ShiftBundle(tuple(weights), tuple(biases))


def generate_shift(hyper: HyperNetwork, x) -> ShiftBundle:
    """Shifts for one instance: weights ``(n_in, n_out)``, biases ``(n_out,)``."""
    arr = _check_input(hyper, x)
    if arr.ndim != 1:
        raise ShapeError("generate_shift takes a single instance")
    batch = generate_shifts(hyper, arr)
    return ShiftBundle(tuple(w[0] for w in batch.weights), tuple(b[0] for b in batch.biases))


def dynamic_params(scd_model: AutoencoderModel, shift: ShiftBundle) -> ParameterSet:
    """Elementwise ``theta_s + shift`` for a single-instance bundle."""
    if [w.shape for w in shift.weights] != scd_model.params.shapes():
        raise ShapeError("shift shapes do not match the static autoencoder")
    return scd_model.params + ParameterSet(shift.pairs())


def dynamic_reconstruct(scd_model: AutoencoderModel, hyper: HyperNetwork, x) -> np.ndarray:
    xm = _as_matrix(x)
    return shifted_forward(scd_model.params, scd_model.spec, xm, generate_shifts(hyper, xm).pairs())


def dynamic_errors(scd_model: AutoencoderModel, hyper: HyperNetwork, x) -> np.ndarray:
    """Per-row mean squared error of the dynamic autoencoder (batched path)."""
    xm = _as_matrix(x)
    diff = xm - dynamic_reconstruct(scd_model, hyper, xm)
    return np.mean(diff * diff, axis=1)


def dynamic_score(scd_model: AutoencoderModel, hyper: HyperNetwork, x) -> AnomalyScore:
    """Score one instance with ``theta_d = theta_s + generate_shift(x)``."""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    params = dynamic_params(scd_model, generate_shift(hyper, arr))
    recon = mlp_forward(params, scd_model.spec, arr[None, :])[0]
    return AnomalyScore(float(np.mean((arr - recon) ** 2)), ScoreSource.DYNAMIC)


def tape_shifts(tape: ad.Tape, share_leaves, gen_leaves, share_spec: MlpSpec, xb: ad.Var):
    """Differentiable shift generation; returns ``[(dW, db), ...]`` Vars."""
    shared = tape_forward(list(zip(share_leaves[0::2], share_leaves[1::2])), share_spec, xb)
    batch = xb.shape[0]
    out = []
    for leaves in gen_leaves:
        p = dict(zip(_FIELDS, leaves))
        n_in, n_out = p["b2"].shape
        e = shared @ p["head_w"] + p["head_b"]
        v = e @ ad.transpose(p["w1"]) + p["b1"]
        dw = ad.reshape(v, (batch, n_in, 1)) * ad.reshape(p["w2"], (1, 1, n_out)) + (p["b2"] + p["offset"])
        u = e @ ad.transpose(p["bias_w1"]) + p["bias_b1"]
        db = ad.reshape(
            ad.reshape(u, (batch, n_out, 1)) * ad.reshape(p["bias_w2"], (1, 1, 1))
            + (p["bias_b2"] + p["bias_offset"]),
            (batch, n_out),
        )
        out.append((dw, db))
    return out


def dsd_batch_loss(scd_model: AutoencoderModel, hyper: HyperNetwork, tape: ad.Tape,
                   hyper_leaves, scd_leaves, xb: np.ndarray) -> ad.Var:
    """Mean squared reconstruction error of the dynamic autoencoder on a batch."""
    n_share = 2 * len(hyper.share)
    k = len(_FIELDS)
    gen_leaves = [hyper_leaves[n_share + i * k: n_share + (i + 1) * k] for i in range(hyper.n_layers)]
    x = tape.constant(xb)
    shifts = tape_shifts(tape, hyper_leaves[:n_share], gen_leaves, hyper.share_spec, x)
    pairs = list(zip(scd_leaves[0::2], scd_leaves[1::2]))
    return mse_loss(tape_forward_shifted(pairs, shifts, scd_model.spec, x), x)


def train_dsd(scd_model: AutoencoderModel, hyper: HyperNetwork | None, data, config: RunConfig,
              rng: np.random.Generator | None = None, epochs: int | None = None):
    """Fit the hypernetwork by backpropagating through the shifted autoencoder.

    The static parameters stay frozen unless ``config.joint_dsd`` is set, in
    which case they are updated too. Returns ``(hypernetwork, scd_model)``.
    """
    x = _as_matrix(data)
    if x.shape[0] == 0:
        raise ContractError("hypernetwork training data is empty")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    hyper = init_hypernetwork(scd_model, config, rng) if hyper is None else hyper
    h_arrays = hyper.arrays()
    s_arrays = scd_model.params.arrays()
    n_h = len(h_arrays)
    joint = config.joint_dsd
    trainable = h_arrays + s_arrays if joint else h_arrays

    def batch_loss(tape, leaves, idx):
        scd_leaves = leaves[n_h:] if joint else [tape.constant(a) for a in s_arrays]
        return dsd_batch_loss(scd_model, hyper, tape, leaves[:n_h], scd_leaves, x[idx])

    n_epochs = config.dsd_epochs if epochs is None else epochs
    if n_epochs > 0:
        fit(trainable, batch_loss, len(x), epochs=n_epochs, lr=config.lr, decay=config.decay,
            batch_size=config.batch_size, rng=rng, patience=config.patience, tol=config.tol)
    h_arrays, s_arrays = trainable[:n_h], (trainable[n_h:] if joint else s_arrays)
    new_scd = scd_model.with_params(ParameterSet.from_arrays(s_arrays)) if joint else scd_model
    return hyper.from_arrays(h_arrays), new_scd
