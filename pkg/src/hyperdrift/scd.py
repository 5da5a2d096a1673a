"""Static detector: an autoencoder fitted once on the historical split.

Its mean squared reconstruction error is the static anomaly score.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from hyperdrift.config import RunConfig
from hyperdrift.core import autodiff as ad
from hyperdrift.core.mlp import MlpSpec, ParameterSet, init_params, mlp_forward, tape_forward
from hyperdrift.core.pca import pca_latent_dim
from hyperdrift.core.train import fit
from hyperdrift.errors import ContractError, ShapeError


class ScoreSource(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class AnomalyScore:
    value: float
    source: ScoreSource


@dataclass(frozen=True)
class AutoencoderModel:
    """Symmetric autoencoder stored as one MLP; the first ``n_encoder`` layers encode."""

    spec: MlpSpec
    params: ParameterSet
    n_encoder: int

    def __post_init__(self):
        if self.params.shapes() != self.spec.layer_shapes():
            raise ShapeError("parameters do not match the autoencoder spec")
        if self.spec.widths[0] != self.spec.widths[-1]:
            raise ShapeError("autoencoder must map d -> d")

    @property
    def input_dim(self) -> int:
        return self.spec.widths[0]

    @property
    def latent_dim(self) -> int:
        return self.spec.widths[self.n_encoder]

    @property
    def encoder(self) -> ParameterSet:
        return ParameterSet([(l.weight, l.bias) for l in self.params.layers[: self.n_encoder]])

    @property
    def decoder(self) -> ParameterSet:
        return ParameterSet([(l.weight, l.bias) for l in self.params.layers[self.n_encoder:]])

    def with_params(self, params: ParameterSet) -> "AutoencoderModel":
        return AutoencoderModel(self.spec, params, self.n_encoder)


def autoencoder_spec(d: int, latent: int, hidden: tuple[int, ...] | None = None) -> tuple[MlpSpec, int]:
    """Symmetric widths ``d, *hidden, latent, *reversed(hidden), d``.

    Hidden layers use ReLU; the latent code and the reconstruction are linear.
    Without explicit ``hidden`` a single layer halfway between d and latent is used.
    """
    if hidden is None:
        hidden = (max(latent, (d + latent + 1) // 2),)
    enc = (d, *hidden, latent)
    widths = enc + tuple(reversed(enc[:-1]))
    n_enc = len(enc) - 1
    return MlpSpec.relu_net(widths, linear_at=(n_enc - 1,)), n_enc


def _as_matrix(data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeError("expected a matrix of instances")
    return x


def mse_loss(recon: ad.Var, target: ad.Var) -> ad.Var:
    diff = recon - target
    return ad.mean(diff * diff)


def init_scd(d: int, config: RunConfig, rng: np.random.Generator, history=None) -> AutoencoderModel:
    if config.latent_dim is not None:
        latent = config.latent_dim
    elif history is not None and len(history) >= 2:
        latent = pca_latent_dim(history, config.explained)
    else:
        latent = max(1, d // 2)
    spec, n_enc = autoencoder_spec(d, latent, config.hidden)
    return AutoencoderModel(spec, init_params(spec, rng), n_enc)


def train_scd(history, config: RunConfig, rng: np.random.Generator | None = None,
              init: AutoencoderModel | None = None, epochs: int | None = None) -> AutoencoderModel:
    """Fit the autoencoder on ``history`` (rows are instances).

    ``init`` warm-starts from an existing model; otherwise the latent size comes
    from PCA (``config.explained``) unless ``config.latent_dim`` is set.
    """
    x = _as_matrix(history)
    if x.shape[0] == 0:
        raise ContractError("history is empty")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    model = init if init is not None else init_scd(x.shape[1], config, rng, x)
    if model.input_dim != x.shape[1]:
        raise ShapeError(f"history has {x.shape[1]} features, model expects {model.input_dim}")
    arrays = model.params.arrays()
    spec = model.spec

    def batch_loss(tape, leaves, idx):
        xb = tape.constant(x[idx])
        pairs = list(zip(leaves[0::2], leaves[1::2]))
        return mse_loss(tape_forward(pairs, spec, xb), xb)

    fit(arrays, batch_loss, len(x), epochs=config.epochs if epochs is None else epochs,
        lr=config.lr, decay=config.decay, batch_size=config.batch_size, rng=rng,
        patience=config.patience, tol=config.tol)
    return model.with_params(ParameterSet.from_arrays(arrays))


def reconstruct(model: AutoencoderModel, x) -> np.ndarray:
    """``D_s(E_s(x))`` for one vector or a batch."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != model.input_dim:
        raise ShapeError(f"expected {model.input_dim} features, got {arr.shape[-1]}")
    out = mlp_forward(model.params, model.spec, _as_matrix(arr))
    return out[0] if arr.ndim == 1 else out


def reconstruction_errors(model: AutoencoderModel, x) -> np.ndarray:
    """Per-row mean squared reconstruction error."""
    xm = _as_matrix(x)
    diff = xm - reconstruct(model, xm)
    return np.mean(diff * diff, axis=1)


def score(model: AutoencoderModel, x) -> AnomalyScore:
    return AnomalyScore(float(reconstruction_errors(model, x)[0]), ScoreSource.STATIC)
