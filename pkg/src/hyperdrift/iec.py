"""Evolution controller: an evidential classifier over {normal, anomalous}.

Evidence is ``alpha = exp(logits)``; the spread of the resulting Dirichlet
(its mutual information) is the concept uncertainty that decides whether an
instance is scored by the static or the dynamic detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from hyperdrift.config import RunConfig
from hyperdrift.core import autodiff as ad
from hyperdrift.core.mlp import (
    Activation, MlpSpec, ParameterSet, init_params, mlp_forward, tape_forward,
)
from hyperdrift.core.special import digamma
from hyperdrift.core.train import fit
from hyperdrift.errors import ContractError, DomainError, ShapeError, TrainingError
from hyperdrift.scd import AutoencoderModel, reconstruction_errors

N_CLASSES = 2
LOGIT_CLAMP = 30.0


class PseudoLabel(IntEnum):
    UNKNOWN = -1
    NEGATIVE = 0  # well reconstructed, normal
    POSITIVE = 1  # poorly reconstructed, anomalous


@dataclass(frozen=True)
class DirichletOpinion:
    alpha: np.ndarray
    prob: np.ndarray
    uncertainty: float

    @property
    def n_classes(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True)
class ControllerModel:
    spec: MlpSpec
    params: ParameterSet

    def __post_init__(self):
        if self.spec.widths[-1] != N_CLASSES:
            raise ShapeError("controller output width must equal the class count")

    @property
    def input_dim(self) -> int:
        return self.spec.widths[0]

    def with_params(self, params: ParameterSet) -> "ControllerModel":
        return ControllerModel(self.spec, params)


def init_iec(d: int, hidden: int, rng: np.random.Generator) -> ControllerModel:
    spec = MlpSpec.relu_net((d, hidden, hidden, N_CLASSES))
    return ControllerModel(spec, init_params(spec, rng))


def evidence(model: ControllerModel, x) -> np.ndarray:
    """Dirichlet parameters ``exp(clip(f(x)))``, shape ``(B, C)`` or ``(C,)``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape[-1] != model.input_dim:
        raise ShapeError(f"expected {model.input_dim} features, got {arr.shape[-1]}")
    logits = mlp_forward(model.params, model.spec, np.atleast_2d(arr))
    alpha = np.exp(np.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP))
    return alpha[0] if arr.ndim == 1 else alpha


def expected_probability(alpha) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64)
    return a / a.sum(axis=-1, keepdims=True)


def concept_uncertainty(alpha):
    """Mutual information of the Dirichlet opinion, along the last axis.

    ``sum_c p_c (psi(a_c + 1) - psi(S + 1)) - sum_c p_c log p_c`` with
    ``S = sum(a)`` and ``p = a / S``.
    """
    a = np.asarray(alpha, dtype=np.float64)
    if np.any(~(a > 0)):
        raise DomainError("Dirichlet parameters must be positive")
    s = a.sum(axis=-1, keepdims=True)
    p = a / s
    expected_log = np.sum(p * (digamma(a + 1.0) - digamma(s + 1.0)), axis=-1)
    entropy = -np.sum(p * np.log(p), axis=-1)
    u = expected_log + entropy
    # clamp tiny negative rounding residue; the exact value is >= 0
    u = np.maximum(u, 0.0)
    return float(u) if u.ndim == 0 else u


def opinion(model: ControllerModel, x) -> DirichletOpinion:
    alpha = evidence(model, np.asarray(x, dtype=np.float64).reshape(-1))
    return DirichletOpinion(alpha, expected_probability(alpha), concept_uncertainty(alpha))


def uncertainties(model: ControllerModel | None, x) -> np.ndarray:
    """Concept uncertainty per row; zeros when no controller exists yet."""
    xm = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if model is None:
        return np.zeros(len(xm))
    return concept_uncertainty(evidence(model, xm))


def mu_p_to_threshold(errors, mu_p: float) -> float:
    """Nearest-rank (1 - mu_p) quantile of the errors.

    Errors strictly above the returned value are the top ``mu_p`` fraction.
    """
    e = np.sort(np.asarray(errors, dtype=np.float64).ravel(), kind="stable")
    if e.size == 0:
        raise ContractError("no errors to threshold")
    if not 0.0 < mu_p < 1.0:
        raise ContractError("mu_p must lie in (0, 1)")
    rank = math.ceil(round((1.0 - mu_p) * e.size, 9))
    return float(e[max(rank, 1) - 1])


def assign_labels(errors, u, threshold: float, mu_e: float) -> np.ndarray:
    """Vectorised pseudo-labelling; returns PseudoLabel integer codes."""
    errors = np.asarray(errors, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    labels = np.where(errors > threshold, PseudoLabel.POSITIVE, PseudoLabel.NEGATIVE)
    return np.where(u > mu_e, PseudoLabel.UNKNOWN, labels).astype(np.int64)


def pseudo_label(scd_model: AutoencoderModel, iec_model: ControllerModel | None, x,
                 threshold: float, mu_e: float) -> PseudoLabel:
    if threshold <= 0 or mu_e <= 0:
        raise ContractError("thresholds must be positive")
    err = reconstruction_errors(scd_model, x)
    u = uncertainties(iec_model, x)
    return PseudoLabel(int(assign_labels(err, u, threshold, mu_e)[0]))


def evidential_loss(logits: ad.Var, onehot: np.ndarray) -> ad.Var:
    """Mean over rows of ``log(sum_k alpha_k) - log(alpha_true)`` with ``alpha = exp(logits)``."""
    tape = logits.tape
    clipped = ad.clip(logits, -LOGIT_CLAMP, LOGIT_CLAMP)
    log_total = ad.log(ad.sum_(ad.exp(clipped), axis=1))
    log_true = ad.sum_(clipped * tape.constant(onehot), axis=1)
    return ad.mean(log_total - log_true)


def penultimate(model: ControllerModel, x) -> np.ndarray:
    """Activations feeding the output layer, shape ``(B, hidden)``."""
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    layers = model.params.layers
    for layer, act in zip(layers[:-1], model.spec.activations[:-1]):
        h = h @ layer.weight + layer.bias
        if act is Activation.RELU:
            h = np.maximum(h, 0.0)
    return h


def evidence_rate(model: ControllerModel) -> float:
    """Per-unit evidence decay currently encoded in the shared output component."""
    w = model.params.layers[-1].weight
    half = (w[:, 1] - w[:, 0]) / 2.0
    shared = (w[:, 1] + w[:, 0]) / 2.0
    return float(np.median(-shared - np.abs(half)))


def calibrate_evidence(model: ControllerModel, x, slope: float, level: float,
                       quantile: float = 0.01, rate: float | None = None) -> ControllerModel:
    """Reset the class-shared part of the output layer.

    Adding the same amount to both logits leaves the expected probability and
    the training loss unchanged, so that component is free. It is set so every
    logit drops by at least ``slope / mean activation mass`` per unit of
    hidden activation, and so that all but ``quantile`` of ``x`` keep a
    winning logit of at least ``level``. Instances that excite the hidden layer
    far more than the calibration data lose their evidence and approach the
    maximally uncertain Dirichlet. A given ``rate`` replaces the slope-derived one.
    """
    h = penultimate(model, x)
    if h.shape[0] == 0:
        raise ContractError("calibration data is empty")
    arrays = model.params.arrays()
    w, b = arrays[-2], arrays[-1]
    half_w = (w[:, 1] - w[:, 0]) / 2.0
    half_b = (b[1] - b[0]) / 2.0
    if rate is None:
        rate = slope / max(float(h.sum(axis=1).mean()), 1e-12)
    shared = -(np.abs(half_w) + rate)
    top = h @ shared + np.abs(h @ half_w + half_b)
    shared_b = level - float(np.quantile(top, quantile))
    arrays[-2] = np.stack([shared - half_w, shared + half_w], axis=1)
    arrays[-1] = np.array([shared_b - half_b, shared_b + half_b])
    return model.with_params(ParameterSet.from_arrays(arrays))


def train_iec(scd_model: AutoencoderModel, data, config: RunConfig,
              rng: np.random.Generator | None = None, init: ControllerModel | None = None,
              epochs: int | None = None, known_labels=None,
              mu_e: float | None = None, bootstrap: bool | None = None) -> ControllerModel:
    """Fit the controller on pseudo-labels derived from the static detector.

    Labels are recomputed every epoch with the current controller; the first
    epoch of a fresh controller (or any, with ``bootstrap=True``) treats every
    uncertainty as zero. Unknown rows
    are skipped. ``known_labels`` (only used when ``config.use_true_labels``)
    forces rows with a known anomaly label of 1 to Positive.
    """
    x = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if x.shape[0] == 0 or x.size == 0:
        raise ContractError("controller training data is empty")
    rng = np.random.default_rng(config.seed) if rng is None else rng
    model = init if init is not None else init_iec(x.shape[1], config.iec_hidden, rng)
    gate = config.label_mu_e if mu_e is None else mu_e
    errors = reconstruction_errors(scd_model, x)
    threshold = mu_p_to_threshold(errors, config.mu_p)
    forced = None
    if config.use_true_labels and known_labels is not None:
        forced = np.asarray(known_labels) == 1
    arrays = model.params.arrays()
    spec = model.spec
    labels = np.zeros(len(x), dtype=np.int64)
    bootstrap = init is None if bootstrap is None else bootstrap

    def relabel(epoch: int):
        current = None if (bootstrap and epoch == 0) else model.with_params(
            ParameterSet.from_arrays(arrays))
        fresh = assign_labels(errors, uncertainties(current, x), threshold, gate)
        if forced is not None:
            fresh[forced] = PseudoLabel.POSITIVE
        pool = np.flatnonzero(fresh != PseudoLabel.UNKNOWN)
        if pool.size == 0:
            if epoch == 0:
                raise TrainingError("no confident samples to train the controller on")
            return None  # keep the previous epoch's labels
        labels[:] = fresh
        return pool

    onehot = np.zeros((len(x), N_CLASSES))

    def batch_loss(tape, leaves, idx):
        oh = onehot[idx]
        oh[:] = 0.0
        oh[np.arange(len(idx)), labels[idx]] = 1.0
        pairs = list(zip(leaves[0::2], leaves[1::2]))
        return evidential_loss(tape_forward(pairs, spec, tape.constant(x[idx])), oh)

    n_epochs = config.iec_epochs if epochs is None else epochs
    if n_epochs > 0:
        fit(arrays, batch_loss, len(x), epochs=n_epochs, lr=config.lr, decay=config.decay,
            batch_size=config.batch_size, rng=rng, patience=config.patience, tol=config.tol,
            on_epoch=relabel)
    trained = model.with_params(ParameterSet.from_arrays(arrays))
    if config.evidence_slope > 0:
        # a warm start keeps its decay rate and only re-anchors the evidence level
        rate = None if init is None else max(evidence_rate(init), 0.0)
        trained = calibrate_evidence(trained, x, config.evidence_slope, config.evidence_level,
                                     rate=rate)
    return trained
