"""Numerical substrate: autodiff tape, MLPs, special functions, PCA, Adam."""

from hyperdrift.core.autodiff import Tape, Var, backward
from hyperdrift.core.mlp import (
    Activation,
    MlpSpec,
    ParameterSet,
    init_params,
    mlp_forward,
)
from hyperdrift.core.optim import Adam, EarlyStopping
from hyperdrift.core.pca import jacobi_eigh, pca_latent_dim
from hyperdrift.core.special import digamma

__all__ = [
    "Activation",
    "Adam",
    "EarlyStopping",
    "MlpSpec",
    "ParameterSet",
    "Tape",
    "Var",
    "backward",
    "digamma",
    "init_params",
    "jacobi_eigh",
    "mlp_forward",
    "pca_latent_dim",
]
