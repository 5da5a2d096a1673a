"""Symmetric eigendecomposition by cyclic Jacobi rotations, and PCA sizing."""

from __future__ import annotations

import numpy as np

from hyperdrift.errors import ContractError


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Eigenvalues and eigenvectors of a symmetric matrix.

    Cyclic-by-row Jacobi: every off-diagonal pair is annihilated once per sweep
    until the off-diagonal Frobenius norm falls below ``tol`` times the total
    norm. Returns ``(eigenvalues, Q)`` sorted by descending eigenvalue with the
    eigenvectors in the columns of ``Q``.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError("jacobi_eigh needs a square matrix")
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    q = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), q
    off_diag = ~np.eye(n, dtype=bool)
    for _ in range(max_sweeps):
        # summed directly: ||A||^2 - ||diag||^2 cancels to noise near convergence
        off = np.sqrt(np.sum(a[off_diag] ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apr = a[p, r]
                if apr == 0.0:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apr)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, r) Givens rotation
                ap = a[:, p].copy()
                ar = a[:, r].copy()
                a[:, p] = c * ap - s * ar
                a[:, r] = s * ap + c * ar
                ap = a[p, :].copy()
                ar = a[r, :].copy()
                a[p, :] = c * ap - s * ar
                a[r, :] = s * ap + c * ar
                a[p, r] = a[r, p] = 0.0
                qp = q[:, p].copy()
                qr = q[:, r].copy()
                q[:, p] = c * qp - s * qr
                q[:, r] = s * qp + c * qr
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], q[:, order]


def covariance(data) -> np.ndarray:
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ContractError("covariance needs at least 2 samples")
    centered = x - x.mean(axis=0)
    return centered.T @ centered / (x.shape[0] - 1)


def pca_latent_dim(data, explained: float = 0.7) -> int:
    """Smallest k whose top-k covariance eigenvalues reach ``explained`` of the total."""
    if not 0.0 < explained <= 1.0:
        raise ContractError("explained must lie in (0, 1]")
    vals, _ = jacobi_eigh(covariance(data))
    vals = np.clip(vals, 0.0, None)
    total = vals.sum()
    if total <= 0.0:
        return 1
    eps = 1e-12 * total
    if explained >= 1.0:
        return max(1, int(np.sum(vals > eps)))
    cum = np.cumsum(vals)
    return int(np.searchsorted(cum, explained * total - eps) + 1)
