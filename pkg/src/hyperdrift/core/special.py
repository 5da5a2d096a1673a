"""Special functions used on inference paths (not differentiated)."""

from __future__ import annotations

import numpy as np

from hyperdrift.errors import DomainError

_SHIFT = 10.0
# Bernoulli-number coefficients B_2k / (2k) of the asymptotic expansion.
_ASYMPTOTIC = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
)


def digamma(x):
    """Digamma function psi(x) for x > 0.

    Uses the upward recurrence psi(x) = psi(x + 1) - 1/x until x >= 10 and then
    the asymptotic series. Accepts scalars or arrays; returns the same kind.
    """
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("digamma is only defined here for finite x > 0")
    z = arr.copy()
    acc = np.zeros_like(z)
    small = z < _SHIFT
    while np.any(small):
        acc[small] -= 1.0 / z[small]
        z[small] += 1.0
        small = z < _SHIFT
    inv2 = 1.0 / (z * z)
    series = np.zeros_like(z)
    for coef in reversed(_ASYMPTOTIC):
        series = (series + coef) * inv2
    out = acc + np.log(z) - 0.5 / z - series
    if np.ndim(x) == 0:
        return float(out)
    return out
