"""Small shared linear-algebra utilities."""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_factor, cho_solve

_POWER_SEED = 12345
_DENSE_LIMIT = 400  # matrix dimension up to which the dense eigensolver is used


class DivergenceError(RuntimeError):
    """Raised when an iteration produces non-finite or unbounded values."""


def spd_solver(mat):
    """Return a solve(x) closure backed by a Cholesky factorization of ``mat``.

    The factorization is computed once; every call applies mat^-1 to a
    vector or matrix without ever forming the inverse explicitly.
    """
    factor = cho_factor(np.asarray(mat, dtype=float))

    def solve(rhs):
        return cho_solve(factor, rhs)

    return solve


def spectral_radius(mat, tol=1e-6, max_iter=10_000):
    """Spectral radius of a square matrix.

    Dense eigensolve for dimensions up to 400; power iteration with a fixed
    random seed above that (the result is only used as a scalar diagnostic).
    """
    mat = np.asarray(mat, dtype=float)
    if not np.isfinite(mat).all():
        return float("inf")
    n = mat.shape[0]
    if n <= _DENSE_LIMIT:
        return float(np.abs(np.linalg.eigvals(mat)).max())
    rng = np.random.default_rng(_POWER_SEED)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    rho = 0.0
    for _ in range(max_iter):
        y = mat @ x
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        x = y / ny
        if abs(ny - rho) <= tol * max(ny, 1.0):
            return float(ny)
        rho = ny
    return float(rho)


def neumann_sum(mat, order):
    """Truncated Neumann sum I + B + B^2 + ... + B^order for even ``order``.

    Uses the nested evaluation
    I + B + B^2 (I + B + B^2 (...)), which costs order/2 matrix products.
    """
    if order < 2 or order % 2 != 0:
        raise ValueError(f"Neumann truncation order must be even and >= 2, got {order}")
    mat = np.asarray(mat, dtype=float)
    eye = np.eye(mat.shape[0])
    sq = mat @ mat
    total = eye + mat + sq
    for _ in range(order // 2 - 1):
        total = eye + mat + sq @ total
    return total
