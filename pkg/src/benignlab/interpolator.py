"""Minimum-norm interpolation theta_hat = X^T (X X^T)^{-1} y."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DimensionMismatch, GramSingular

DEFAULT_RCOND = 1e-10


def gram(X) -> np.ndarray:
    """X X^T, symmetrised to remove roundoff asymmetry."""
    X = np.asarray(getattr(X, "X", X))
    G = X @ X.T
    return (G + G.T) / 2


def gram_extremes(G: np.ndarray) -> tuple[float, float]:
    eig = linalg.eigvalsh(G)
    return float(eig[0]), float(eig[-1])


class GramSolver:
    """Cholesky factorisation of X X^T, checked against ``rcond``.

    Raises GramSingular when mu_n(G) < rcond * mu_1(G).
    """

    def __init__(self, X, rcond: float = DEFAULT_RCOND):
        self.X = np.asarray(getattr(X, "X", X))
        self.G = gram(self.X)
        self.min_eig, self.max_eig = gram_extremes(self.G)
        if not self.min_eig >= rcond * self.max_eig or self.max_eig <= 0:
            raise GramSingular(self.min_eig, self.max_eig, rcond)
        self.factor = linalg.cho_factor(self.G, lower=True)

    def solve(self, B: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self.factor, B)

    def fit(self, y: np.ndarray) -> np.ndarray:
        return self.X.T @ self.solve(y)


@dataclass
class FitResult:
    theta_hat: np.ndarray
    gram_min_eig: float
    gram_max_eig: float
    interpolation_residual: float
    degenerate: bool = False


def min_norm_fit(X, y, rcond: float = DEFAULT_RCOND, allow_degenerate: bool = False) -> FitResult:
    """Minimum-norm interpolant via the n x n Gram system.

    With ``allow_degenerate`` a singular Gram matrix falls back to the SVD
    pseudoinverse (the general minimum-norm least-squares solution) and the
    result is flagged ``degenerate``.
    """
    X = np.asarray(getattr(X, "X", X))
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    try:
        solver = GramSolver(X, rcond)
    except GramSingular as exc:
        if not allow_degenerate:
            raise
        theta = pinv_min_norm(X, y)
        resid = float(np.max(np.abs(X @ theta - y)))
        return FitResult(theta, exc.min_eig, exc.max_eig, resid, degenerate=True)
    theta = solver.fit(y)
    resid = float(np.max(np.abs(X @ theta - y))) if len(y) else 0.0
    return FitResult(theta, solver.min_eig, solver.max_eig, resid)


def pinv_min_norm(X, y) -> np.ndarray:
    """theta = X^+ y via a full SVD."""
    U, s, Vt = np.linalg.svd(np.asarray(X), full_matrices=False)
    cutoff = s[0] * max(X.shape) * np.finfo(np.float64).eps if len(s) else 0.0
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
    return Vt.T @ (inv * (U.T @ y))
