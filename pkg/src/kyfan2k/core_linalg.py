"""Dense matrices, SVD, and affine measurement operators.

A measurement operator collects ``s`` sensing matrices ``A_1..A_s`` (all
``m x n``) together with a right-hand side ``b`` and realizes the linear
map ``A(X)_i = <A_i, X>`` (Frobenius inner products), its adjoint
``A*(y) = sum_i y_i A_i``, and the exact Euclidean projection onto the
affine set ``{X : A(X) = b}`` through a cached Cholesky factorization of
the s x s Gram matrix ``G_ij = <A_i, A_j>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class OperatorDegenerateError(ValueError):
    """Raised when the sensing matrices fail to span R^s (singular Gram)."""


def as_matrix(X, name: str = "matrix") -> np.ndarray:
    """Validate and return a finite 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D array with positive dimensions, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


@dataclass(frozen=True)
class Svd:
    """Thin singular value decomposition ``U @ diag(sigma) @ V.T``.

    ``U`` is m x q, ``V`` is n x q with orthonormal columns, ``sigma`` is
    length q = min(m, n), non-negative and sorted non-increasing.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def svd(X) -> Svd:
    """Thin SVD of a dense matrix with sorted singular values."""
    X = as_matrix(X)
    U, s, Vh = np.linalg.svd(X, full_matrices=False)
    return Svd(U=U, sigma=s, V=Vh.T)


def singular_values(X) -> np.ndarray:
    X = as_matrix(X)
    return np.linalg.svd(X, compute_uv=False)


class MeasurementOperator:
    """Affine measurement map built from dense sensing matrices.

    Parameters
    ----------
    sensing : array_like, shape (s, m, n)
        The sensing matrices A_1..A_s.
    rhs : array_like, shape (s,)
        Right-hand side b, must be nonzero.
    max_condition : float
        Construction aborts if the Gram matrix condition number estimate
        exceeds this value; Gaussian sensing makes G well conditioned, so
        degeneracy signals a caller bug.

    The Gram factorization is built eagerly; instances are immutable after
    construction and safe for concurrent use.
    """

    def __init__(self, sensing, rhs, *, max_condition: float = 1e12):
        sensing = np.asarray(sensing, dtype=float)
        if sensing.ndim != 3 or sensing.shape[0] < 1:
            raise ValueError(f"sensing must have shape (s, m, n), got {sensing.shape}")
        if not np.all(np.isfinite(sensing)):
            raise ValueError("sensing matrices contain non-finite entries")
        rhs = np.asarray(rhs, dtype=float).ravel()
        if rhs.shape[0] != sensing.shape[0]:
            raise ValueError(f"rhs length {rhs.shape[0]} does not match s={sensing.shape[0]}")
        if not np.all(np.isfinite(rhs)):
            raise ValueError("rhs contains non-finite entries")
        if not np.any(rhs):
            raise ValueError("rhs must be nonzero")

        self.sensing = sensing
        self.rhs = rhs
        self.s, self.m, self.n = sensing.shape
        self._flat = np.ascontiguousarray(sensing.reshape(self.s, self.m * self.n))

        gram = self._flat @ self._flat.T
        eigs = np.linalg.eigvalsh(gram)
        if eigs[0] <= 0.0 or eigs[-1] / eigs[0] > max_condition:
            cond = np.inf if eigs[0] <= 0.0 else eigs[-1] / eigs[0]
            raise OperatorDegenerateError(
                f"Gram matrix is rank deficient or ill conditioned (cond~{cond:.3e}); "
                "the sensing matrices must be linearly independent"
            )
        self.gram = gram
        self._cho = cho_factor(gram, lower=True)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    def apply(self, X) -> np.ndarray:
        """Forward map: vector of Frobenius pairings <A_i, X>."""
        X = np.asarray(X, dtype=float)
        if X.shape != (self.m, self.n):
            raise ValueError(f"X has shape {X.shape}, expected {(self.m, self.n)}")
        return self._flat @ X.ravel()

    def adjoint(self, y) -> np.ndarray:
        """Adjoint map: sum_i y_i A_i."""
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != self.s:
            raise ValueError(f"y has length {y.shape[0]}, expected s={self.s}")
        return (self._flat.T @ y).reshape(self.m, self.n)

    def solve_gram(self, v) -> np.ndarray:
        """Solve G @ y = v with the cached Cholesky factorization."""
        v = np.asarray(v, dtype=float).ravel()
        if v.shape[0] != self.s:
            raise ValueError(f"v has length {v.shape[0]}, expected s={self.s}")
        return cho_solve(self._cho, v)

    def project_affine(self, X) -> np.ndarray:
        """Frobenius-nearest point of {Z : A(Z) = b}.

        Returns X - A*(y) with G y = A(X) - b, so the result satisfies the
        measurements up to the Gram solve accuracy.
        """
        y = self.solve_gram(self.apply(X) - self.rhs)
        return X - self.adjoint(y)

    def project_nullspace(self, X) -> np.ndarray:
        """Orthogonal projection onto the null space {Z : A(Z) = 0}."""
        y = self.solve_gram(self.apply(X))
        return X - self.adjoint(y)

    def residual(self, X) -> float:
        """Worst-case measurement violation max_i |<A_i, X> - b_i|."""
        return float(np.max(np.abs(self.apply(X) - self.rhs)))

    def least_squares_multiplier(self, T) -> np.ndarray:
        """y minimizing ||A*(y) - T||_F, via the normal equations G y = A(T)."""
        return self.solve_gram(self.apply(np.asarray(T, dtype=float)))
