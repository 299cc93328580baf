"""Symmetric eigendecomposition and the trailing-eigenvector embedding.

The k eigenvectors belonging to the k smallest eigenvalues of the graph
Laplacian minimize Tr(H' L H) over orthonormal N x k frames H, so their
rows are the natural low-dimensional embedding of the meters. Eigenvector
signs are fixed deterministically: each vector is flipped, if needed, so
its largest-magnitude entry (lowest index on ties) is positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError


@dataclass
class EigenDecomposition:
    eigenvalues: np.ndarray     # (N,) ascending
    eigenvectors: np.ndarray    # (N, N) columns, orthonormal, sign-fixed


@dataclass
class SpectralEmbedding:
    X: np.ndarray               # (N, k) rows are meter embeddings
    eigenvalues: np.ndarray     # (k,) the k smallest
    next_eigenvalue: float      # eigenvalue k+1, for gap diagnostics


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|entry| (first on ties) is positive."""
    v = vectors.copy()
    idx = np.abs(v).argmax(axis=0)
    flip = v[idx, np.arange(v.shape[1])] < 0
    v[:, flip] *= -1.0
    return v


def eigendecompose(matrix: np.ndarray) -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix, ascending eigenvalues."""
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    if np.max(np.abs(a - a.T)) > 1e-10 * max(1.0, np.abs(a).max()):
        raise InputError("matrix must be symmetric")
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise NumericalError("eigendecomposition produced non-finite eigenvalues")
    return EigenDecomposition(eigenvalues=w, eigenvectors=fix_signs(v))


def embed(matrix: np.ndarray, k: int) -> SpectralEmbedding:
    """Embedding from the k smallest-eigenvalue eigenvectors (signed spectrum)."""
    n = np.asarray(matrix).shape[0]
    if not 1 <= k < n:
        raise InputError(f"k must satisfy 1 <= k < N, got k={k}, N={n}")
    dec = eigendecompose(matrix)
    return SpectralEmbedding(
        X=dec.eigenvectors[:, :k].copy(),
        eigenvalues=dec.eigenvalues[:k].copy(),
        next_eigenvalue=float(dec.eigenvalues[k]),
    )


def trace_objective(matrix: np.ndarray, h: np.ndarray) -> float:
    """Tr(H' A H), the quantity the embedding minimizes over orthonormal H."""
    return float(np.trace(h.T @ matrix @ h))
