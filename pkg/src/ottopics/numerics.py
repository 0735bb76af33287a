"""Dense numeric kernels used throughout the package.

Everything here operates on double-precision numpy arrays. Embedding
matrices follow the column convention: a ``D x m`` array holds ``m``
embeddings of dimension ``D``, one per column.

``finite_diff_grad`` is the gradient oracle: every analytic gradient in
the package is required to agree with it to a relative error below 1e-4.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NumericError, ShapeError

GRAD_RTOL = 1e-4


def softmax(v: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis (max-subtraction applied)."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NumericError("softmax input contains non-finite values")
    shifted = v - np.max(v, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def softplus(v: np.ndarray) -> np.ndarray:
    """Elementwise ln(1 + e^v), stable for large |v|."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise NumericError("softplus input contains non-finite values")
    # For v > 0 use v + ln(1 + e^-v) so large inputs pass through unchanged.
    return np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))


def pairwise_sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the columns of A (D x m) and B (D x n).

    Computed from the explicit differences rather than the expanded
    norm identity, which avoids catastrophic cancellation; round-off
    negatives are clamped to zero.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError("pairwise_sqdist expects 2-d arrays")
    if A.shape[0] != B.shape[0]:
        raise ShapeError(
            f"embedding dimensions differ: {A.shape[0]} vs {B.shape[0]}"
        )
    diff = A[:, :, None] - B[:, None, :]
    out = np.einsum("dmn,dmn->mn", diff, diff)
    return np.maximum(out, 0.0)


def finite_diff_grad(
    loss: Callable[[np.ndarray], float],
    params: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """Central finite differences of ``loss`` at ``params``.

    Gradient oracle for certifying analytic gradients. Raises if any
    evaluation comes back non-finite, naming the coordinate.
    """
    if h <= 0:
        raise ValueError("step size h must be positive")
    params = np.asarray(params, dtype=np.float64)
    grad = np.empty_like(params)
    flat = params.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss(params)
        flat[i] = orig - h
        down = loss(params)
        flat[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericError(
                f"finite_diff_grad: non-finite loss at coordinate {i}"
            )
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_grad_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Norm-based relative error between a gradient and its oracle value."""
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    reference = np.asarray(reference, dtype=np.float64).ravel()
    denom = max(float(np.linalg.norm(reference)), 1e-12)
    return float(np.linalg.norm(analytic - reference)) / denom


def save_matrix_txt(path, matrix: np.ndarray) -> None:
    """Dump a matrix as text: `rows cols` header, 17 significant digits."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix_txt(path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix_txt`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        rows, cols = int(header[0]), int(header[1])
        data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
    if data.shape != (rows, cols):
        raise ShapeError(
            f"matrix file {path} promised {rows}x{cols}, found {data.shape}"
        )
    return data
