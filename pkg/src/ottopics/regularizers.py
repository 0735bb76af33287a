"""Clustering regularizers over word and topic embeddings.

All three losses score the same quantity, the total squared distance
between word embeddings (columns of ``W``, D x V) and topic embeddings
(columns of ``T``, D x K) weighted by clustering soft-assignments; they
differ in how the assignments are produced:

* ``ecr_loss``: assignments are the entropic optimal transport plan
  between the uniform word measure and preset cluster-size proportions.
  The plan is treated as a constant when differentiating, so the
  gradients are those of the plan-weighted distance sum.
* ``dkm_loss``: assignments are a per-word softmax over negative
  distances; gradients flow through both distances and assignments.
* ``dkm_entropy_loss``: DKM plus a weighted entropy penalty on the
  assignments, sharpening them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .numerics import pairwise_sqdist
from .sinkhorn import OtProblem, SinkhornConfig, solve


@dataclass
class ClusterSizeSpec:
    """Target cluster-size proportions, a strictly positive probability vector."""

    proportions: np.ndarray

    def __post_init__(self):
        self.proportions = np.asarray(self.proportions, dtype=np.float64)
        if self.proportions.ndim != 1 or self.proportions.size == 0:
            raise ShapeError("proportions must be a nonempty vector")
        if np.any(self.proportions <= 0):
            raise ValidationError("cluster proportions must be positive")
        if abs(float(self.proportions.sum()) - 1.0) > 1e-12:
            raise ValidationError("cluster proportions must sum to 1")

    @classmethod
    def uniform(cls, k: int) -> "ClusterSizeSpec":
        return cls(np.full(k, 1.0 / k))


@dataclass
class RegularizerOutput:
    """Loss value with gradients for both embedding matrices."""

    loss: float
    grad_W: np.ndarray
    grad_T: np.ndarray
    # Populated by ecr_loss only; used for training telemetry.
    plan: np.ndarray | None = None
    marginal_error: float = 0.0


def _check_embeddings(W: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    W = np.asarray(W, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    if W.ndim != 2 or T.ndim != 2 or W.shape[0] != T.shape[0]:
        raise ShapeError("W and T must be 2-d with a shared embedding dimension")
    return W, T


def _distance_weighted_grads(
    W: np.ndarray, T: np.ndarray, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sum_jk ||w_j - t_k||^2 weights_jk w.r.t. W and T."""
    grad_W = 2.0 * (W * weights.sum(axis=1)[None, :] - T @ weights.T)
    grad_T = 2.0 * (T * weights.sum(axis=0)[None, :] - W @ weights)
    return grad_W, grad_T


def ecr_loss(
    W: np.ndarray,
    T: np.ndarray,
    sizes: ClusterSizeSpec | None = None,
    cfg: SinkhornConfig | None = None,
) -> RegularizerOutput:
    """Transport-plan weighted distance sum between words and topics.

    Solves the entropic transport problem on the current distances, then
    scores ``sum_jk ||w_j - t_k||^2 pi_jk``. Because the plan's column
    marginals equal the preset proportions, every topic keeps a
    nonempty share of words. Gradients hold the plan fixed.
    """
    W, T = _check_embeddings(W, T)
    v, k = W.shape[1], T.shape[1]
    if k < 2 or v < k:
        raise ValidationError(f"need K >= 2 and V >= K, got V={v}, K={k}")
    if sizes is None:
        sizes = ClusterSizeSpec.uniform(k)
    if cfg is None:
        cfg = SinkhornConfig()

    cost = pairwise_sqdist(W, T)
    row_weights = np.full(v, 1.0 / v)
    result = solve(OtProblem(cost, row_weights, sizes.proportions), cfg)
    plan = result.plan

    loss = float((cost * plan).sum())
    grad_W, grad_T = _distance_weighted_grads(W, T, plan)
    return RegularizerOutput(loss=loss, grad_W=grad_W, grad_T=grad_T,
                             plan=plan, marginal_error=result.marginal_error)


def dkm_assignments(W: np.ndarray, T: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Per-word softmax of negative squared distances at temperature tau."""
    W, T = _check_embeddings(W, T)
    if tau <= 0:
        raise ValidationError("tau must be positive")
    logits = -pairwise_sqdist(W, T) / tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _assignment_log_probs(
    W: np.ndarray, T: np.ndarray, tau: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Distances, assignments, and their logs (computed stably together)."""
    cost = pairwise_sqdist(W, T)
    logits = -cost / tau
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_p = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return cost, np.exp(log_p), log_p


def dkm_loss(W: np.ndarray, T: np.ndarray, tau: float = 1.0) -> RegularizerOutput:
    """Softmax-assignment weighted distance sum, fully differentiated.

    The gradient flows through the assignments as well: with per-row
    weighted distance L_j, the sensitivity of the loss to a distance is
    ``p_jk (1 - (C_jk - L_j)/tau)``.
    """
    W, T = _check_embeddings(W, T)
    if tau <= 0:
        raise ValidationError("tau must be positive")
    cost, p, _ = _assignment_log_probs(W, T, tau)

    row_loss = (cost * p).sum(axis=1, keepdims=True)
    loss = float(row_loss.sum())
    sensitivity = p * (1.0 - (cost - row_loss) / tau)
    grad_W, grad_T = _distance_weighted_grads(W, T, sensitivity)
    return RegularizerOutput(loss=loss, grad_W=grad_W, grad_T=grad_T)


def dkm_entropy_loss(
    W: np.ndarray,
    T: np.ndarray,
    tau: float = 1.0,
    entropy_weight: float = 1.0,
) -> RegularizerOutput:
    """DKM loss plus a penalty on the entropy of the soft-assignments."""
    W, T = _check_embeddings(W, T)
    if tau <= 0:
        raise ValidationError("tau must be positive")
    if entropy_weight < 0:
        raise ValidationError("entropy_weight must be nonnegative")
    cost, p, log_p = _assignment_log_probs(W, T, tau)

    row_loss = (cost * p).sum(axis=1, keepdims=True)
    # Assignments underflow to exact zeros for very distant pairs; both
    # 0 log 0 and the matching gradient terms are 0 in the limit.
    with np.errstate(invalid="ignore"):
        plogp = np.where(p > 0, p * log_p, 0.0)
    row_entropy = -plogp.sum(axis=1, keepdims=True)
    loss = float(row_loss.sum() + entropy_weight * row_entropy.sum())

    sensitivity = p * (1.0 - (cost - row_loss) / tau)
    # d(entropy)/dC_jk = (p_jk / tau) (log p_jk + H_j); the p=0 limit is 0.
    with np.errstate(invalid="ignore"):
        entropy_sens = np.where(
            p > 0, (entropy_weight / tau) * p * (log_p + row_entropy), 0.0
        )
    grad_W, grad_T = _distance_weighted_grads(W, T, sensitivity + entropy_sens)
    return RegularizerOutput(loss=loss, grad_W=grad_W, grad_T=grad_T)
