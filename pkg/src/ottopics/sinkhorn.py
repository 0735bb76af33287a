"""Entropic optimal transport via Sinkhorn matrix scaling.

Solves, for a nonnegative cost matrix ``C`` (V x K) and marginals
``row_weights`` (length V) and ``col_weights`` (length K):

    min_pi  sum_jk C_jk pi_jk + epsilon * sum_jk pi_jk (log pi_jk - 1)
    s.t.    pi @ 1 = row_weights,  pi.T @ 1 = col_weights,  pi >= 0

by alternating the diagonal scalings ``a = row_weights / (M b)`` and
``b = col_weights / (M.T a)`` with ``M = exp(-C/epsilon)``, starting from
``b = 1``. Iteration stops when the L1 deviation of the column marginals
drops below the stop tolerance (or the iteration cap is hit); the final
update is always the ``a`` update, so the returned plan satisfies the row
marginals to machine precision while the column error is reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ShapeError, StabilityError, ValidationError
from .numerics import save_matrix_txt

# Floor applied to scaling denominators so a fully converged but very
# sparse kernel never divides by an exact zero.
_DENOM_FLOOR = 1e-300

_WEIGHT_SUM_TOL = 1e-12


@dataclass
class SinkhornConfig:
    """Iteration controls. Defaults: 1000 iterations, 0.005 tolerance, epsilon 0.05."""

    max_iterations: int = 1000
    stop_tolerance: float = 0.005
    epsilon: float = 0.05

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ValidationError("max_iterations must be positive")
        if self.stop_tolerance <= 0:
            raise ValidationError("stop_tolerance must be positive")
        if self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")


@dataclass
class OtProblem:
    """A discrete transport problem: cost matrix plus the two marginals.

    ``epsilon`` may be left as None, in which case the solver takes the
    entropic weight from its :class:`SinkhornConfig`.
    """

    cost: np.ndarray
    row_weights: np.ndarray
    col_weights: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=np.float64)
        self.row_weights = np.asarray(self.row_weights, dtype=np.float64)
        self.col_weights = np.asarray(self.col_weights, dtype=np.float64)
        if self.cost.ndim != 2 or self.cost.size == 0:
            raise ShapeError("cost must be a nonempty 2-d matrix")
        v, k = self.cost.shape
        if self.row_weights.shape != (v,) or self.col_weights.shape != (k,):
            raise ShapeError(
                f"marginals must have shapes ({v},) and ({k},), got "
                f"{self.row_weights.shape} and {self.col_weights.shape}"
            )
        if not np.all(np.isfinite(self.cost)):
            raise NumericError("cost matrix contains non-finite values")
        if np.any(self.cost < 0):
            raise ValidationError("cost matrix must be nonnegative")
        for name, w in (("row_weights", self.row_weights),
                        ("col_weights", self.col_weights)):
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValidationError(f"{name} must be strictly positive")
            if abs(float(w.sum()) - 1.0) > _WEIGHT_SUM_TOL:
                raise ValidationError(f"{name} must sum to 1")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ValidationError("epsilon must be positive")


def uniform_marginals(v: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform row weights 1/V and uniform column weights 1/K."""
    return np.full(v, 1.0 / v), np.full(k, 1.0 / k)


@dataclass
class TransportPlan:
    """Result of a solve: the plan and how feasible it came out."""

    plan: np.ndarray
    iterations_used: int
    marginal_error: float

    def dump(self, path) -> None:
        """Write the plan in the shared matrix text format."""
        save_matrix_txt(path, self.plan)


def _stabilized_cost(cost: np.ndarray) -> np.ndarray:
    """Shift the cost so the scaling kernel stays representable.

    Subtracting per-row then per-column minima leaves the optimizer of
    the transport problem unchanged (under fixed marginals the
    objective only shifts by a constant) and guarantees a zero in every
    row and every column, so ``exp(-C/eps)`` keeps a 1.0 entry per row
    and per column and never degenerates to an all-zero row or column,
    whatever the cost scale. Entries far above a row's minimum may
    still underflow to exactly zero, which is harmless: their plan mass
    is far below double precision anyway.
    """
    adj = cost - cost.min(axis=1, keepdims=True)
    adj -= adj.min(axis=0, keepdims=True)
    return adj


def solve(problem: OtProblem, cfg: SinkhornConfig | None = None) -> TransportPlan:
    """Run Sinkhorn scaling until the column marginals are feasible."""
    if cfg is None:
        cfg = SinkhornConfig()
    epsilon = problem.epsilon if problem.epsilon is not None else cfg.epsilon

    r = problem.row_weights
    s = problem.col_weights
    kernel = np.exp(-_stabilized_cost(problem.cost) / epsilon)

    b = np.ones_like(s)
    iterations = 0
    while True:
        a = r / np.maximum(kernel @ b, _DENOM_FLOOR)
        iterations += 1
        col_sums = b * (kernel.T @ a)
        error = float(np.abs(col_sums - s).sum())
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise StabilityError(
                "Sinkhorn scaling produced non-finite values; "
                "increase epsilon"
            )
        if error <= cfg.stop_tolerance or iterations >= cfg.max_iterations:
            break
        b = s / np.maximum(kernel.T @ a, _DENOM_FLOOR)

    plan = a[:, None] * kernel * b[None, :]
    return TransportPlan(plan=plan, iterations_used=iterations,
                         marginal_error=error)


def plan_row_entropy(plan: TransportPlan | np.ndarray) -> np.ndarray:
    """Shannon entropy of each row of the row-normalized plan (0 log 0 = 0).

    Smaller values mean sparser assignments; this is the diagnostic used
    to compare plans solved at different entropic weights.
    """
    p = plan.plan if isinstance(plan, TransportPlan) else np.asarray(plan)
    row_sums = p.sum(axis=1, keepdims=True)
    normalized = p / np.maximum(row_sums, _DENOM_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(normalized > 0, normalized * np.log(normalized), 0.0)
    return -terms.sum(axis=1)
