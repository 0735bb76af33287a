"""Certification of every analytic gradient against finite differences.

Each check draws random small instances, evaluates the analytic
gradients, and compares them per parameter group with central finite
differences of the same objective. Objectives with an embedded
transport plan are differentiated with the plan held fixed, so the
finite differences probe exactly the function the analytic gradients
claim to differentiate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import init_model, total_loss
from .numerics import GRAD_RTOL, finite_diff_grad, pairwise_sqdist, relative_grad_error
from .regularizers import dkm_entropy_loss, dkm_loss, ecr_loss

# Toy sizes: big enough to exercise every code path, small enough that
# thousands of finite-difference evaluations stay fast.
_D, _V, _K, _H, _N = 4, 12, 3, 5, 2


@dataclass
class GradCheckRow:
    loss_name: str
    param_group: str
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance


def _fd_grads(loss_fn, params: dict[str, np.ndarray],
              h: float) -> dict[str, np.ndarray]:
    """Finite differences per parameter group, perturbing in place."""
    return {name: finite_diff_grad(lambda _arr: loss_fn(), arr, h)
            for name, arr in params.items()}


def _random_embeddings(rng) -> tuple[np.ndarray, np.ndarray]:
    return rng.normal(0.0, 0.7, (_D, _V)), rng.normal(0.0, 0.7, (_D, _K))


# Stable per-check stream ids; `hash()` would vary across processes.
_CHECK_IDS = {"dkm": 1, "dkm_entropy": 2, "ecr": 3, "topic_model": 4,
              "total": 5}


def _check_embedding_loss(name, analytic_fn, loss_fn_factory, points, seed,
                          h, tolerance, rows):
    worst = {"W": 0.0, "T": 0.0}
    for p in range(points):
        rng = np.random.default_rng((seed, _CHECK_IDS[name], p))
        W, T = _random_embeddings(rng)
        out = analytic_fn(W, T)
        loss_fn = loss_fn_factory(W, T, out)
        fd = _fd_grads(loss_fn, {"W": W, "T": T}, h)
        worst["W"] = max(worst["W"], relative_grad_error(out.grad_W, fd["W"]))
        worst["T"] = max(worst["T"], relative_grad_error(out.grad_T, fd["T"]))
    for group, err in worst.items():
        rows.append(GradCheckRow(name, group, err, tolerance))


def _random_model_instance(rng, lambda_ecr, regularizer) -> tuple:
    state = init_model(
        vocab_size=_V, num_topics=_K, embed_dim=_D, hidden_size=_H,
        tau=0.8, lambda_ecr=lambda_ecr, regularizer=regularizer,
        seed=int(rng.integers(2**31)))
    # Overwrite the tame defaults with wider draws so gradients are
    # exercised away from the near-zero init.
    for arr in state.param_dict().values():
        arr[...] = rng.normal(0.0, 0.5, arr.shape)
    X = rng.integers(0, 5, (_N, _V)).astype(np.float64)
    X[:, 0] += 1  # keep every document nonempty
    noise = rng.standard_normal((_N, _K))
    return state, X, noise


def run_gradcheck(points: int = 10, tolerance: float = GRAD_RTOL,
                  seed: int = 0, h: float = 1e-5) -> list[GradCheckRow]:
    """Run every gradient check; returns one row per (loss, group)."""
    rows: list[GradCheckRow] = []

    _check_embedding_loss(
        "dkm",
        lambda W, T: dkm_loss(W, T, tau=0.8),
        lambda W, T, out: (lambda: dkm_loss(W, T, tau=0.8).loss),
        points, seed, h, tolerance, rows)

    _check_embedding_loss(
        "dkm_entropy",
        lambda W, T: dkm_entropy_loss(W, T, tau=0.8, entropy_weight=0.7),
        lambda W, T, out: (
            lambda: dkm_entropy_loss(W, T, tau=0.8, entropy_weight=0.7).loss),
        points, seed, h, tolerance, rows)

    # ECR differentiates the plan-weighted distance sum with the plan
    # frozen at the evaluation point.
    _check_embedding_loss(
        "ecr",
        lambda W, T: ecr_loss(W, T),
        lambda W, T, out: (
            lambda: float((pairwise_sqdist(W, T) * out.plan).sum())),
        points, seed, h, tolerance, rows)

    for name, lam, reg in (("topic_model", 0.0, "none"),
                           ("total", 0.5, "ecr")):
        worst: dict[str, float] = {}
        for p in range(points):
            rng = np.random.default_rng((seed, _CHECK_IDS[name], p))
            state, X, noise = _random_model_instance(rng, lam, reg)
            out = total_loss(X, state, noise)
            if reg == "ecr":
                plan = ecr_loss(state.W, state.T,
                                cfg=state.sinkhorn_cfg).plan

                def loss_fn():
                    base = total_loss(X, replace(state, regularizer="none"),
                                      noise).loss
                    frozen = (pairwise_sqdist(state.W, state.T) * plan).sum()
                    return base + lam * float(frozen)
            else:
                def loss_fn():
                    return total_loss(X, state, noise).loss

            fd = _fd_grads(loss_fn, state.param_dict(), h)
            for group, g in out.grads.items():
                err = relative_grad_error(g, fd[group])
                worst[group] = max(worst.get(group, 0.0), err)
        for group, err in worst.items():
            rows.append(GradCheckRow(name, group, err, tolerance))

    return rows


def format_report(rows: list[GradCheckRow]) -> str:
    lines = []
    for row in rows:
        status = "PASS" if row.passed else "FAIL"
        lines.append(f"{status}  loss={row.loss_name:<12s} "
                     f"group={row.param_group:<14s} "
                     f"max_rel_err={row.max_rel_err:.3e} "
                     f"tol={row.tolerance:.0e}")
    failed = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - failed}/{len(rows)} gradient checks passed")
    return "\n".join(lines)
