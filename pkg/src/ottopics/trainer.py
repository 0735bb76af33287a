"""Training loop: seeded batching, Adam updates, telemetry, checkpoints.

Every source of randomness (parameter init, epoch shuffles, latent
noise) comes from the single seed in the config, so identical inputs
always produce bit-identical final states and loss histories.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, StabilityError, ValidationError
from .model import ModelState, init_model, save_checkpoint, total_loss


@dataclass
class TrainConfig:
    epochs: int = 500
    batch_size: int = 200
    learning_rate: float = 2e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0  # 0 disables intermediate checkpoints

    def __post_init__(self):
        problems = []
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if self.batch_size < 1:
            problems.append("batch_size must be >= 1")
        if self.learning_rate <= 0:
            problems.append("learning_rate must be positive")
        if not 0 <= self.adam_beta1 < 1 or not 0 <= self.adam_beta2 < 1:
            problems.append("adam betas must lie in [0, 1)")
        if self.adam_eps <= 0:
            problems.append("adam_eps must be positive")
        if self.checkpoint_every < 0:
            problems.append("checkpoint_every must be >= 0")
        if problems:
            raise ValidationError("; ".join(problems))


@dataclass
class AdamState:
    """First/second moment estimates per parameter tensor plus step count."""

    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            first_moment={k: np.zeros_like(v) for k, v in params.items()},
            second_moment={k: np.zeros_like(v) for k, v in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    cfg: TrainConfig,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """Bias-corrected Adam update, applied in place."""
    state.step += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValidationError(
                f"gradient shape {g.shape} != parameter shape {p.shape} "
                f"for {name!r}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for {name!r}")
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= cfg.learning_rate * (m / bias1) / (np.sqrt(v / bias2)
                                                + cfg.adam_eps)
    return params, state


@dataclass
class EpochStats:
    epoch: int
    mean_loss: float
    ecr_loss: float
    marginal_error: float


def write_history_csv(path, history: list[EpochStats]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,mean_loss,ecr_loss,marginal_error\n")
        for row in history:
            fh.write(f"{row.epoch},{row.mean_loss!r},{row.ecr_loss!r},"
                     f"{row.marginal_error!r}\n")


def train(
    corpus,
    cfg: TrainConfig,
    model_cfg: dict,
    checkpoint_dir=None,
) -> tuple[ModelState, list[EpochStats]]:
    """Run the full training loop over a bag-of-words corpus.

    ``model_cfg`` holds keyword arguments for :func:`init_model` other
    than ``vocab_size`` and ``seed``, which come from the corpus and the
    training config. Returns the final state and per-epoch statistics.
    A transport solve that blows up aborts training with the offending
    epoch and batch named.
    """
    X = corpus.to_dense()
    n_docs = X.shape[0]
    if n_docs == 0:
        raise ValidationError("corpus must contain at least one document")

    state = init_model(vocab_size=corpus.vocab_size, seed=cfg.seed,
                       **model_cfg)
    params = state.param_dict()
    adam = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    k = state.num_topics

    history: list[EpochStats] = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_docs)
        losses, reg_losses, marginal_errors = [], [], []
        for batch_index, start in enumerate(range(0, n_docs, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            noise = rng.standard_normal((idx.size, k))
            try:
                out = total_loss(X[idx], state, noise)
            except StabilityError as exc:
                raise StabilityError(
                    f"epoch {epoch}, batch {batch_index}: {exc}") from exc
            adam_step(params, out.grads, adam, cfg)
            losses.append(out.loss)
            reg_losses.append(out.reg_loss)
            marginal_errors.append(out.marginal_error)

        for name, p in params.items():
            if not np.all(np.isfinite(p)):
                raise NumericError(
                    f"parameter {name!r} became non-finite in epoch {epoch}")
        history.append(EpochStats(
            epoch=epoch,
            mean_loss=float(np.mean(losses)),
            ecr_loss=float(np.mean(reg_losses)),
            marginal_error=float(np.mean(marginal_errors)),
        ))
        if (checkpoint_dir is not None and cfg.checkpoint_every > 0
                and epoch % cfg.checkpoint_every == 0):
            save_checkpoint(
                os.path.join(checkpoint_dir, f"epoch_{epoch:05d}.ckpt"),
                state)
    return state, history
