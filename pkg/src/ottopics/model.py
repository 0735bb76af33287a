"""Topic model core: encoder, logistic-normal latent, distance decoder.

The architecture is fixed and shallow, so every loss carries its own
analytic gradient instead of relying on an autodiff graph; the finite
difference oracle in :mod:`ottopics.numerics` certifies each one.

Encoder: two softplus layers feeding separate linear heads for the mean
and log-variance of a diagonal Gaussian over the pre-softmax latent.
The document-topic distribution is the softmax of a reparameterized
draw. The topic-word matrix ``beta`` is a per-word softmax over negative
squared embedding distances; documents are scored against
``softmax(beta @ theta)`` with a count-weighted cross entropy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, ShapeError, ValidationError
from .numerics import softmax, softplus
from .regularizers import (
    ClusterSizeSpec,
    RegularizerOutput,
    _distance_weighted_grads,
    dkm_assignments,
    dkm_entropy_loss,
    dkm_loss,
    ecr_loss,
)
from .sinkhorn import SinkhornConfig

REGULARIZERS = ("ecr", "dkm", "dkm-entropy", "none")

INIT_SCALE = 0.02
# Random word embeddings need spread comparable to pretrained vectors:
# the clustering regularizer separates topics through their transport
# assignments, and an all-at-the-origin word cloud hands every topic
# the same assignment profile, which then never separates. Topic
# embeddings start compact and must be pushed out to cover the words.
WORD_INIT_SCALE = 0.5
TOPIC_INIT_SCALE = 0.02


@dataclass
class EncoderParams:
    """Weights of the two-layer softplus MLP and its two linear heads."""

    w1: np.ndarray  # (H, V)
    b1: np.ndarray  # (H,)
    w2: np.ndarray  # (H, H)
    b2: np.ndarray  # (H,)
    w_mu: np.ndarray  # (K, H)
    b_mu: np.ndarray  # (K,)
    w_logvar: np.ndarray  # (K, H)
    b_logvar: np.ndarray  # (K,)

    @property
    def hidden_size(self) -> int:
        return self.b1.size

    def param_dict(self) -> dict[str, np.ndarray]:
        return {
            "enc.w1": self.w1, "enc.b1": self.b1,
            "enc.w2": self.w2, "enc.b2": self.b2,
            "enc.w_mu": self.w_mu, "enc.b_mu": self.b_mu,
            "enc.w_logvar": self.w_logvar, "enc.b_logvar": self.b_logvar,
        }


@dataclass
class PriorParams:
    """Diagonal Gaussian prior over the pre-softmax latent."""

    mu0: np.ndarray
    sigma0_diag: np.ndarray
    alpha: float = 1.0

    def __post_init__(self):
        self.mu0 = np.asarray(self.mu0, dtype=np.float64)
        self.sigma0_diag = np.asarray(self.sigma0_diag, dtype=np.float64)
        if np.any(self.sigma0_diag <= 0):
            raise ValidationError("prior variances must be positive")


def make_prior(k: int, alpha: float = 1.0) -> PriorParams:
    """Gaussian approximation of a symmetric Dirichlet with concentration alpha.

    Zero mean with per-coordinate variance (K - 1) / (alpha * K).
    """
    if k < 2:
        raise ValidationError("need at least 2 topics")
    if alpha <= 0:
        raise ValidationError("alpha must be positive")
    sigma = (k - 1.0) / (alpha * k)
    return PriorParams(mu0=np.zeros(k), sigma0_diag=np.full(k, sigma),
                       alpha=alpha)


@dataclass
class ModelState:
    """Everything a training step reads or writes."""

    encoder: EncoderParams
    W: np.ndarray  # (D, V) word embeddings
    T: np.ndarray  # (D, K) topic embeddings
    prior: PriorParams
    tau: float = 1.0
    lambda_ecr: float = 100.0
    sinkhorn_cfg: SinkhornConfig = field(default_factory=SinkhornConfig)
    seed: int = 0
    regularizer: str = "ecr"
    entropy_weight: float = 1.0
    vocab_words: list[str] | None = None

    @property
    def vocab_size(self) -> int:
        return self.W.shape[1]

    @property
    def num_topics(self) -> int:
        return self.T.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.W.shape[0]

    def param_dict(self) -> dict[str, np.ndarray]:
        params = self.encoder.param_dict()
        params["W"] = self.W
        params["T"] = self.T
        return params


def init_model(
    vocab_size: int,
    num_topics: int,
    embed_dim: int = 16,
    hidden_size: int = 200,
    tau: float = 1.0,
    lambda_ecr: float = 100.0,
    alpha: float = 1.0,
    sinkhorn_cfg: SinkhornConfig | None = None,
    seed: int = 0,
    regularizer: str = "ecr",
    entropy_weight: float = 1.0,
    word_embeddings: np.ndarray | None = None,
    vocab_words: list[str] | None = None,
    word_init_scale: float = WORD_INIT_SCALE,
    topic_init_scale: float = TOPIC_INIT_SCALE,
) -> ModelState:
    """Build a fresh model; all randomness comes from ``seed``.

    Weights are drawn i.i.d. normal in a fixed order (encoder, then word
    embeddings, then topic embeddings), biases start at zero. Encoder
    weights use scale 0.02; the embedding matrices use their own scales.
    ``word_embeddings`` (D x V), when given, replaces the random word
    initialization.
    """
    if num_topics < 2:
        raise ValidationError("need at least 2 topics")
    if vocab_size < num_topics:
        raise ValidationError("vocabulary must be at least as large as K")
    if regularizer not in REGULARIZERS:
        raise ValidationError(
            f"unknown regularizer {regularizer!r}; choose from {REGULARIZERS}"
        )
    if tau <= 0 or hidden_size < 1 or embed_dim < 1:
        raise ValidationError("tau, hidden_size, embed_dim must be positive")
    if lambda_ecr < 0:
        raise ValidationError("regularizer weight must be nonnegative")

    rng = np.random.default_rng(seed)
    h, v, k, d = hidden_size, vocab_size, num_topics, embed_dim
    enc = EncoderParams(
        w1=rng.normal(0.0, INIT_SCALE, (h, v)),
        b1=np.zeros(h),
        w2=rng.normal(0.0, INIT_SCALE, (h, h)),
        b2=np.zeros(h),
        w_mu=rng.normal(0.0, INIT_SCALE, (k, h)),
        b_mu=np.zeros(k),
        w_logvar=rng.normal(0.0, INIT_SCALE, (k, h)),
        b_logvar=np.zeros(k),
    )
    W = rng.normal(0.0, word_init_scale, (d, v))
    if word_embeddings is not None:
        word_embeddings = np.asarray(word_embeddings, dtype=np.float64)
        if word_embeddings.shape != (d, v):
            raise ShapeError(
                f"word embeddings must be ({d}, {v}), got {word_embeddings.shape}"
            )
        W = word_embeddings.copy()
    T = rng.normal(0.0, topic_init_scale, (d, k))
    return ModelState(
        encoder=enc, W=W, T=T, prior=make_prior(k, alpha), tau=tau,
        lambda_ecr=lambda_ecr,
        sinkhorn_cfg=sinkhorn_cfg or SinkhornConfig(), seed=seed,
        regularizer=regularizer, entropy_weight=entropy_weight,
        vocab_words=list(vocab_words) if vocab_words is not None else None,
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def encode(x: np.ndarray, enc: EncoderParams) -> tuple[np.ndarray, np.ndarray]:
    """Forward pass to the variational mean and log-variance.

    Accepts a single count vector (V,) or a batch (N, V); outputs mirror
    the input's leading shape.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != enc.w1.shape[1]:
        raise ShapeError(
            f"input has {x.shape[-1]} features, encoder expects {enc.w1.shape[1]}"
        )
    h1 = softplus(x @ enc.w1.T + enc.b1)
    h2 = softplus(h1 @ enc.w2.T + enc.b2)
    mu = h2 @ enc.w_mu.T + enc.b_mu
    logvar = h2 @ enc.w_logvar.T + enc.b_logvar
    return mu, logvar


def reparameterize(mu: np.ndarray, logvar: np.ndarray,
                   noise: np.ndarray) -> np.ndarray:
    """Softmax of mu + std * noise; rows land on the probability simplex."""
    r = mu + np.exp(0.5 * np.asarray(logvar)) * noise
    return softmax(r)


def compute_beta(W: np.ndarray, T: np.ndarray, tau: float = 1.0) -> np.ndarray:
    """Topic-word matrix (V x K): per-word softmax over negative distances."""
    return dkm_assignments(W, T, tau)


def kl_term(mu: np.ndarray, logvar: np.ndarray, prior: PriorParams):
    """Closed-form KL from the diagonal Gaussian (mu, e^logvar) to the prior.

    Reduces over the last axis: scalar for a single document, a vector
    of per-document values for a batch.
    """
    mu = np.asarray(mu, dtype=np.float64)
    logvar = np.asarray(logvar, dtype=np.float64)
    var_ratio = np.exp(logvar) / prior.sigma0_diag
    mean_term = (mu - prior.mu0) ** 2 / prior.sigma0_diag
    per_coord = var_ratio + mean_term - 1.0 + np.log(prior.sigma0_diag) - logvar
    out = 0.5 * per_coord.sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def recon_term(x: np.ndarray, beta: np.ndarray, theta: np.ndarray):
    """Count-weighted cross entropy against softmax(beta @ theta).

    Reduces over the vocabulary axis, like :func:`kl_term`.
    """
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    z = theta @ beta.T
    log_y = z - _logsumexp_last(z)
    out = -(x * log_y).sum(axis=-1)
    return float(out) if out.ndim == 0 else out


def _logsumexp_last(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    return m + np.log(np.exp(z - m).sum(axis=-1, keepdims=True))


@dataclass
class LossAndGrads:
    """Objective value with gradients for every parameter group."""

    loss: float
    grads: dict[str, np.ndarray]
    recon: float
    kl: float
    reg_loss: float
    marginal_error: float


def _regularizer_output(state: ModelState) -> RegularizerOutput | None:
    """Evaluate the configured embedding regularizer, or None if inactive.

    No transport solve happens when the weight is zero or the
    regularizer is disabled.
    """
    if state.regularizer == "none" or state.lambda_ecr == 0.0:
        return None
    if state.regularizer == "ecr":
        return ecr_loss(state.W, state.T,
                        ClusterSizeSpec.uniform(state.num_topics),
                        state.sinkhorn_cfg)
    if state.regularizer == "dkm":
        return dkm_loss(state.W, state.T, state.tau)
    if state.regularizer == "dkm-entropy":
        return dkm_entropy_loss(state.W, state.T, state.tau,
                                state.entropy_weight)
    raise ValidationError(f"unknown regularizer {state.regularizer!r}")


def total_loss(X: np.ndarray, state: ModelState,
               noise: np.ndarray) -> LossAndGrads:
    """Mean per-document loss (reconstruction + KL) plus the weighted
    embedding regularizer, with analytic gradients for all parameters.

    ``X`` is the (N, V) count batch and ``noise`` the (N, K) standard
    normal draws for the reparameterization; given the same noise the
    result is deterministic. The transport plan inside the ECR term is
    held fixed during differentiation.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    noise = np.atleast_2d(np.asarray(noise, dtype=np.float64))
    n = X.shape[0]
    if n == 0:
        raise ValidationError("batch must be nonempty")
    if noise.shape != (n, state.num_topics):
        raise ShapeError(
            f"noise must be ({n}, {state.num_topics}), got {noise.shape}"
        )
    enc, prior = state.encoder, state.prior

    # Forward.
    a1 = X @ enc.w1.T + enc.b1
    h1 = softplus(a1)
    a2 = h1 @ enc.w2.T + enc.b2
    h2 = softplus(a2)
    mu = h2 @ enc.w_mu.T + enc.b_mu
    logvar = h2 @ enc.w_logvar.T + enc.b_logvar
    std = np.exp(0.5 * logvar)
    theta = softmax(mu + std * noise)

    beta = compute_beta(state.W, state.T, state.tau)
    z = theta @ beta.T
    log_y = z - _logsumexp_last(z)
    recon = float(-(X * log_y).sum() / n)
    kl = float(kl_term(mu, logvar, prior).sum() / n)

    reg = _regularizer_output(state)
    reg_loss = reg.loss if reg is not None else 0.0
    loss = recon + kl + state.lambda_ecr * reg_loss

    # Backward. g_z is the gradient of the mean reconstruction term.
    y = np.exp(log_y)
    g_z = (X.sum(axis=1, keepdims=True) * y - X) / n
    g_theta = g_z @ beta
    g_r = theta * (g_theta - (g_theta * theta).sum(axis=1, keepdims=True))

    g_mu = g_r + (mu - prior.mu0) / prior.sigma0_diag / n
    g_logvar = 0.5 * (g_r * noise * std
                      + (np.exp(logvar) / prior.sigma0_diag - 1.0) / n)

    g_h2 = g_mu @ enc.w_mu + g_logvar @ enc.w_logvar
    g_a2 = g_h2 * _sigmoid(a2)
    g_h1 = g_a2 @ enc.w2
    g_a1 = g_h1 * _sigmoid(a1)

    grads = {
        "enc.w1": g_a1.T @ X, "enc.b1": g_a1.sum(axis=0),
        "enc.w2": g_a2.T @ h1, "enc.b2": g_a2.sum(axis=0),
        "enc.w_mu": g_mu.T @ h2, "enc.b_mu": g_mu.sum(axis=0),
        "enc.w_logvar": g_logvar.T @ h2, "enc.b_logvar": g_logvar.sum(axis=0),
    }

    # Reconstruction reaches the embeddings through beta's row softmax.
    g_beta = g_z.T @ theta
    s = beta * (g_beta - (g_beta * beta).sum(axis=1, keepdims=True))
    g_cost = -s / state.tau
    grad_W, grad_T = _distance_weighted_grads(state.W, state.T, g_cost)
    if reg is not None:
        grad_W = grad_W + state.lambda_ecr * reg.grad_W
        grad_T = grad_T + state.lambda_ecr * reg.grad_T
    grads["W"] = grad_W
    grads["T"] = grad_T

    return LossAndGrads(
        loss=float(loss), grads=grads, recon=recon, kl=kl,
        reg_loss=float(reg_loss),
        marginal_error=reg.marginal_error if reg is not None else 0.0,
    )


# ---------------------------------------------------------------------------
# Checkpoint container

_CHECKPOINT_MAGIC = b"ottopics-checkpoint 1\n"

_ARRAY_ORDER = (
    "enc.w1", "enc.b1", "enc.w2", "enc.b2",
    "enc.w_mu", "enc.b_mu", "enc.w_logvar", "enc.b_logvar",
    "W", "T", "prior.mu0", "prior.sigma0_diag",
)


def save_checkpoint(path, state: ModelState,
                    extra_config: dict | None = None) -> None:
    """Write a versioned binary checkpoint.

    Layout: a magic line, a JSON header (sorted keys) describing the
    config and array shapes, then the raw little-endian float64 array
    bytes in a fixed order. Doubles round-trip bit-exactly and the same
    state always produces the same bytes.
    """
    arrays = dict(state.param_dict())
    arrays["prior.mu0"] = state.prior.mu0
    arrays["prior.sigma0_diag"] = state.prior.sigma0_diag
    config = {
        "tau": state.tau,
        "lambda_ecr": state.lambda_ecr,
        "alpha": state.prior.alpha,
        "sinkhorn": {
            "max_iterations": state.sinkhorn_cfg.max_iterations,
            "stop_tolerance": state.sinkhorn_cfg.stop_tolerance,
            "epsilon": state.sinkhorn_cfg.epsilon,
        },
        "seed": state.seed,
        "regularizer": state.regularizer,
        "entropy_weight": state.entropy_weight,
        "vocab_words": state.vocab_words,
    }
    if extra_config:
        config["extra"] = extra_config
    header = {
        "arrays": [[name, list(arrays[name].shape)] for name in _ARRAY_ORDER],
        "config": config,
    }
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        for name in _ARRAY_ORDER:
            fh.write(np.ascontiguousarray(
                arrays[name], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelState, dict]:
    """Read a checkpoint back into a ModelState plus its config echo."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != _CHECKPOINT_MAGIC:
            raise ParseError("not an ottopics checkpoint", path=path, line=1)
        try:
            header = json.loads(fh.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ParseError(f"bad checkpoint header: {exc}",
                             path=path, line=2) from exc
        arrays = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ParseError(f"truncated array {name!r}", path=path)
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()

    cfg = header["config"]
    enc = EncoderParams(
        w1=arrays["enc.w1"], b1=arrays["enc.b1"],
        w2=arrays["enc.w2"], b2=arrays["enc.b2"],
        w_mu=arrays["enc.w_mu"], b_mu=arrays["enc.b_mu"],
        w_logvar=arrays["enc.w_logvar"], b_logvar=arrays["enc.b_logvar"],
    )
    prior = PriorParams(mu0=arrays["prior.mu0"],
                        sigma0_diag=arrays["prior.sigma0_diag"],
                        alpha=cfg["alpha"])
    state = ModelState(
        encoder=enc, W=arrays["W"], T=arrays["T"], prior=prior,
        tau=cfg["tau"], lambda_ecr=cfg["lambda_ecr"],
        sinkhorn_cfg=SinkhornConfig(**cfg["sinkhorn"]),
        seed=cfg["seed"], regularizer=cfg["regularizer"],
        entropy_weight=cfg["entropy_weight"],
        vocab_words=cfg.get("vocab_words"),
    )
    return state, cfg


def load_embedding_file(path, words: list[str], dim: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Read `word v1 ... vD` lines into a (dim, len(words)) matrix.

    Words missing from the file fall back to normal(0, 0.02) draws from
    ``rng`` so partial coverage still yields a full matrix.
    """
    vectors: dict[str, np.ndarray] = {}
    wanted = set(words)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if word not in wanted:
                continue
            if len(values) != dim:
                raise ParseError(
                    f"expected {dim} values for {word!r}, found {len(values)}",
                    path=path, line=lineno)
            try:
                vectors[word] = np.array([float(v) for v in values])
            except ValueError as exc:
                raise ParseError(str(exc), path=path, line=lineno) from exc
    out = np.empty((dim, len(words)))
    for j, word in enumerate(words):
        vec = vectors.get(word)
        out[:, j] = vec if vec is not None else rng.normal(0.0, INIT_SCALE, dim)
    return out
