"""Optimal-transport regularized neural topic modeling.

Set the environment variable ``OTTOPICS_THREADS`` to cap the BLAS
thread pools used by the numeric kernels (0 or unset means automatic).
The cap is applied here, before numpy is first imported, so it works
for both library and command-line use.
"""

import os as _os


def _apply_thread_cap() -> None:
    raw = _os.environ.get("OTTOPICS_THREADS")
    if not raw:
        return
    try:
        n = int(raw)
    except ValueError:
        import warnings
        warnings.warn(f"ignoring OTTOPICS_THREADS={raw!r}: not an integer")
        return
    if n <= 0:  # 0 = auto
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(var, str(n))


_apply_thread_cap()

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    EmptyCorpusError,
    NumericError,
    OttopicsError,
    ParseError,
    ShapeError,
    StabilityError,
    ValidationError,
)
from .estimator import ECRTM  # noqa: E402
from .evaluation import (  # noqa: E402
    ClusteringResult,
    TopicSet,
    cluster_documents,
    extract_topics,
    nmi,
    npmi_coherence,
    perplexity,
    purity,
    topic_diversity,
    topics_from_beta,
)
from .model import (  # noqa: E402
    ModelState,
    compute_beta,
    encode,
    init_model,
    kl_term,
    load_checkpoint,
    make_prior,
    recon_term,
    reparameterize,
    save_checkpoint,
    total_loss,
)
from .preprocessing import (  # noqa: E402
    BowCorpus,
    CorpusVectorizer,
    PreprocessConfig,
    Vocabulary,
    build_corpus,
    build_vocab,
    preprocess,
    vectorize,
)
from .regularizers import (  # noqa: E402
    ClusterSizeSpec,
    RegularizerOutput,
    dkm_assignments,
    dkm_entropy_loss,
    dkm_loss,
    ecr_loss,
)
from .sinkhorn import (  # noqa: E402
    OtProblem,
    SinkhornConfig,
    TransportPlan,
    plan_row_entropy,
    solve,
)
from .synthetic import generate_zipf_corpus  # noqa: E402
from .trainer import AdamState, TrainConfig, adam_step, train  # noqa: E402

__all__ = [
    "ECRTM",
    "AdamState",
    "BowCorpus",
    "ClusterSizeSpec",
    "ClusteringResult",
    "CorpusVectorizer",
    "EmptyCorpusError",
    "ModelState",
    "NumericError",
    "OtProblem",
    "OttopicsError",
    "ParseError",
    "PreprocessConfig",
    "RegularizerOutput",
    "ShapeError",
    "SinkhornConfig",
    "StabilityError",
    "TopicSet",
    "TrainConfig",
    "TransportPlan",
    "ValidationError",
    "Vocabulary",
    "adam_step",
    "build_corpus",
    "build_vocab",
    "cluster_documents",
    "compute_beta",
    "dkm_assignments",
    "dkm_entropy_loss",
    "dkm_loss",
    "ecr_loss",
    "encode",
    "extract_topics",
    "generate_zipf_corpus",
    "init_model",
    "kl_term",
    "load_checkpoint",
    "make_prior",
    "nmi",
    "npmi_coherence",
    "perplexity",
    "plan_row_entropy",
    "preprocess",
    "purity",
    "recon_term",
    "reparameterize",
    "save_checkpoint",
    "solve",
    "topic_diversity",
    "topics_from_beta",
    "total_loss",
    "train",
    "vectorize",
]
