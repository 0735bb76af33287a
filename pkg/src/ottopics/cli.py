"""Command-line interface.

Subcommands: ``train``, ``eval``, ``gen-synth``, ``gradcheck``, and
``export-embeddings``. Option precedence is flags over the JSON config
file (``--config``) over built-in defaults; every run writes a
``manifest.json`` into its output directory recording the resolved
configuration, input digests, and produced artifacts.

Exit codes: 0 success, 2 validation error, 3 numeric or stability
error, 4 file I/O or parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    NumericError,
    ParseError,
    StabilityError,
    ValidationError,
)
from .evaluation import (
    ClusteringResult,
    cluster_documents,
    extract_topics,
    nmi,
    npmi_coherence,
    perplexity,
    purity,
    topic_diversity,
    write_metrics_json,
    write_topics_json,
)
from .gradcheck import format_report, run_gradcheck
from .model import (
    compute_beta,
    load_checkpoint,
    load_embedding_file,
    save_checkpoint,
)
from .numerics import save_matrix_txt
from .preprocessing import (
    PreprocessConfig,
    build_corpus,
    read_bow_file,
    read_corpus_file,
    read_labels_file,
    write_bow_file,
    write_labels_file,
)
from .sinkhorn import SinkhornConfig
from .synthetic import generate_zipf_corpus
from .trainer import TrainConfig, train, write_history_csv

TRAIN_DEFAULTS = {
    "k": 10, "dim": 16, "hidden_size": 200,
    "epsilon": 0.05, "tau": 1.0, "lambda_ecr": 100.0,
    "entropy_weight": 1.0, "regularizer": "ecr", "alpha": 1.0,
    "max_df": 1.0, "min_df": None, "vocab_size": 5000, "min_token_len": 3,
    "epochs": 500, "batch_size": 200, "lr": 2e-3, "seed": 0,
    "checkpoint_every": 0,
    "sinkhorn_max_iterations": 1000, "sinkhorn_stop_tolerance": 0.005,
}

EVAL_DEFAULTS = {
    "top_n": 15, "samples_per_doc": 1, "seed": 0,
}

GEN_SYNTH_DEFAULTS = {
    "num_docs": 500, "vocab_size": 200, "k": 10, "doc_len": 80,
    "zipf_exponent": 1.1, "head_fraction": 0.05, "head_mass": 0.3,
    "seed": 0,
}

GRADCHECK_DEFAULTS = {
    "points": 10, "seed": 0,
}


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command, config, inputs, outputs, seed) -> str:
    manifest = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _resolve(args, defaults: dict) -> dict:
    """Merge flag values over the config file over the defaults."""
    file_cfg = {}
    config_path = getattr(args, "config", None)
    if config_path:
        try:
            with open(config_path, "r", encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad config file: {exc}",
                             path=config_path, line=exc.lineno) from exc
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ValidationError(
                f"unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        resolved[key] = flag if flag is not None else file_cfg.get(key, default)
    return resolved


def _ensure_out_dir(path) -> None:
    os.makedirs(path, exist_ok=True)


# ---------------------------------------------------------------------------
# train

def cmd_train(args) -> int:
    cfg = _resolve(args, TRAIN_DEFAULTS)

    problems = []
    if bool(args.corpus) == bool(args.bow):
        problems.append("exactly one of --corpus or --bow is required")
    if cfg["k"] < 2:
        problems.append("--k must be >= 2")
    if cfg["epochs"] < 1:
        problems.append("--epochs must be >= 1")
    if cfg["batch_size"] < 1:
        problems.append("--batch-size must be >= 1")
    if cfg["lr"] <= 0:
        problems.append("--lr must be positive")
    if cfg["epsilon"] <= 0:
        problems.append("--epsilon must be positive")
    if cfg["tau"] <= 0:
        problems.append("--tau must be positive")
    if cfg["lambda_ecr"] < 0:
        problems.append("--lambda-ecr must be nonnegative")
    if args.embeddings and not args.corpus:
        problems.append("--embeddings requires --corpus (a bag-of-words "
                        "file carries no word strings to match against)")
    if problems:
        raise ValidationError("; ".join(problems))

    inputs = []
    vocab = None
    if args.corpus:
        raw = read_corpus_file(args.corpus)
        inputs.append(args.corpus)
        labels = None
        if args.labels:
            labels = read_labels_file(args.labels)
            inputs.append(args.labels)
        pre_cfg = PreprocessConfig(
            vocab_size=cfg["vocab_size"], max_df=cfg["max_df"],
            min_df=cfg["min_df"], min_token_len=cfg["min_token_len"])
        corpus, vocab = build_corpus(raw, pre_cfg, labels=labels)
    else:
        corpus = read_bow_file(args.bow)
        inputs.append(args.bow)
        if args.labels:
            labels = read_labels_file(args.labels)
            inputs.append(args.labels)
            if len(labels) != corpus.num_docs:
                raise ValidationError(
                    f"{len(labels)} labels for {corpus.num_docs} documents")
            corpus.labels = labels

    word_embeddings = None
    if args.embeddings:
        inputs.append(args.embeddings)
        word_embeddings = load_embedding_file(
            args.embeddings, vocab.words, cfg["dim"],
            np.random.default_rng([cfg["seed"], 7]))

    sinkhorn_cfg = SinkhornConfig(
        max_iterations=cfg["sinkhorn_max_iterations"],
        stop_tolerance=cfg["sinkhorn_stop_tolerance"],
        epsilon=cfg["epsilon"])
    train_cfg = TrainConfig(
        epochs=cfg["epochs"], batch_size=cfg["batch_size"],
        learning_rate=cfg["lr"], seed=cfg["seed"],
        checkpoint_every=cfg["checkpoint_every"])
    model_cfg = dict(
        num_topics=cfg["k"], embed_dim=cfg["dim"],
        hidden_size=cfg["hidden_size"], tau=cfg["tau"],
        lambda_ecr=cfg["lambda_ecr"], alpha=cfg["alpha"],
        regularizer=cfg["regularizer"], entropy_weight=cfg["entropy_weight"],
        sinkhorn_cfg=sinkhorn_cfg, word_embeddings=word_embeddings,
        vocab_words=vocab.words if vocab is not None else None)

    _ensure_out_dir(args.out_dir)
    state, history = train(corpus, train_cfg, model_cfg,
                           checkpoint_dir=args.out_dir)

    ckpt_path = os.path.join(args.out_dir, "model.ckpt")
    save_checkpoint(ckpt_path, state, extra_config=cfg)
    history_path = os.path.join(args.out_dir, "history.csv")
    write_history_csv(history_path, history)
    outputs = [ckpt_path, history_path]

    bow_path = os.path.join(args.out_dir, "corpus.bow")
    write_bow_file(bow_path, corpus)
    outputs.append(bow_path)
    if vocab is not None:
        vocab_path = os.path.join(args.out_dir, "vocab.txt")
        vocab.save(vocab_path)
        outputs.append(vocab_path)

    outputs.append(_write_manifest(args.out_dir, "train", cfg, inputs,
                                   outputs, cfg["seed"]))
    print(f"trained {cfg['epochs']} epochs; final mean loss "
          f"{history[-1].mean_loss:.6f}; checkpoint at {ckpt_path}")
    return 0


# ---------------------------------------------------------------------------
# eval

def cmd_eval(args) -> int:
    cfg = _resolve(args, EVAL_DEFAULTS)
    state, _ = load_checkpoint(args.checkpoint)
    corpus = read_bow_file(args.bow)
    inputs = [args.checkpoint, args.bow]
    if corpus.vocab_size != state.vocab_size:
        raise ValidationError(
            f"corpus vocabulary size {corpus.vocab_size} does not match "
            f"checkpoint {state.vocab_size}")

    labels = corpus.labels
    if args.labels:
        labels = read_labels_file(args.labels)
        inputs.append(args.labels)
        if len(labels) != corpus.num_docs:
            raise ValidationError(
                f"{len(labels)} labels for {corpus.num_docs} documents")
    reference = corpus
    if args.reference:
        reference = read_bow_file(args.reference)
        inputs.append(args.reference)

    beta = compute_beta(state.W, state.T, state.tau)
    topics = extract_topics(state, cfg["top_n"])
    metrics = {
        "td": topic_diversity(topics),
        "npmi": npmi_coherence(topics, reference),
        "perplexity": perplexity(corpus, state,
                                 samples_per_doc=cfg["samples_per_doc"],
                                 seed=cfg["seed"]),
        "config_echo": cfg,
    }
    if labels is not None:
        result = ClusteringResult(cluster_documents(corpus, state), labels)
        metrics["purity"] = purity(result)
        metrics["nmi"] = nmi(result)
    else:
        print("note: no labels available; skipping purity/nmi",
              file=sys.stderr)

    _ensure_out_dir(args.out_dir)
    metrics_path = os.path.join(args.out_dir, "metrics.json")
    write_metrics_json(metrics_path, metrics)
    topics_path = os.path.join(args.out_dir, "topics.json")
    write_topics_json(topics_path, topics, beta, state.vocab_words)
    outputs = [metrics_path, topics_path]
    outputs.append(_write_manifest(args.out_dir, "eval", cfg, inputs,
                                   outputs, cfg["seed"]))
    shown = {k: v for k, v in metrics.items() if k != "config_echo"}
    print(json.dumps(shown, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# gen-synth

def cmd_gen_synth(args) -> int:
    cfg = _resolve(args, GEN_SYNTH_DEFAULTS)
    corpus, beta = generate_zipf_corpus(
        num_docs=cfg["num_docs"], vocab_size=cfg["vocab_size"],
        num_topics=cfg["k"], doc_len=cfg["doc_len"],
        zipf_exponent=cfg["zipf_exponent"], seed=cfg["seed"],
        head_fraction=cfg["head_fraction"], head_mass=cfg["head_mass"])

    _ensure_out_dir(args.out_dir)
    bow_path = os.path.join(args.out_dir, "synth.bow")
    write_bow_file(bow_path, corpus)
    labels_path = os.path.join(args.out_dir, "synth.labels")
    write_labels_file(labels_path, corpus.labels)
    beta_path = os.path.join(args.out_dir, "synth_beta.txt")
    save_matrix_txt(beta_path, beta)
    outputs = [bow_path, labels_path, beta_path]
    outputs.append(_write_manifest(args.out_dir, "gen-synth", cfg, [],
                                   outputs, cfg["seed"]))
    print(f"wrote {corpus.num_docs} documents over {corpus.vocab_size} "
          f"words to {bow_path}")
    return 0


# ---------------------------------------------------------------------------
# gradcheck

def cmd_gradcheck(args) -> int:
    cfg = _resolve(args, GRADCHECK_DEFAULTS)
    rows = run_gradcheck(points=cfg["points"], seed=cfg["seed"])
    report = format_report(rows)
    print(report)

    _ensure_out_dir(args.out_dir)
    report_path = os.path.join(args.out_dir, "gradcheck.txt")
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write(report + "\n")
    _write_manifest(args.out_dir, "gradcheck", cfg, [], [report_path],
                    cfg["seed"])
    return 0 if all(r.passed for r in rows) else 3


# ---------------------------------------------------------------------------
# export-embeddings

def cmd_export_embeddings(args) -> int:
    state, _ = load_checkpoint(args.checkpoint)
    _ensure_out_dir(args.out_dir)
    w_path = os.path.join(args.out_dir, "word_embeddings.txt")
    t_path = os.path.join(args.out_dir, "topic_embeddings.txt")
    save_matrix_txt(w_path, state.W)
    save_matrix_txt(t_path, state.T)
    _write_manifest(args.out_dir, "export-embeddings", {},
                    [args.checkpoint], [w_path, t_path], state.seed)
    print(f"wrote {w_path} and {t_path}")
    return 0


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ottopics",
        description="Topic modeling with transport-regularized embeddings")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model on a corpus")
    p_train.add_argument("--corpus", help="raw text, one document per line")
    p_train.add_argument("--bow", help="bag-of-words file")
    p_train.add_argument("--labels", help="one integer label per line")
    p_train.add_argument("--embeddings",
                         help="pretrained word vectors, `word v1 ... vD`")
    p_train.add_argument("--config", help="JSON config file")
    p_train.add_argument("--k", type=int, help="number of topics")
    p_train.add_argument("--dim", type=int, help="embedding dimension")
    p_train.add_argument("--hidden-size", type=int, dest="hidden_size")
    p_train.add_argument("--epsilon", type=float,
                         help="entropic transport weight")
    p_train.add_argument("--tau", type=float, help="decoder temperature")
    p_train.add_argument("--lambda-ecr", type=float, dest="lambda_ecr",
                         help="regularizer weight")
    p_train.add_argument("--entropy-weight", type=float,
                         dest="entropy_weight")
    p_train.add_argument("--regularizer",
                         choices=["ecr", "dkm", "dkm-entropy", "none"])
    p_train.add_argument("--alpha", type=float,
                         help="prior concentration")
    p_train.add_argument("--max-df", type=float, dest="max_df")
    p_train.add_argument("--min-df", type=float, dest="min_df")
    p_train.add_argument("--vocab-size", type=int, dest="vocab_size")
    p_train.add_argument("--min-token-len", type=int, dest="min_token_len")
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int, dest="batch_size")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--checkpoint-every", type=int,
                         dest="checkpoint_every")
    p_train.add_argument("--out-dir", required=True, dest="out_dir")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a trained checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--bow", required=True,
                        help="bag-of-words file to evaluate on")
    p_eval.add_argument("--labels", help="gold labels (overrides the bow file)")
    p_eval.add_argument("--reference",
                        help="reference bag-of-words for coherence "
                             "(default: the evaluation corpus)")
    p_eval.add_argument("--config", help="JSON config file")
    p_eval.add_argument("--top-n", type=int, dest="top_n")
    p_eval.add_argument("--samples-per-doc", type=int, dest="samples_per_doc")
    p_eval.add_argument("--seed", type=int)
    p_eval.add_argument("--out-dir", required=True, dest="out_dir")
    p_eval.set_defaults(func=cmd_eval)

    p_gen = sub.add_parser("gen-synth",
                           help="generate a synthetic labeled corpus")
    p_gen.add_argument("--config", help="JSON config file")
    p_gen.add_argument("--num-docs", type=int, dest="num_docs")
    p_gen.add_argument("--vocab-size", type=int, dest="vocab_size")
    p_gen.add_argument("--k", type=int, help="number of planted topics")
    p_gen.add_argument("--doc-len", type=int, dest="doc_len")
    p_gen.add_argument("--zipf-exponent", type=float, dest="zipf_exponent")
    p_gen.add_argument("--head-fraction", type=float, dest="head_fraction")
    p_gen.add_argument("--head-mass", type=float, dest="head_mass")
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--out-dir", required=True, dest="out_dir")
    p_gen.set_defaults(func=cmd_gen_synth)

    p_grad = sub.add_parser("gradcheck",
                            help="certify analytic gradients against "
                                 "finite differences")
    p_grad.add_argument("--config", help="JSON config file")
    p_grad.add_argument("--points", type=int,
                        help="random evaluation points per loss")
    p_grad.add_argument("--seed", type=int)
    p_grad.add_argument("--out-dir", required=True, dest="out_dir")
    p_grad.set_defaults(func=cmd_gradcheck)

    p_exp = sub.add_parser("export-embeddings",
                           help="dump word and topic embeddings as text")
    p_exp.add_argument("--checkpoint", required=True)
    p_exp.add_argument("--out-dir", required=True, dest="out_dir")
    p_exp.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (StabilityError, NumericError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
