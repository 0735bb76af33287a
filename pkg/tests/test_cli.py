import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ottopics import load_checkpoint
from ottopics.cli import main
from ottopics.preprocessing import read_bow_file


def run_cli(*args):
    return main(list(args))


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("synth")
    code = run_cli("gen-synth", "--num-docs", "60", "--vocab-size", "40",
                   "--k", "4", "--doc-len", "30", "--seed", "5",
                   "--out-dir", str(out))
    assert code == 0
    return out


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory, synth_dir):
    out = tmp_path_factory.mktemp("trained")
    code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                   "--k", "4", "--dim", "8", "--hidden-size", "32",
                   "--lambda-ecr", "20", "--epochs", "10",
                   "--batch-size", "30", "--seed", "3",
                   "--out-dir", str(out))
    assert code == 0
    return out


class TestGenSynth:
    def test_writes_three_artifacts_and_manifest(self, synth_dir):
        for name in ("synth.bow", "synth.labels", "synth_beta.txt",
                     "manifest.json"):
            assert (synth_dir / name).exists()

    def test_bow_and_labels_consistent(self, synth_dir):
        corpus = read_bow_file(synth_dir / "synth.bow")
        labels = [int(line) for line in
                  (synth_dir / "synth.labels").read_text().splitlines()]
        assert corpus.num_docs == 60
        np.testing.assert_array_equal(corpus.labels, labels)

    def test_manifest_records_outputs_and_seed(self, synth_dir):
        manifest = json.loads((synth_dir / "manifest.json").read_text())
        assert manifest["command"] == "gen-synth"
        assert manifest["seed"] == 5
        assert any(p.endswith("synth.bow") for p in manifest["outputs"])

    def test_same_seed_reproducible(self, tmp_path, synth_dir):
        other = tmp_path / "again"
        run_cli("gen-synth", "--num-docs", "60", "--vocab-size", "40",
                "--k", "4", "--doc-len", "30", "--seed", "5",
                "--out-dir", str(other))
        assert (other / "synth.bow").read_bytes() == \
               (synth_dir / "synth.bow").read_bytes()

    def test_zero_docs_rejected(self, tmp_path):
        code = run_cli("gen-synth", "--num-docs", "0", "--out-dir",
                       str(tmp_path / "x"))
        assert code == 2


class TestTrain:
    def test_outputs_exist(self, trained_dir):
        for name in ("model.ckpt", "history.csv", "corpus.bow",
                     "manifest.json"):
            assert (trained_dir / name).exists()

    def test_history_has_one_row_per_epoch(self, trained_dir):
        lines = (trained_dir / "history.csv").read_text().splitlines()
        assert lines[0] == "epoch,mean_loss,ecr_loss,marginal_error"
        assert len(lines) == 11

    def test_determinism_bit_identical(self, tmp_path, synth_dir,
                                       trained_dir):
        rerun = tmp_path / "rerun"
        code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                       "--k", "4", "--dim", "8", "--hidden-size", "32",
                       "--lambda-ecr", "20", "--epochs", "10",
                       "--batch-size", "30", "--seed", "3",
                       "--out-dir", str(rerun))
        assert code == 0
        assert (rerun / "model.ckpt").read_bytes() == \
               (trained_dir / "model.ckpt").read_bytes()
        assert (rerun / "history.csv").read_bytes() == \
               (trained_dir / "history.csv").read_bytes()

    def test_k_below_two_is_validation_error(self, synth_dir, tmp_path):
        code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                       "--k", "1", "--out-dir", str(tmp_path / "x"))
        assert code == 2

    def test_validation_problems_reported_together(self, synth_dir,
                                                   tmp_path, capsys):
        code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                       "--k", "1", "--epochs", "0", "--lr", "-1",
                       "--out-dir", str(tmp_path / "x"))
        assert code == 2
        err = capsys.readouterr().err
        assert "--k" in err and "--epochs" in err and "--lr" in err

    def test_missing_file_is_io_error(self, tmp_path):
        code = run_cli("train", "--bow", str(tmp_path / "nope.bow"),
                       "--k", "4", "--out-dir", str(tmp_path / "x"))
        assert code == 4

    def test_corpus_and_bow_mutually_exclusive(self, synth_dir, tmp_path):
        code = run_cli("train", "--out-dir", str(tmp_path / "x"))
        assert code == 2

    def test_raw_corpus_pipeline_writes_vocab(self, tmp_path):
        corpus_path = tmp_path / "docs.txt"
        corpus_path.write_text(
            "transport clusters words tightly\n"
            "words cluster around topics nicely\n"
            "topics cover separate word groups\n"
            "separate groups cover distinct words\n")
        out = tmp_path / "out"
        code = run_cli("train", "--corpus", str(corpus_path), "--k", "2",
                       "--dim", "4", "--hidden-size", "8", "--epochs", "2",
                       "--vocab-size", "20", "--seed", "1",
                       "--out-dir", str(out))
        assert code == 0
        assert (out / "vocab.txt").exists()
        state, _ = load_checkpoint(out / "model.ckpt")
        assert state.vocab_words is not None

    def test_config_file_precedence(self, synth_dir, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"epochs": 3, "k": 4, "dim": 8,
                                      "hidden_size": 16, "batch_size": 30}))
        out = tmp_path / "out"
        # Flag --epochs 2 must beat the config file's 3.
        code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                       "--config", str(config), "--epochs", "2",
                       "--out-dir", str(out))
        assert code == 0
        lines = (out / "history.csv").read_text().splitlines()
        assert len(lines) == 3
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["epochs"] == 2
        assert manifest["config"]["hidden_size"] == 16

    def test_unknown_config_key_rejected(self, synth_dir, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"epoochs": 3}))
        code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                       "--config", str(config),
                       "--out-dir", str(tmp_path / "x"))
        assert code == 2

    def test_embeddings_require_raw_corpus(self, synth_dir, tmp_path):
        emb = tmp_path / "vectors.txt"
        emb.write_text("word 0.1 0.2\n")
        code = run_cli("train", "--bow", str(synth_dir / "synth.bow"),
                       "--embeddings", str(emb), "--k", "4",
                       "--out-dir", str(tmp_path / "x"))
        assert code == 2


class TestEval:
    def test_metrics_and_topics_written(self, synth_dir, trained_dir,
                                        tmp_path):
        out = tmp_path / "eval"
        code = run_cli("eval", "--checkpoint",
                       str(trained_dir / "model.ckpt"),
                       "--bow", str(synth_dir / "synth.bow"),
                       "--out-dir", str(out))
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        for key in ("td", "npmi", "perplexity", "purity", "nmi"):
            assert key in metrics
        topics = json.loads((out / "topics.json").read_text())
        assert len(topics) == 4
        assert len(topics[0]["words"]) == 15

    def test_reproducible_metrics(self, synth_dir, trained_dir, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            run_cli("eval", "--checkpoint", str(trained_dir / "model.ckpt"),
                    "--bow", str(synth_dir / "synth.bow"),
                    "--out-dir", str(out))
            outs.append((out / "metrics.json").read_bytes())
        assert outs[0] == outs[1]

    def test_labels_absent_omits_clustering_metrics(self, trained_dir,
                                                    tmp_path, capsys):
        # Strip labels out of the bow file.
        bow = read_bow_file(trained_dir / "corpus.bow")
        bow.labels = None
        from ottopics.preprocessing import write_bow_file
        unlabeled = tmp_path / "unlabeled.bow"
        write_bow_file(unlabeled, bow)

        out = tmp_path / "eval"
        code = run_cli("eval", "--checkpoint",
                       str(trained_dir / "model.ckpt"),
                       "--bow", str(unlabeled), "--out-dir", str(out))
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert "purity" not in metrics and "nmi" not in metrics
        assert "skipping purity/nmi" in capsys.readouterr().err

    def test_vocab_size_mismatch_rejected(self, trained_dir, tmp_path):
        other_dir = tmp_path / "othersynth"
        run_cli("gen-synth", "--num-docs", "30", "--vocab-size", "50",
                "--k", "5", "--out-dir", str(other_dir))
        code = run_cli("eval", "--checkpoint",
                       str(trained_dir / "model.ckpt"),
                       "--bow", str(other_dir / "synth.bow"),
                       "--out-dir", str(tmp_path / "x"))
        assert code == 2


class TestEndToEnd:
    def test_train_then_eval_meets_quality_thresholds(self, tmp_path):
        """Full command cycle on the standard synthetic corpus."""
        synth = tmp_path / "synth"
        assert run_cli("gen-synth", "--seed", "42",
                       "--out-dir", str(synth)) == 0
        out = tmp_path / "model"
        assert run_cli("train", "--bow", str(synth / "synth.bow"),
                       "--k", "10", "--epochs", "200", "--seed", "7",
                       "--out-dir", str(out)) == 0
        evald = tmp_path / "eval"
        assert run_cli("eval", "--checkpoint", str(out / "model.ckpt"),
                       "--bow", str(synth / "synth.bow"),
                       "--out-dir", str(evald)) == 0
        metrics = json.loads((evald / "metrics.json").read_text())
        assert metrics["td"] >= 0.9
        assert metrics["purity"] > 0.1
        assert metrics["perplexity"] > 1.0

    def test_planted_topics_checkpoint_gives_full_diversity(self, tmp_path):
        """Embeddings placed exactly on disjoint planted blocks must
        produce fully distinct topics."""
        import ottopics
        from ottopics import init_model, save_checkpoint

        synth = tmp_path / "synth"
        assert run_cli("gen-synth", "--num-docs", "50", "--vocab-size",
                       "200", "--k", "10", "--head-fraction", "0",
                       "--seed", "2", "--out-dir", str(synth)) == 0

        state = init_model(vocab_size=200, num_topics=10, embed_dim=10,
                           hidden_size=8, seed=0)
        state.T[...] = 10.0 * np.eye(10)
        blocks = np.array_split(np.arange(200), 10)
        for k, block in enumerate(blocks):
            for j in block:
                state.W[:, j] = state.T[:, k]
        ckpt = tmp_path / "planted.ckpt"
        save_checkpoint(ckpt, state)

        out = tmp_path / "eval"
        assert run_cli("eval", "--checkpoint", str(ckpt),
                       "--bow", str(synth / "synth.bow"),
                       "--out-dir", str(out)) == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["td"] == 1.0


class TestGradcheckCommand:
    def test_passes_and_writes_report(self, tmp_path, capsys):
        out = tmp_path / "grad"
        code = run_cli("gradcheck", "--points", "2", "--out-dir", str(out))
        assert code == 0
        assert (out / "gradcheck.txt").exists()
        stdout = capsys.readouterr().out
        for name in ("dkm", "dkm_entropy", "ecr", "total"):
            assert name in stdout

    def test_failing_check_exits_three(self, tmp_path, monkeypatch):
        import ottopics.cli as cli_module
        from ottopics.gradcheck import GradCheckRow

        monkeypatch.setattr(
            cli_module, "run_gradcheck",
            lambda **kw: [GradCheckRow("dkm", "W", 0.5, 1e-4)])
        code = run_cli("gradcheck", "--out-dir", str(tmp_path / "g"))
        assert code == 3


class TestExportEmbeddings:
    def test_writes_matrices(self, trained_dir, tmp_path):
        out = tmp_path / "emb"
        code = run_cli("export-embeddings", "--checkpoint",
                       str(trained_dir / "model.ckpt"),
                       "--out-dir", str(out))
        assert code == 0
        from ottopics.numerics import load_matrix_txt
        W = load_matrix_txt(out / "word_embeddings.txt")
        T = load_matrix_txt(out / "topic_embeddings.txt")
        assert W.shape == (8, 40)
        assert T.shape == (8, 4)


class TestConsoleEntry:
    def test_version_flag(self):
        proc = subprocess.run(
            [sys.executable, "-m", "ottopics.cli", "--version"],
            capture_output=True, text=True)
        assert proc.returncode == 0

    def test_thread_cap_env_var(self, tmp_path):
        env = dict(os.environ, OTTOPICS_THREADS="1")
        proc = subprocess.run(
            [sys.executable, "-m", "ottopics.cli", "gen-synth",
             "--num-docs", "20", "--vocab-size", "40", "--k", "4",
             "--out-dir", str(tmp_path / "o")],
            capture_output=True, text=True, env=env)
        assert proc.returncode == 0, proc.stderr
