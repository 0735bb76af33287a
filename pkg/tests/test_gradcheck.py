import ottopics.gradcheck as gradcheck_module
from ottopics.gradcheck import format_report, run_gradcheck
from ottopics.regularizers import RegularizerOutput, dkm_loss


class TestRunGradcheck:
    def test_fresh_build_passes(self):
        rows = run_gradcheck(points=3, seed=0)
        assert all(r.passed for r in rows), format_report(rows)

    def test_covers_all_losses(self):
        rows = run_gradcheck(points=1, seed=1)
        names = {r.loss_name for r in rows}
        assert {"dkm", "dkm_entropy", "ecr", "total"} <= names
        assert "topic_model" in names

    def test_reports_per_parameter_group(self):
        rows = run_gradcheck(points=1, seed=2)
        groups = {r.param_group for r in rows if r.loss_name == "total"}
        assert {"enc.w1", "enc.b_mu", "W", "T"} <= groups

    def test_perturbed_gradient_detected(self, monkeypatch):
        """Corrupting one analytic gradient must flip its rows to FAIL."""
        def broken(W, T, tau=1.0):
            out = dkm_loss(W, T, tau)
            return RegularizerOutput(loss=out.loss,
                                     grad_W=out.grad_W + 0.05,
                                     grad_T=out.grad_T)

        monkeypatch.setattr(gradcheck_module, "dkm_loss", broken)
        rows = run_gradcheck(points=2, seed=0)
        dkm_rows = {r.param_group: r for r in rows if r.loss_name == "dkm"}
        assert not dkm_rows["W"].passed
        assert dkm_rows["T"].passed

    def test_deterministic_across_runs(self):
        a = run_gradcheck(points=2, seed=5)
        b = run_gradcheck(points=2, seed=5)
        assert [(r.loss_name, r.param_group, r.max_rel_err) for r in a] == \
               [(r.loss_name, r.param_group, r.max_rel_err) for r in b]


class TestFormatReport:
    def test_mentions_status_and_counts(self):
        rows = run_gradcheck(points=1, seed=3)
        report = format_report(rows)
        assert "PASS" in report
        assert f"{len(rows)}/{len(rows)} gradient checks passed" in report
