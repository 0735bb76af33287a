import numpy as np
import pytest

from ottopics import (
    NumericError,
    OtProblem,
    ShapeError,
    SinkhornConfig,
    ValidationError,
    plan_row_entropy,
    solve,
)

from oracles import exact_transport_cost


def random_problem(rng, v=6, k=3, epsilon=None):
    cost = rng.random((v, k))
    return OtProblem(cost, np.full(v, 1 / v), np.full(k, 1 / k),
                     epsilon=epsilon)


class TestValidation:
    def test_empty_problem(self):
        with pytest.raises(ShapeError):
            OtProblem(np.zeros((0, 3)), np.zeros(0), np.full(3, 1 / 3))

    def test_marginal_shape_mismatch(self):
        with pytest.raises(ShapeError):
            OtProblem(np.ones((2, 2)), np.full(3, 1 / 3), np.full(2, 0.5))

    def test_negative_cost(self):
        with pytest.raises(ValidationError):
            OtProblem(np.array([[-1.0, 0.0]]), np.ones(1), np.full(2, 0.5))

    def test_non_finite_cost(self):
        with pytest.raises(NumericError):
            OtProblem(np.array([[np.nan, 0.0]]), np.ones(1), np.full(2, 0.5))

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            OtProblem(np.ones((2, 2)), np.full(2, 0.4), np.full(2, 0.5))

    def test_weights_must_be_positive(self):
        with pytest.raises(ValidationError):
            OtProblem(np.ones((2, 2)), np.array([1.0, 0.0]), np.full(2, 0.5))

    def test_config_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            SinkhornConfig(max_iterations=0)
        with pytest.raises(ValidationError):
            SinkhornConfig(epsilon=-0.1)


class TestSolve:
    def test_equal_costs_give_uniform_plan(self):
        problem = OtProblem(np.full((2, 2), 3.7), np.full(2, 0.5),
                            np.full(2, 0.5))
        plan = solve(problem, SinkhornConfig())
        np.testing.assert_allclose(plan.plan, np.full((2, 2), 0.25),
                                   atol=1e-12)

    def test_diagonal_cost_forces_identity_coupling(self):
        problem = OtProblem(np.array([[0.0, 1.0], [1.0, 0.0]]),
                            np.full(2, 0.5), np.full(2, 0.5), epsilon=0.001)
        plan = solve(problem, SinkhornConfig())
        np.testing.assert_allclose(np.diag(plan.plan), [0.5, 0.5], atol=1e-3)
        assert plan.plan[0, 1] < 1e-3 and plan.plan[1, 0] < 1e-3

    def test_row_marginals_exact(self):
        rng = np.random.default_rng(10)
        for _ in range(5):
            problem = random_problem(rng, v=20, k=5)
            plan = solve(problem, SinkhornConfig())
            np.testing.assert_allclose(plan.plan.sum(axis=1),
                                       np.full(20, 1 / 20), atol=1e-12)

    def test_column_marginals_within_tolerance(self):
        rng = np.random.default_rng(11)
        cfg = SinkhornConfig(stop_tolerance=0.003)
        for _ in range(5):
            problem = random_problem(rng, v=15, k=4)
            plan = solve(problem, cfg)
            err = np.abs(plan.plan.sum(axis=0) - 1 / 4).sum()
            assert err <= cfg.stop_tolerance
            assert plan.marginal_error == pytest.approx(err, abs=1e-12)

    def test_nonnegative_entries(self):
        rng = np.random.default_rng(12)
        plan = solve(random_problem(rng, v=30, k=6), SinkhornConfig())
        assert np.all(plan.plan >= 0.0)

    def test_cost_within_two_percent_of_lp_optimum(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            problem = random_problem(rng, epsilon=0.001)
            plan = solve(problem, SinkhornConfig())
            entropic = float((problem.cost * plan.plan).sum())
            exact = exact_transport_cost(problem.cost, problem.row_weights,
                                         problem.col_weights)
            assert abs(entropic - exact) <= 0.02 * exact

    def test_entropic_cost_decreases_to_lp_optimum(self):
        """Sharper epsilon approaches the exact cost from above."""
        rng = np.random.default_rng(14)
        problem = random_problem(rng)
        cfg = SinkhornConfig(max_iterations=20000, stop_tolerance=1e-7)
        exact = exact_transport_cost(problem.cost, problem.row_weights,
                                     problem.col_weights)
        costs = []
        for eps in (0.1, 0.01, 0.001):
            plan = solve(OtProblem(problem.cost, problem.row_weights,
                                   problem.col_weights, epsilon=eps), cfg)
            costs.append(float((problem.cost * plan.plan).sum()))
        assert costs[0] >= costs[1] >= costs[2] >= exact - 1e-9
        assert abs(costs[2] - exact) <= 0.02 * exact

    def test_nonuniform_column_weights_fulfilled(self):
        rng = np.random.default_rng(15)
        cost = rng.random((12, 3))
        s = np.array([0.5, 0.3, 0.2])
        plan = solve(OtProblem(cost, np.full(12, 1 / 12), s),
                     SinkhornConfig(stop_tolerance=1e-6))
        np.testing.assert_allclose(plan.plan.sum(axis=0), s, atol=1e-5)

    def test_iteration_cap_returns_partial_result(self):
        rng = np.random.default_rng(16)
        problem = random_problem(rng, v=40, k=8, epsilon=0.001)
        plan = solve(problem, SinkhornConfig(max_iterations=2,
                                             stop_tolerance=1e-12))
        assert plan.iterations_used == 2
        # Rows stay exact even when columns have not converged.
        np.testing.assert_allclose(plan.plan.sum(axis=1),
                                   np.full(40, 1 / 40), atol=1e-12)

    def test_epsilon_falls_back_to_config(self):
        rng = np.random.default_rng(17)
        cost = rng.random((6, 3))
        r, s = np.full(6, 1 / 6), np.full(3, 1 / 3)
        via_problem = solve(OtProblem(cost, r, s, epsilon=0.02),
                            SinkhornConfig())
        via_config = solve(OtProblem(cost, r, s),
                           SinkhornConfig(epsilon=0.02))
        np.testing.assert_allclose(via_problem.plan, via_config.plan,
                                   atol=1e-15)

    def test_deterministic(self):
        rng = np.random.default_rng(18)
        problem = random_problem(rng)
        a = solve(problem, SinkhornConfig())
        b = solve(problem, SinkhornConfig())
        np.testing.assert_array_equal(a.plan, b.plan)


class TestRowEntropy:
    def test_one_hot_row(self):
        plan = np.array([[0.25, 0.0, 0.0]])
        assert plan_row_entropy(plan)[0] == 0.0

    def test_uniform_row(self):
        plan = np.array([[0.1, 0.1, 0.1, 0.1]])
        assert plan_row_entropy(plan)[0] == pytest.approx(np.log(4),
                                                          abs=1e-12)

    def test_sharper_epsilon_means_lower_entropy(self):
        rng = np.random.default_rng(19)
        problem = random_problem(rng, v=20, k=5)
        r, s = problem.row_weights, problem.col_weights
        means = []
        for eps in (1.0, 0.05):
            plan = solve(OtProblem(problem.cost, r, s, epsilon=eps),
                         SinkhornConfig(stop_tolerance=1e-6))
            means.append(plan_row_entropy(plan).mean())
        assert means[1] < means[0]

    def test_monotone_across_epsilon_ladder(self):
        rng = np.random.default_rng(20)
        cfg = SinkhornConfig(max_iterations=5000, stop_tolerance=1e-6)
        for _ in range(3):
            problem = random_problem(rng, v=30, k=8)
            r, s = problem.row_weights, problem.col_weights
            entropies = [
                plan_row_entropy(solve(
                    OtProblem(problem.cost, r, s, epsilon=eps), cfg)).mean()
                for eps in (1.0, 0.1, 0.05)
            ]
            assert entropies[0] > entropies[1] > entropies[2]

    def test_plan_dump_uses_matrix_format(self, tmp_path):
        rng = np.random.default_rng(21)
        plan = solve(random_problem(rng), SinkhornConfig())
        path = tmp_path / "plan.txt"
        plan.dump(path)
        header = path.read_text().splitlines()[0]
        assert header == "6 3"
