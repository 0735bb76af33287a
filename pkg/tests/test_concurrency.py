"""Thread-safety smoke tests: the pure operations must give identical
results when hammered from a pool."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ottopics import OtProblem, SinkhornConfig, preprocess, solve, total_loss
from ottopics.model import init_model


def test_concurrent_solves_identical():
    rng = np.random.default_rng(60)
    problem = OtProblem(rng.random((30, 5)), np.full(30, 1 / 30),
                        np.full(5, 0.2))
    with ThreadPoolExecutor(max_workers=4) as pool:
        plans = list(pool.map(lambda _: solve(problem, SinkhornConfig()),
                              range(8)))
    for plan in plans[1:]:
        np.testing.assert_array_equal(plan.plan, plans[0].plan)


def test_concurrent_preprocess_identical():
    docs = ["transport moves words around nicely"] * 5 + ["cats meow loudly"]
    with ThreadPoolExecutor(max_workers=4) as pool:
        outputs = list(pool.map(lambda _: preprocess(list(docs)), range(8)))
    assert all(out == outputs[0] for out in outputs)


def test_concurrent_loss_evaluations_identical():
    rng = np.random.default_rng(61)
    state = init_model(vocab_size=12, num_topics=3, embed_dim=4,
                       hidden_size=5, lambda_ecr=2.0, seed=0)
    X = rng.integers(0, 4, (3, 12)).astype(float)
    X[:, 0] += 1
    noise = rng.standard_normal((3, 3))
    with ThreadPoolExecutor(max_workers=4) as pool:
        outs = list(pool.map(lambda _: total_loss(X, state, noise), range(8)))
    assert all(o.loss == outs[0].loss for o in outs)
