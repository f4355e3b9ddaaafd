import numpy as np
import pytest
from hypothesis import given, strategies as st

from rmbcle.boosting import fit
from rmbcle.synth import generate, benchmark_preset
from rmbcle.theory import (
    DiscreteTask,
    random_discrete_task,
    verify_classification_bound,
    verify_regression_decomposition,
)


def test_exact_predictor_without_noise():
    f = lambda X: np.sin(X[:, 0])
    r = verify_regression_decomposition(f, f, 0.0, n_mc=1000, dim=2, rng=0)
    assert r.risk == 0 and r.mismatch == 0 and r.residual == 0 and r.holds()


def test_exact_predictor_with_noise():
    f = lambda X: X.sum(axis=1)
    r = verify_regression_decomposition(f, f, 0.3, n_mc=100_000, dim=3, rng=1)
    assert abs(r.risk - 0.09) <= 3 * r.standard_error
    assert r.mismatch == 0 and r.holds()


def test_trained_predictor_decomposes():
    coll, truth = generate(benchmark_preset(seed=0, n_train=100, n_test=0, noise=0.3))
    model = fit(coll[6].features, coll[6].targets, 30)
    r = verify_regression_decomposition(truth.task_function(2), model.predict, 0.3, n_mc=100_000, dim=5, rng=2)
    assert r.mismatch > 0 and r.holds()
    assert r.risk == pytest.approx(r.mismatch + r.noise, abs=5 * r.standard_error)


def test_sampler_or_dim_required():
    with pytest.raises(ValueError):
        verify_regression_decomposition(np.sum, np.sum, 0.0)


def test_bound_equality_case():
    task = DiscreteTask(np.array([0.5, 0.5]), np.array([[0.9, 0.1], [0.2, 0.8]]))
    r = verify_classification_bound(task, task.bayes())
    assert r.excess == 0 and r.disagreement == 0


def test_bound_constant_classifier():
    task = DiscreteTask(np.array([0.5, 0.5]), np.array([[0.1, 0.9], [0.8, 0.2]]))
    r = verify_classification_bound(task, np.array([0, 0]))
    # Bayes predicts (1, 0); the constant rule errs only at the first point
    assert r.bayes_risk == pytest.approx(0.5 * 0.1 + 0.5 * 0.2)
    assert r.excess == pytest.approx(0.5 * (0.9 - 0.1))
    assert r.disagreement == pytest.approx(0.5)
    assert r.holds() and r.slack == pytest.approx(0.1)


def test_bound_from_other_task():
    g = np.random.default_rng(0)
    ti, tj = random_discrete_task(g, 5, 3), random_discrete_task(g, 5, 3)
    assert verify_classification_bound(ti, task_j=tj).holds()
    with pytest.raises(ValueError):
        verify_classification_bound(ti)


@given(seed=st.integers(0, 2**32), s=st.integers(1, 8), q=st.integers(2, 4))
def test_bound_never_violated(seed, s, q):
    g = np.random.default_rng(seed)
    task = random_discrete_task(g, s, q)
    r = verify_classification_bound(task, g.integers(0, q, s))
    assert r.holds(tol=1e-12) and r.excess >= -1e-12


@pytest.mark.parametrize("p,P", [
    (np.array([0.5, 0.6]), np.array([[1.0, 0.0], [0.0, 1.0]])),
    (np.array([0.5, 0.5]), np.array([[0.7, 0.7], [0.0, 1.0]])),
    (np.array([1.0]), np.array([[1.2, -0.2]])),
])
def test_unnormalized_distributions_rejected(p, P):
    with pytest.raises(ValueError):
        DiscreteTask(p, P)
