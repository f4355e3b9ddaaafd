"""Numerical checks of the cross-task risk decomposition and the excess-risk bound."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DecompositionReport:
    risk: float  # Monte-Carlo E[(Y - F_j(X))^2] under task i
    mismatch: float  # E[(eta_i(X) - F_j(X))^2]
    noise: float  # sigma^2 (known)
    noise_estimate: float  # mean of the drawn eps^2
    residual: float  # risk - mismatch - noise
    standard_error: float
    n_samples: int

    @property
    def z_score(self) -> float:
        if self.standard_error == 0:
            return 0.0 if self.residual == 0 else np.inf
        return abs(self.residual) / self.standard_error

    def holds(self, n_se: float = 3.0) -> bool:
        return abs(self.residual) <= n_se * self.standard_error


def verify_regression_decomposition(
    eta,
    predictor,
    sigma: float,
    n_mc: int = 100_000,
    dim: int | None = None,
    sampler=None,
    rng=None,
) -> DecompositionReport:
    """Monte-Carlo estimate of R_i(F_j) against mismatch + sigma^2.

    ``eta`` is the task's regression function and ``predictor`` the
    transferred model, both mapping (n, d) -> (n,). Inputs come from
    ``sampler(rng, n)`` or uniformly from [-1, 1]^dim.
    """
    rng = np.random.default_rng(rng)
    if sampler is None:
        if dim is None:
            raise ValueError("give dim or a sampler")
        X = rng.uniform(-1.0, 1.0, (n_mc, dim))
    else:
        X = sampler(rng, n_mc)
    eps = sigma * rng.standard_normal(n_mc)
    f = np.asarray(eta(X), dtype=float)
    F = np.asarray(predictor(X), dtype=float)
    Y = f + eps
    loss = (Y - F) ** 2
    gap = (f - F) ** 2
    term = loss - gap - sigma**2
    se = float(np.std(term, ddof=1) / np.sqrt(n_mc)) if n_mc > 1 else float("inf")
    return DecompositionReport(
        risk=float(loss.mean()),
        mismatch=float(gap.mean()),
        noise=float(sigma**2),
        noise_estimate=float(np.mean(eps**2)),
        residual=float(term.mean()),
        standard_error=se,
        n_samples=n_mc,
    )


@dataclass(frozen=True)
class DiscreteTask:
    """Finite-support joint law: P(X = x) and P(Y = k | X = x)."""

    p_x: np.ndarray  # (s,)
    posterior: np.ndarray  # (s, K)

    def __post_init__(self):
        p = np.asarray(self.p_x, dtype=float)
        P = np.asarray(self.posterior, dtype=float)
        if P.ndim != 2 or P.shape[0] != p.shape[0]:
            raise ValueError("posterior must be (support, classes)")
        if np.any(p < 0) or np.any(P < 0):
            raise ValueError("probabilities must be non-negative")
        if not np.isclose(p.sum(), 1.0, atol=1e-12):
            raise ValueError(f"P(X) sums to {p.sum()}, not 1")
        if not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("each P(Y | X = x) must sum to 1")
        object.__setattr__(self, "p_x", p)
        object.__setattr__(self, "posterior", P)

    def bayes(self) -> np.ndarray:
        return np.argmax(self.posterior, axis=1)

    def risk(self, classifier) -> float:
        """0-1 risk of a classifier given as labels over the support."""
        c = np.asarray(classifier)
        return float(np.dot(self.p_x, 1.0 - self.posterior[np.arange(len(c)), c]))


@dataclass(frozen=True)
class BoundReport:
    risk: float
    bayes_risk: float
    disagreement: float

    @property
    def excess(self) -> float:
        return self.risk - self.bayes_risk

    @property
    def slack(self) -> float:
        return self.disagreement - self.excess

    def holds(self, tol: float = 1e-12) -> bool:
        return self.excess <= self.disagreement + tol


def verify_classification_bound(task_i: DiscreteTask, classifier=None, task_j: DiscreteTask | None = None) -> BoundReport:
    """Exact R_i(F_j) - R_i(b_i) versus Pr_i(F_j != b_i).

    ``classifier`` gives F_j's labels over the support; if omitted, F_j is
    the Bayes rule of ``task_j``.
    """
    if classifier is None:
        if task_j is None:
            raise ValueError("give a classifier or task_j")
        classifier = task_j.bayes()
    classifier = np.asarray(classifier)
    b = task_i.bayes()
    return BoundReport(
        risk=task_i.risk(classifier),
        bayes_risk=task_i.risk(b),
        disagreement=float(np.dot(task_i.p_x, classifier != b)),
    )


def random_discrete_task(rng, support: int, n_classes: int) -> DiscreteTask:
    p = rng.dirichlet(np.ones(support))
    P = rng.dirichlet(np.ones(n_classes), size=support)
    return DiscreteTask(p, P)
