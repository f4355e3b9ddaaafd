"""Gradient boosting over decision stumps.

Squared error for regression, softmax cross-entropy for classification
(one stump per class per round), and the two-block shared/specific
multi-task variant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import MultiTaskCollection, ProblemKind

DEFAULT_LEARNING_RATE = 0.1
_REL_GAIN_TOL = 1e-12


# -- losses ------------------------------------------------------------------


class SquaredError:
    """0.5 * (y - F)^2 on a single score column."""

    n_outputs = 1

    def init_scores(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        # shifting by y[0] keeps the mean of constant targets exact
        return np.array([y[0] + np.mean(y - y[0])])

    def loss(self, y, F) -> float:
        return 0.5 * float(np.mean((np.asarray(y, float) - F[:, 0]) ** 2))

    def pointwise_loss(self, y, F) -> np.ndarray:
        return 0.5 * (np.asarray(y, float) - F[:, 0]) ** 2

    def negative_gradient(self, y, F) -> np.ndarray:
        return (np.asarray(y, float) - F[:, 0])[:, None]


def softmax(F: np.ndarray) -> np.ndarray:
    Z = F - F.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def log_softmax(F: np.ndarray) -> np.ndarray:
    Z = F - F.max(axis=1, keepdims=True)
    return Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))


class CrossEntropy:
    """Multinomial deviance over ``n_classes`` score columns."""

    def __init__(self, n_classes: int):
        if n_classes < 2:
            raise ValueError("cross-entropy needs at least two classes")
        self.n_outputs = n_classes

    def init_scores(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        n = len(y)
        prior = np.bincount(y, minlength=self.n_outputs)[: self.n_outputs] / n
        return np.log(np.maximum(prior, 1.0 / (2 * n)))

    def pointwise_loss(self, y, F) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        return -log_softmax(F)[np.arange(len(y)), y]

    def loss(self, y, F) -> float:
        return float(np.mean(self.pointwise_loss(y, F)))

    def negative_gradient(self, y, F) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        G = -softmax(F)
        G[np.arange(len(y)), y] += 1.0
        return G


def make_loss(kind: ProblemKind, n_classes: int = 0):
    if ProblemKind(kind) is ProblemKind.REGRESSION:
        return SquaredError()
    return CrossEntropy(n_classes)


# -- stumps ------------------------------------------------------------------


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    left: float
    right: float

    @property
    def is_degenerate(self) -> bool:
        return self.threshold == np.inf

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.where(X[:, self.feature] <= self.threshold, self.left, self.right)


class SplitSearcher:
    """Exact greedy split search with features sorted once up front."""

    def __init__(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("need a non-empty 2-d feature matrix")
        self.n, self.d = X.shape
        self.order = np.argsort(X, axis=0, kind="stable")
        xs = np.take_along_axis(X, self.order, axis=0)
        lo, hi = xs[:-1], xs[1:]
        self.valid = hi > lo
        mid = 0.5 * (lo + hi)
        # adjacent floats: the midpoint can round up onto the right value
        self.thresholds = np.where(mid < hi, mid, lo)
        self.any_valid = bool(self.valid.any())
        self._left_counts = np.arange(1, self.n, dtype=float)[:, None]

    def fit(self, residuals, weights=None) -> Stump:
        r = np.asarray(residuals, dtype=float)
        if r.shape != (self.n,):
            raise ValueError(f"expected {self.n} residuals, got shape {r.shape}")
        if weights is None:
            W = float(self.n)
            mean = r[0] + np.mean(r - r[0])
            rc = r - mean
            base = float(np.dot(rc, rc))
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != r.shape or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be non-negative, aligned and not all zero")
            W = float(w.sum())
            mean = r[0] + np.dot(w, r - r[0]) / W
            rc = r - mean
            base = float(np.dot(w, rc * rc))
        degenerate = Stump(0, np.inf, float(mean), float(mean))
        if not self.any_valid or base <= 0.0:
            return degenerate

        wr = rc if weights is None else w * rc
        S_L = np.cumsum(wr[self.order], axis=0)[:-1]
        S = S_L[-1] + wr[self.order[-1]]
        if weights is None:
            W_L = self._left_counts
        else:
            W_L = np.cumsum(w[self.order], axis=0)[:-1]
        W_R = W - W_L
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = S_L**2 / W_L + (S - S_L) ** 2 / W_R - S**2 / W
        gain = np.where(self.valid & (W_L > 0) & (W_R > 0), gain, -np.inf)

        flat = gain.T.ravel()  # feature-major: smallest feature, then threshold
        top = flat.max()
        if not top > _REL_GAIN_TOL * base:
            return degenerate
        # gains equal up to summation order count as ties
        best = int(np.argmax(flat >= top - _REL_GAIN_TOL * base))
        j, p = divmod(best, self.n - 1)
        sl = S_L[p, j]
        wl = W_L[p, 0] if weights is None else W_L[p, j]
        return Stump(
            feature=j,
            threshold=float(self.thresholds[p, j]),
            left=float(mean + sl / wl),
            right=float(mean + (S[j] - sl) / (W - wl)),
        )


def fit_stump(features, residuals, weights=None) -> Stump:
    """Least-squares depth-1 tree over all features and midpoint thresholds.

    Leaf values are (weighted) residual means; when no split lowers the
    SSE the stump is degenerate (threshold +inf, both leaves = mean).
    """
    features = np.asarray(features, dtype=float)
    if features.ndim != 2 or features.shape[0] == 0:
        raise ValueError("fit_stump needs at least one row")
    if len(residuals) != features.shape[0]:
        raise ValueError("features and residuals disagree on row count")
    return SplitSearcher(features).fit(residuals, weights)


# -- boosted model -----------------------------------------------------------


@dataclass
class BoostedModel:
    """Additive stump ensemble: F(x) = init + lr * sum_t h_t(x).

    Stage arrays have shape (n_rounds, n_outputs): one stump per score
    column per round.
    """

    kind: ProblemKind
    n_features: int
    learning_rate: float
    init: np.ndarray
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_classes: int = 0
    train_loss: list = field(default_factory=list, compare=False, repr=False)

    @property
    def n_rounds(self) -> int:
        return self.feature.shape[0]

    @property
    def n_outputs(self) -> int:
        return len(self.init)

    @property
    def n_stumps(self) -> int:
        return self.feature.size

    def stump(self, t: int, k: int = 0) -> Stump:
        return Stump(int(self.feature[t, k]), float(self.threshold[t, k]), float(self.left[t, k]), float(self.right[t, k]))

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return X

    def raw_scores(self, X) -> np.ndarray:
        """(n, n_outputs) additive scores."""
        X = self._check(X)
        F = np.tile(self.init, (X.shape[0], 1))
        if self.n_rounds == 0:
            return F
        T, K = self.feature.shape
        cols = X[:, self.feature.ravel()]
        h = np.where(cols <= self.threshold.ravel(), self.left.ravel(), self.right.ravel())
        return F + self.learning_rate * h.reshape(-1, T, K).sum(axis=1)

    def staged_raw_scores(self, X, rounds) -> list:
        """``raw_scores`` of ``truncated(n)`` for each n in ``rounds``, sharing
        one pass over the stumps."""
        X = self._check(X)
        rounds = [int(n) for n in rounds]
        if any(not 0 <= n <= self.n_rounds for n in rounds):
            raise ValueError(f"rounds must lie in [0, {self.n_rounds}]")
        F = np.tile(self.init, (X.shape[0], 1))
        T, K = self.feature.shape
        if T == 0:
            return [F.copy() for _ in rounds]
        cols = X[:, self.feature.ravel()]
        h = np.where(cols <= self.threshold.ravel(), self.left.ravel(), self.right.ravel()).reshape(-1, T, K)
        # same reduction as raw_scores on the truncated model
        return [F.copy() if n == 0 else F + self.learning_rate * h[:, :n].sum(axis=1) for n in rounds]

    def decision_function(self, X) -> np.ndarray:
        F = self.raw_scores(X)
        return F[:, 0] if self.kind is ProblemKind.REGRESSION else F

    def predict_proba(self, X) -> np.ndarray:
        if self.kind is not ProblemKind.CLASSIFICATION:
            raise TypeError("predict_proba is only defined for classifiers")
        return softmax(self.raw_scores(X))

    def predict(self, X) -> np.ndarray:
        F = self.raw_scores(X)
        if self.kind is ProblemKind.REGRESSION:
            return F[:, 0]
        return np.argmax(F, axis=1)  # first maximum: ties go to the smaller class

    def truncated(self, n_rounds: int) -> "BoostedModel":
        """The model after its first ``n_rounds`` rounds."""
        if not 0 <= n_rounds <= self.n_rounds:
            raise ValueError(f"cannot truncate {self.n_rounds} rounds to {n_rounds}")
        s = slice(0, n_rounds)
        return BoostedModel(
            self.kind, self.n_features, self.learning_rate, self.init,
            self.feature[s], self.threshold[s], self.left[s], self.right[s],
            self.n_classes, list(self.train_loss[: n_rounds + 1]),
        )

    def to_dict(self) -> dict:
        thr = [[None if np.isinf(v) else float(v) for v in row] for row in self.threshold]
        return {
            "type": "boosted",
            "problem_kind": self.kind.value,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "learning_rate": self.learning_rate,
            "init": self.init.tolist(),
            "stages": {
                "feature": self.feature.tolist(),
                "threshold": thr,
                "left": self.left.tolist(),
                "right": self.right.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedModel":
        K = len(d["init"])
        st = d["stages"]
        thr = np.array([[np.inf if v is None else v for v in row] for row in st["threshold"]], dtype=float)
        return cls(
            kind=ProblemKind(d["problem_kind"]),
            n_features=int(d["n_features"]),
            learning_rate=float(d["learning_rate"]),
            init=np.array(d["init"], dtype=float),
            feature=np.array(st["feature"], dtype=np.int64).reshape(-1, K),
            threshold=thr.reshape(-1, K),
            left=np.array(st["left"], dtype=float).reshape(-1, K),
            right=np.array(st["right"], dtype=float).reshape(-1, K),
            n_classes=int(d.get("n_classes", 0)),
        )


def fit(
    X,
    y,
    n_rounds: int,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    kind: ProblemKind = ProblemKind.REGRESSION,
    n_classes: int = 0,
    base_scores=None,
) -> BoostedModel:
    """Fit ``n_rounds`` of first-order boosting.

    With ``base_scores`` (an (n, K) array, e.g. another model's outputs)
    boosting continues from those scores and the returned model carries a
    zero init, so it holds only the additional stages.
    """
    kind = ProblemKind(kind)
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must lie in (0, 1]")
    if n_rounds < 0:
        raise ValueError("n_rounds must be non-negative")
    X = np.asarray(X, dtype=float)
    if kind is ProblemKind.CLASSIFICATION:
        y = np.asarray(y, dtype=np.int64)
        if n_classes == 0:
            n_classes = int(y.max()) + 1
        if n_classes < 2:
            raise ValueError("classification needs at least two classes (only one present)")
    else:
        y = np.asarray(y, dtype=float)
        n_classes = 0
    if X.ndim != 2 or X.shape[0] != len(y) or len(y) == 0:
        raise ValueError("X must be (n, d) with n == len(y) > 0")
    loss = make_loss(kind, n_classes)
    K = loss.n_outputs

    if base_scores is None:
        init = loss.init_scores(y)
        F = np.tile(init, (len(y), 1))
    else:
        init = np.zeros(K)
        F = np.array(base_scores, dtype=float).reshape(len(y), K)

    feat = np.zeros((n_rounds, K), dtype=np.int64)
    thr = np.zeros((n_rounds, K))
    lv = np.zeros((n_rounds, K))
    rv = np.zeros((n_rounds, K))
    trace = [loss.loss(y, F)]
    searcher = SplitSearcher(X) if n_rounds > 0 else None
    for t in range(n_rounds):
        G = loss.negative_gradient(y, F)
        step = np.empty_like(F)
        for k in range(K):
            s = searcher.fit(G[:, k])
            feat[t, k], thr[t, k], lv[t, k], rv[t, k] = s.feature, s.threshold, s.left, s.right
            step[:, k] = np.where(X[:, s.feature] <= s.threshold, s.left, s.right)
        F = F + learning_rate * step
        trace.append(loss.loss(y, F))

    return BoostedModel(kind, X.shape[1], learning_rate, init, feat, thr, lv, rv, n_classes, trace)


def fit_task(task, n_rounds: int, learning_rate=DEFAULT_LEARNING_RATE, n_classes: int = 0) -> BoostedModel:
    return fit(task.features, task.targets, n_rounds, learning_rate, task.kind, n_classes)


# -- two-block multi-task boosting -------------------------------------------


@dataclass
class MtgbModel:
    """Shared block on pooled tasks followed by per-task specific blocks."""

    shared: BoostedModel
    specific: dict
    block_sizes: tuple

    @property
    def kind(self) -> ProblemKind:
        return self.shared.kind

    @property
    def task_ids(self):
        return sorted(self.specific)

    def raw_scores(self, task_id: int, X) -> np.ndarray:
        if task_id not in self.specific:
            raise KeyError(f"task {task_id} unknown to this MTGB model")
        return self.shared.raw_scores(X) + self.specific[task_id].raw_scores(X)

    def predict(self, task_id: int, X) -> np.ndarray:
        F = self.raw_scores(task_id, X)
        if self.kind is ProblemKind.REGRESSION:
            return F[:, 0]
        return np.argmax(F, axis=1)

    def predict_proba(self, task_id: int, X) -> np.ndarray:
        return softmax(self.raw_scores(task_id, X))

    def truncated(self, n_specific: int) -> "MtgbModel":
        return MtgbModel(
            self.shared,
            {t: m.truncated(n_specific) for t, m in self.specific.items()},
            (self.block_sizes[0], n_specific),
        )

    def to_dict(self) -> dict:
        return {
            "type": "mtgb",
            "block_sizes": list(self.block_sizes),
            "shared": self.shared.to_dict(),
            "specific": {str(t): m.to_dict() for t, m in self.specific.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MtgbModel":
        return cls(
            BoostedModel.from_dict(d["shared"]),
            {int(t): BoostedModel.from_dict(m) for t, m in d["specific"].items()},
            tuple(d["block_sizes"]),
        )


def fit_mtgb(
    collection: MultiTaskCollection,
    n_shared: int,
    n_specific: int,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    task_ids=None,
) -> MtgbModel:
    """Shared rounds on the row-concatenation of tasks, then per-task rounds
    fitted to each task's gradients starting from the shared outputs."""
    if n_shared < 0 or n_specific < 0:
        raise ValueError("block sizes must be non-negative")
    ids = sorted(range(collection.n_tasks) if task_ids is None else task_ids)
    if not ids:
        raise ValueError("MTGB needs at least one task")
    X, y, _ = collection.pooled(ids)
    shared = fit(X, y, n_shared, learning_rate, collection.kind, collection.n_classes)
    specific = {}
    for i in ids:
        t = collection[i]
        base = shared.raw_scores(t.features)
        specific[i] = fit(t.features, t.targets, n_specific, learning_rate, t.kind, collection.n_classes, base_scores=base)
    return MtgbModel(shared, specific, (n_shared, n_specific))


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "boosted":
        return BoostedModel.from_dict(d)
    if kind == "mtgb":
        return MtgbModel.from_dict(d)
    raise ValueError(f"unknown model type {kind!r}")
