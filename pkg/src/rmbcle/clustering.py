"""Agglomerative task clustering, dendrogram cuts and silhouette model selection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_K_MAX = 10
LINKAGES = ("average", "complete")


@dataclass(frozen=True)
class Merge:
    left: int
    right: int
    distance: float
    size: int


@dataclass(frozen=True)
class Dendrogram:
    """Merge list; leaves are 0..m-1 and merge t creates node m + t."""

    merges: tuple
    n_leaves: int
    linkage: str = "average"

    def to_dict(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "linkage": self.linkage,
            "merges": [[mg.left, mg.right, mg.distance, mg.size] for mg in self.merges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dendrogram":
        merges = tuple(Merge(int(a), int(b), float(h), int(s)) for a, b, h, s in d["merges"])
        return cls(merges, int(d["n_leaves"]), d.get("linkage", "average"))

    def to_scipy(self) -> np.ndarray:
        """(m-1, 4) linkage matrix in scipy's layout."""
        return np.array([[mg.left, mg.right, mg.distance, mg.size] for mg in self.merges], dtype=float)


@dataclass(frozen=True)
class Partition:
    assignment: np.ndarray
    k: int
    mean_silhouette: float = float("nan")

    def clusters(self):
        return [np.flatnonzero(self.assignment == c).tolist() for c in range(self.k)]


def _check_distances(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if D.shape[0] < 2:
        raise ValueError("clustering needs at least two tasks")
    if not np.all(np.isfinite(D)) or np.any(D < 0):
        raise ValueError("distances must be finite and non-negative")
    if not np.array_equal(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if np.any(np.diag(D) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    return D


def upgma(D, linkage: str = "average") -> Dendrogram:
    """Agglomerate the closest pair until one cluster remains.

    Distances to a merged cluster follow the Lance-Williams recurrence:
    size-weighted mean for average linkage, max for complete linkage.
    Equal-distance pairs resolve to the lexicographically smallest
    (node, node) pair.
    """
    if linkage not in LINKAGES:
        raise ValueError(f"linkage must be one of {LINKAGES}")
    D = _check_distances(D)
    m = D.shape[0]
    dist = np.full((2 * m - 1, 2 * m - 1), np.inf)
    dist[:m, :m] = D
    size = np.zeros(2 * m - 1, dtype=np.int64)
    size[:m] = 1
    active = list(range(m))
    merges = []
    for t in range(m - 1):
        idx = np.array(active)
        sub = dist[np.ix_(idx, idx)]
        iu = np.triu_indices(len(idx), 1)
        vals = sub[iu]
        best = np.flatnonzero(vals == vals.min())
        # active is ascending, so row-major triu order is lexicographic
        p = best[0]
        a, b = int(idx[iu[0][p]]), int(idx[iu[1][p]])
        h = float(vals[p])
        new = m + t
        size[new] = size[a] + size[b]
        rest = [c for c in active if c not in (a, b)]
        for c in rest:
            if linkage == "average":
                v = (size[a] * dist[a, c] + size[b] * dist[b, c]) / (size[a] + size[b])
            else:
                v = max(dist[a, c], dist[b, c])
            dist[new, c] = dist[c, new] = v
        merges.append(Merge(a, b, h, int(size[new])))
        active = rest + [new]
    return Dendrogram(tuple(merges), m, linkage)


def canonical_labels(groups, m: int) -> np.ndarray:
    """Label clusters 0..k-1 by ascending smallest member."""
    groups = sorted((sorted(g) for g in groups), key=lambda g: g[0])
    out = np.empty(m, dtype=np.int64)
    for c, g in enumerate(groups):
        out[g] = c
    return out


def relabel(assignment) -> np.ndarray:
    """Canonical form of any labeling (by first occurrence)."""
    a = np.asarray(assignment)
    _, first, inv = np.unique(a, return_index=True, return_inverse=True)
    rank = np.argsort(np.argsort(first))
    return rank[inv].astype(np.int64)


def cut(dendrogram: Dendrogram, k: int) -> Partition:
    """Undo the last k-1 merges."""
    m = dendrogram.n_leaves
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}], got {k}")
    members = {i: [i] for i in range(m)}
    for t, mg in enumerate(dendrogram.merges[: m - k]):
        members[m + t] = members.pop(mg.left) + members.pop(mg.right)
    return Partition(canonical_labels(members.values(), m), k)


def silhouette(D, assignment):
    """Per-task silhouette and its mean.

    a(i) is 0 for singletons; phi(i) = 0 when a(i) = b(i) = 0.
    """
    D = np.asarray(D, dtype=float)
    g = np.asarray(assignment)
    labels = np.unique(g)
    if len(labels) < 2:
        raise ValueError("silhouette needs at least two clusters")
    onehot = (g[:, None] == labels[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    sums = D @ onehot  # (m, k): total distance from i to each cluster
    own = np.searchsorted(labels, g)
    rows = np.arange(len(g))
    own_size = sizes[own]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(own_size > 1, sums[rows, own] / (own_size - 1), 0.0)
    means = sums / sizes
    means[rows, own] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(denom > 0, (b - a) / denom, 0.0)
    return phi, float(phi.mean())


def select_k(dendrogram: Dendrogram, D, k_max: int | None = None) -> Partition:
    """Cut with the highest mean silhouette over k = 2..min(m, k_max); ties -> smallest k."""
    m = dendrogram.n_leaves
    if m < 2:
        raise ValueError("select_k needs at least two tasks")
    k_max = DEFAULT_K_MAX if k_max is None else k_max
    if k_max < 2:
        raise ValueError("k_max must be >= 2")
    best = None
    for k in range(2, min(m, k_max) + 1):
        part = cut(dendrogram, k)
        _, score = silhouette(D, part.assignment)
        if best is None or score > best.mean_silhouette:
            best = Partition(part.assignment, k, score)
    return best


def cluster_tasks(D, k_max: int | None = None, linkage: str = "average"):
    """Dendrogram and the silhouette-selected partition."""
    dendro = upgma(D, linkage)
    return dendro, select_k(dendro, D, k_max)
