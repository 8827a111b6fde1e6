"""Grouping summaries by meaning: boilerplate stripping, averaged word
vectors, and seeded k-means with nearest-to-centroid representatives."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

# Lead-in phrases annotators use that carry no content.
BOILERPLATE_PHRASES = (
    ("learn", "how", "to"),
    ("learn", "to"),
    ("how", "to"),
)


def strip_boilerplate(summary: Sequence[str]) -> list[str]:
    """Remove leading boilerplate phrases (longest first, until none match)."""
    tokens = list(summary)
    changed = True
    while changed:
        changed = False
        for phrase in BOILERPLATE_PHRASES:
            if tuple(tokens[: len(phrase)]) == phrase:
                tokens = tokens[len(phrase) :]
                changed = True
                break
    return tokens


@dataclass
class WordVectors:
    vectors: dict[str, np.ndarray]
    dim: int

    @classmethod
    def load(cls, path: str | Path) -> "WordVectors":
        """Read text-format vectors: one line per token, D decimals each."""
        vectors: dict[str, np.ndarray] = {}
        dim = -1
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                token, values = parts[0], parts[1:]
                if dim == -1:
                    dim = len(values)
                elif len(values) != dim:
                    raise ValueError(
                        f"line {lineno}: expected {dim} dimensions, got {len(values)}"
                    )
                vectors[token] = np.asarray([float(v) for v in values])
        if dim == -1:
            raise ValueError("empty word-vector file")
        return cls(vectors, dim)


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        text = resources.files("cpkit").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def embed_summary(
    summary: Sequence[str], vectors: WordVectors, stopwords: frozenset[str]
) -> np.ndarray | None:
    """Mean vector of in-vocabulary non-stopword tokens; None if none qualify."""
    rows = [
        vectors.vectors[token]
        for token in summary
        if token not in stopwords and token in vectors.vectors
    ]
    if not rows:
        return None
    return np.mean(rows, axis=0)


@dataclass
class KMeansResult:
    centroids: np.ndarray  # (K, dim)
    assignment: np.ndarray  # (N,) int
    inertia: float
    iterations: int


def _inertia(items: np.ndarray, centroids: np.ndarray, assignment: np.ndarray) -> float:
    diffs = items - centroids[assignment]
    return float((diffs * diffs).sum())


def _plus_plus_init(items: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = items.shape[0]
    centroids = np.empty((k, items.shape[1]), dtype=float)
    first = int(rng.integers(n))
    centroids[0] = items[first]
    dists = ((items - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = dists.sum()
        if total <= 0:
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=dists / total))
        centroids[i] = items[choice]
        dists = np.minimum(dists, ((items - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(
    items: Sequence[np.ndarray] | np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
) -> KMeansResult:
    """Seeded k-means++ with Lloyd iterations to an assignment fixpoint.

    Empty clusters are repaired by reseeding to the point farthest from its
    centroid. Inertia is asserted non-increasing across iterations.
    """
    data = np.asarray(items, dtype=float)
    if data.ndim != 2:
        raise ValueError("items must be a (N, dim) array")
    n = data.shape[0]
    if n < k:
        raise ValueError(f"need at least k={k} items, got {n}")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(data, k, rng)

    def nearest(points: np.ndarray) -> np.ndarray:
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)

    assignment = nearest(data)
    inertia = _inertia(data, centroids, assignment)
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        for cluster in range(k):
            members = data[assignment == cluster]
            if len(members):
                centroids[cluster] = members.mean(axis=0)
        # Reseed empty clusters to the farthest remaining point.
        residuals = ((data - centroids[assignment]) ** 2).sum(axis=1)
        for cluster in range(k):
            if not (assignment == cluster).any():
                farthest = int(residuals.argmax())
                centroids[cluster] = data[farthest]
                residuals[farthest] = 0.0
        new_assignment = nearest(data)
        new_inertia = _inertia(data, centroids, new_assignment)
        tolerance = 1e-9 * max(1.0, inertia)
        assert new_inertia <= inertia + tolerance, "inertia increased during Lloyd step"
        done = bool((new_assignment == assignment).all())
        assignment, inertia = new_assignment, new_inertia
        if done:
            break
    return KMeansResult(
        centroids=centroids, assignment=assignment, inertia=inertia, iterations=iterations
    )


def representatives(
    result: KMeansResult,
    items: Sequence[np.ndarray] | np.ndarray,
    texts: Sequence[str],
    n: int = 5,
) -> list[list[str]]:
    """Per cluster, the ``n`` texts nearest its centroid (ties by index)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    data = np.asarray(items, dtype=float)
    out: list[list[str]] = []
    for cluster in range(result.centroids.shape[0]):
        indices = np.nonzero(result.assignment == cluster)[0]
        dists = ((data[indices] - result.centroids[cluster]) ** 2).sum(axis=1)
        ranked = sorted(zip(dists, indices), key=lambda pair: (pair[0], pair[1]))
        out.append([texts[i] for _, i in ranked[:n]])
    return out


def cluster_report(
    result: KMeansResult, reps: list[list[str]]
) -> dict:
    sizes = np.bincount(result.assignment, minlength=result.centroids.shape[0])
    return {
        "K": int(result.centroids.shape[0]),
        "inertia": result.inertia,
        "iterations": result.iterations,
        "clusters": [
            {
                "centroid_norm": float(np.linalg.norm(result.centroids[i])),
                "size": int(sizes[i]),
                "representatives": reps[i],
            }
            for i in range(result.centroids.shape[0])
        ],
    }
