"""
Sub-categorization - k-means over property values.

Clusters are seeded with k-means++ and refined with Lloyd iterations. After
convergence the clusters are put in canonical order (ascending signed centroid
norm) so the symbol ``<property>_0`` always names the smallest degree, and
every point is assigned to its nearest canonical centroid, ties going to the
lower index.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from concept_engine.errors import ClusteringError
from knowledge.conceptualize import HoldsRelation, QualitySymbol

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClusterModel:
    """Canonically ordered centroids of one property's clustering."""

    property_label: str
    eta: int
    centroids: Tuple[Tuple[float, ...], ...]
    seed: int
    inertia: float = 0.0
    iterations: int = 0
    inertia_history: Tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if len(self.centroids) != self.eta:
            raise ValueError(f"{self.property_label}: {len(self.centroids)} centroids for eta={self.eta}")

    @property
    def dimension(self) -> int:
        return len(self.centroids[0])

    def symbols(self) -> List[QualitySymbol]:
        return [QualitySymbol(self.property_label, i) for i in range(self.eta)]

    def assign(self, values) -> np.ndarray:
        return assign_nearest(_as_matrix(values), np.asarray(self.centroids, dtype=float))


def _as_matrix(values) -> np.ndarray:
    data = np.asarray(values, dtype=float)
    if data.ndim == 1:
        data = data[:, None]
    return data


def _squared_distances(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((data[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def assign_nearest(data: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per row; argmin keeps the lowest index on ties."""
    return np.argmin(_squared_distances(data, centroids), axis=1)


def inertia(data: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(((data - centroids[labels]) ** 2).sum())


# =============================================================================
# k-means
# =============================================================================

def kmeans_plusplus_init(data: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick k starting centroids, each drawn with probability proportional to D(x)^2."""
    n = len(data)
    centroids = [data[rng.integers(n)]]
    closest = ((data - centroids[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            raise ClusteringError("k-means++ ran out of distinct points")
        chosen = data[rng.choice(n, p=closest / total)]
        centroids.append(chosen)
        closest = np.minimum(closest, ((data - chosen) ** 2).sum(axis=1))
    return np.array(centroids, dtype=float)


def lloyd(data: np.ndarray, initial: np.ndarray, max_iterations: int = 300):
    """
    Lloyd refinement from given centroids.

    An emptied cluster is re-seated on the point farthest from its centroid.

    Returns:
        (centroids, labels, inertia history, iterations run)
    """
    centroids = np.array(initial, dtype=float)
    labels = assign_nearest(data, centroids)
    history = [inertia(data, centroids, labels)]
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        updated = centroids.copy()
        spare = ((data - centroids[labels]) ** 2).sum(axis=1)
        for j in range(len(centroids)):
            members = labels == j
            if members.any():
                updated[j] = data[members].mean(axis=0)
            else:
                far = int(np.argmax(spare))
                updated[j] = data[far]
                spare[far] = -1.0
        centroids = updated
        new_labels = assign_nearest(data, centroids)
        history.append(inertia(data, centroids, new_labels))
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if converged:
            break
    return centroids, labels, history, iterations


def canonical_order(centroids: np.ndarray) -> List[int]:
    """Cluster order by signed norm (sign of the component sum), then lexicographically."""
    def key(j: int):
        c = centroids[j]
        return (float(np.sign(c.sum()) * np.linalg.norm(c)), tuple(c.tolist()))
    return sorted(range(len(centroids)), key=key)


def subcategorize(
    values,
    instance_ids: Sequence[str],
    property_label: str,
    eta: int,
    seed: int = 0,
    max_iterations: int = 300,
    initial_centroids: Optional[np.ndarray] = None,
) -> Tuple[ClusterModel, HoldsRelation]:
    """
    Cluster one property's per-instance values into ``eta`` quality symbols.

    Args:
        values: (n,) or (n, d) per-instance property values
        instance_ids: Identifier of each row
        property_label: Name used in the generated symbols
        eta: Number of clusters
        seed: Seed of the k-means++ initialisation
        max_iterations: Lloyd iteration cap
        initial_centroids: Start from these instead of k-means++

    Returns:
        (ClusterModel, holds fragment for this property)

    Raises:
        ClusteringError: eta < 2 or fewer distinct points than eta
    """
    data = _as_matrix(values)
    if eta < 2:
        raise ClusteringError(f"{property_label}: eta must be at least 2, got {eta}")
    if len(data) != len(instance_ids):
        raise ClusteringError(f"{property_label}: {len(data)} rows for {len(instance_ids)} instances")
    if not np.all(np.isfinite(data)):
        raise ClusteringError(f"{property_label}: values must be finite")
    distinct = len(np.unique(data, axis=0)) if len(data) else 0
    if distinct < eta:
        raise ClusteringError(f"{property_label}: {distinct} distinct value(s) cannot form {eta} clusters")

    if initial_centroids is None:
        initial = kmeans_plusplus_init(data, eta, np.random.default_rng(seed))
    else:
        initial = _as_matrix(initial_centroids)
        if initial.shape != (eta, data.shape[1]):
            raise ClusteringError(f"{property_label}: initial centroids must have shape {(eta, data.shape[1])}")

    centroids, _, history, iterations = lloyd(data, initial, max_iterations)
    centroids = centroids[canonical_order(centroids)]
    labels = assign_nearest(data, centroids)

    model = ClusterModel(
        property_label=property_label,
        eta=eta,
        centroids=tuple(tuple(float(v) for v in c) for c in centroids),
        seed=seed,
        inertia=inertia(data, centroids, labels),
        iterations=iterations,
        inertia_history=tuple(history),
    )
    fragment = HoldsRelation(
        (instance, QualitySymbol(property_label, int(label)))
        for instance, label in zip(instance_ids, labels)
    )
    logger.debug(f"[Knowledge] {property_label}: eta={eta} iterations={iterations} inertia={model.inertia:.6g}")
    return model, fragment
