"""
Knowledge Base - conceptual knowledge built from the observation dataset.

Build steps:
1. Instance means of every property (repetitions averaged, missing skipped)
2. Heaviness min-max scaled to [0, 1] over the dataset
3. One k-means run per property in its native dimension (sub-categorization)
4. Union of the per-property symbols (attribution)
5. Per-class proportions of every symbol (conceptualization)

The result persists as JSON with sorted keys so two builds diff cleanly.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from concept_engine.config import KnowledgeConfig
from concept_engine.errors import KnowledgeError
from concept_engine.seeding import derive_seed
from database.records import ObservationRecord, instance_key
from database.statistics import instance_means
from extraction.functional import PHYSICAL_COLUMNS, PROPERTY_COMPONENTS
from knowledge.clustering import ClusterModel, subcategorize
from knowledge.conceptualize import ConceptTuple, HoldsRelation, QualitySymbol, attribute, conceptualize

logger = logging.getLogger(__name__)

KB_FORMAT = "concept-kb/1"

CLUSTER_PROPERTIES: Tuple[str, ...] = tuple(PROPERTY_COMPONENTS)

# property sets the partition pyramid can be run over
PYRAMID_FEATURES: Dict[str, Tuple[Tuple[str, int], ...]] = {
    **PROPERTY_COMPONENTS,
    "physical": tuple((c, 1) for c in PHYSICAL_COLUMNS),
}

KB_NOTES = [
    "symbols are <property>_<index>; index 0 is the cluster with the smallest signed centroid norm",
    "blockage values are negated, so blockage_0 is the heaviest and roughest quality",
    "heaviness is min-max scaled over the dataset before clustering; see normalization",
    "proportions count instance means; instances with a missing property are left out of its denominator",
]


# =============================================================================
# Feature Preparation
# =============================================================================

def normalized_instance_means(
    records: Iterable[ObservationRecord],
) -> Tuple[pd.DataFrame, Dict[str, str], Dict[str, Dict[str, float]]]:
    """
    Instance means with heaviness scaled to [0, 1].

    Returns:
        (means indexed by instance key, instance key -> class, normalization parameters)
    """
    means = instance_means(records)
    if means.empty:
        raise KnowledgeError("cannot build knowledge from an empty dataset")

    membership = {instance_key(c, i): c for c, i in means.index}
    means.index = [instance_key(c, i) for c, i in means.index]

    low, high = float(means["heaviness"].min()), float(means["heaviness"].max())
    span = high - low
    means["heaviness"] = (means["heaviness"] - low) / span if span > 0 else 0.0
    return means, membership, {"heaviness": {"min": low, "max": high}}


def feature_matrix(
    means: pd.DataFrame,
    components: Sequence[Tuple[str, int]],
) -> Tuple[List[str], np.ndarray]:
    """
    Signed component columns of one property; rows with a missing value are dropped.

    Returns:
        (instance keys, (n, d) matrix)
    """
    columns = [column for column, _ in components]
    signs = np.array([sign for _, sign in components], dtype=float)
    block = means[columns].dropna()
    return list(block.index), block.to_numpy(dtype=float) * signs


# =============================================================================
# Knowledge Base
# =============================================================================

@dataclass
class KnowledgeBase:
    """
    Cluster models, holds relation and concept tuples of one dataset.

    Args:
        seed: Root seed the per-property seeds were derived from
        cluster_models: property -> ClusterModel
        holds: Attribution of every instance
        concepts: Concept tuples, sorted
        class_membership: instance key -> class
        normalization: Scaling applied before clustering
    """

    seed: int
    cluster_models: Dict[str, ClusterModel]
    holds: HoldsRelation
    concepts: List[ConceptTuple]
    class_membership: Dict[str, str]
    normalization: Dict[str, Dict[str, float]] = field(default_factory=dict)
    notes: List[str] = field(default_factory=lambda: list(KB_NOTES))

    def classes(self) -> List[str]:
        return sorted(set(self.class_membership.values()))

    def properties(self) -> List[str]:
        return [p for p in CLUSTER_PROPERTIES if p in self.cluster_models] + sorted(
            p for p in self.cluster_models if p not in CLUSTER_PROPERTIES
        )

    def vocabulary(self) -> List[QualitySymbol]:
        """Every quality symbol, grouped by property in build order."""
        symbols: List[QualitySymbol] = []
        for prop in self.properties():
            symbols.extend(self.cluster_models[prop].symbols())
        return symbols

    def concepts_for(self, class_label: str) -> List[ConceptTuple]:
        return [c for c in self.concepts if c.class_label == class_label]

    # -------------------------------------------------------------------------
    # Persistence
    # -------------------------------------------------------------------------

    def to_dict(self) -> Dict[str, object]:
        return {
            "format": KB_FORMAT,
            "notes": list(self.notes),
            "seed": self.seed,
            "normalization": self.normalization,
            "classes": dict(self.class_membership),
            "cluster_models": {
                prop: {
                    "eta": model.eta,
                    "seed": model.seed,
                    "centroids": [list(c) for c in model.centroids],
                    "inertia": model.inertia,
                    "iterations": model.iterations,
                }
                for prop, model in self.cluster_models.items()
            },
            "holds": [list(pair) for pair in self.holds.pairs()],
            "concepts": [c.to_dict() for c in self.concepts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "KnowledgeBase":
        if data.get("format") != KB_FORMAT:
            raise KnowledgeError(f"unsupported knowledge base format: {data.get('format')!r}")
        try:
            models = {
                prop: ClusterModel(
                    property_label=prop,
                    eta=int(body["eta"]),
                    centroids=tuple(tuple(float(v) for v in c) for c in body["centroids"]),
                    seed=int(body["seed"]),
                    inertia=float(body["inertia"]),
                    iterations=int(body["iterations"]),
                )
                for prop, body in data["cluster_models"].items()
            }
            holds = HoldsRelation((instance, QualitySymbol.parse(symbol)) for instance, symbol in data["holds"])
            concepts = sorted(
                (
                    ConceptTuple(c["class"], QualitySymbol.parse(c["quality"]), float(c["proportion"]))
                    for c in data["concepts"]
                ),
                key=lambda c: (c.class_label, c.quality),
            )
            return cls(
                seed=int(data["seed"]),
                cluster_models=models,
                holds=holds,
                concepts=concepts,
                class_membership=dict(data["classes"]),
                normalization=data.get("normalization", {}),
                notes=list(data.get("notes", KB_NOTES)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise KnowledgeError(f"malformed knowledge base: {e}") from e

    def save(self, path: str) -> str:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.to_json())
        return path

    @classmethod
    def load(cls, path: str) -> "KnowledgeBase":
        if not os.path.exists(path):
            raise KnowledgeError(f"knowledge base not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            try:
                data = json.load(f)
            except json.JSONDecodeError as e:
                raise KnowledgeError(f"{path}: not valid JSON ({e})") from e
        return cls.from_dict(data)


def build_knowledge_base(
    records: Iterable[ObservationRecord],
    config: Optional[KnowledgeConfig] = None,
    seed: int = 0,
    properties: Sequence[str] = CLUSTER_PROPERTIES,
    workers: int = 1,
) -> KnowledgeBase:
    """
    Sub-categorize, attribute and conceptualize a dataset.

    Args:
        records: Observation records
        config: Cluster counts per property and iteration cap
        seed: Root seed; every property clusters with a seed derived from it
        properties: Properties to cluster
        workers: Properties clustered concurrently

    Returns:
        KnowledgeBase

    Raises:
        KnowledgeError: Empty dataset, unknown property or a failed clustering
    """
    config = config or KnowledgeConfig()
    unknown = [p for p in properties if p not in PROPERTY_COMPONENTS]
    if unknown:
        raise KnowledgeError(f"unknown properties: {unknown}")

    means, membership, normalization = normalized_instance_means(records)
    logger.info(f"[Knowledge] clustering {len(properties)} properties over {len(means)} instances")

    def run(prop: str):
        keys, matrix = feature_matrix(means, PROPERTY_COMPONENTS[prop])
        if not keys:
            logger.warning(f"[Knowledge] {prop}: no instance has a value; property skipped")
            return prop, None, HoldsRelation()
        model, fragment = subcategorize(
            matrix, keys, prop,
            eta=config.eta_for(prop),
            seed=derive_seed(seed, "cluster", prop),
            max_iterations=config.max_iterations,
        )
        return prop, model, fragment

    with ThreadPoolExecutor(max_workers=max(1, workers)) as executor:
        results = list(executor.map(run, properties))

    models = {prop: model for prop, model, _ in results if model is not None}
    holds = attribute(fragment for _, _, fragment in results)
    concepts = conceptualize(holds, membership)
    logger.info(f"[Knowledge] {len(holds)} holds pairs, {len(concepts)} concept tuples")
    return KnowledgeBase(
        seed=seed,
        cluster_models=models,
        holds=holds,
        concepts=concepts,
        class_membership=membership,
        normalization=normalization,
    )


# =============================================================================
# Partition Pyramid
# =============================================================================

@dataclass
class PartitionLevel:
    """One level of the pyramid: class counts per cluster for a given k."""

    k: int
    clusters: List[Dict[str, int]]
    model: ClusterModel

    @property
    def total(self) -> int:
        return sum(sum(histogram.values()) for histogram in self.clusters)


def partition_pyramid(
    records: Iterable[ObservationRecord],
    feature: str = "containment",
    k_range: Optional[Iterable[int]] = None,
    seed: int = 0,
    max_iterations: int = 300,
) -> List[PartitionLevel]:
    """
    Cluster the instances with gradually increasing k and report class make-up.

    Args:
        records: Observation records
        feature: Property (or ``physical``) whose vectors are clustered
        k_range: Cluster counts; defaults to 2 .. number of classes
        seed: Root seed
        max_iterations: Lloyd iteration cap

    Returns:
        One PartitionLevel per k, in the order given
    """
    if feature not in PYRAMID_FEATURES:
        raise KnowledgeError(f"unknown feature set '{feature}'; choose from {sorted(PYRAMID_FEATURES)}")
    means, membership, _ = normalized_instance_means(records)
    n_classes = len(set(membership.values()))
    ks = list(k_range) if k_range is not None else list(range(2, n_classes + 1))
    outside = [k for k in ks if not 2 <= k <= n_classes]
    if outside:
        raise KnowledgeError(f"k values {outside} outside [2, {n_classes}]")

    keys, matrix = feature_matrix(means, PYRAMID_FEATURES[feature])
    levels = []
    for k in ks:
        model, fragment = subcategorize(
            matrix, keys, feature, eta=k,
            seed=derive_seed(seed, "pyramid", feature, k),
            max_iterations=max_iterations,
        )
        clusters: List[Dict[str, int]] = [{} for _ in range(k)]
        for instance, symbol in fragment:
            histogram = clusters[symbol.cluster_index]
            class_label = membership[instance]
            histogram[class_label] = histogram.get(class_label, 0) + 1
        levels.append(PartitionLevel(k, [dict(sorted(h.items())) for h in clusters], model))
    return levels


def pyramid_frame(levels: List[PartitionLevel]) -> pd.DataFrame:
    """Long table: k, cluster, class, count."""
    rows = [
        (level.k, index, class_label, count)
        for level in levels
        for index, histogram in enumerate(level.clusters)
        for class_label, count in histogram.items()
    ]
    return pd.DataFrame(rows, columns=["k", "cluster", "class", "count"])
