"""
Substitution - ranking stand-ins for a missing object class.

Each class is embedded as its concept proportions over the knowledge base's
full quality vocabulary (one block per property). Candidates are ranked by the
similarity of their embedding to the missing class's embedding.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from concept_engine.errors import SubstitutionError, UnknownClassError
from knowledge.conceptualize import QualitySymbol
from knowledge.knowledge_base import KnowledgeBase

logger = logging.getLogger(__name__)


# =============================================================================
# Similarity Metrics
# =============================================================================

class CosineSimilarity:
    """Cosine of the angle between two non-negative proportion vectors; 0 for a zero vector."""

    name = "cosine"

    def __call__(self, a: np.ndarray, b: np.ndarray, blocks: Sequence[slice]) -> float:
        if np.array_equal(a, b):
            return 1.0 if np.any(a) else 0.0
        norms = float(np.dot(a, a)) * float(np.dot(b, b))
        if norms <= 0:
            return 0.0
        return float(np.clip(np.dot(a, b) / np.sqrt(norms), 0.0, 1.0))


class OverlapSimilarity:
    """Histogram intersection per property, averaged over properties present in either vector."""

    name = "overlap"

    def __call__(self, a: np.ndarray, b: np.ndarray, blocks: Sequence[slice]) -> float:
        scores = []
        for block in blocks:
            x, y = a[block], b[block]
            if not (x.any() or y.any()):
                continue
            # a property measured on only one side contributes no overlap
            scores.append(float(np.minimum(x, y).sum()) if x.any() and y.any() else 0.0)
        if not scores:
            return 0.0
        return float(np.clip(np.mean(scores), 0.0, 1.0))


METRICS = {metric.name: metric for metric in (CosineSimilarity(), OverlapSimilarity())}


def get_metric(name: str):
    try:
        return METRICS[name]
    except KeyError:
        raise SubstitutionError(f"unknown similarity metric '{name}'; choose from {sorted(METRICS)}")


# =============================================================================
# Queries and Results
# =============================================================================

class SubstitutionQuery(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    missing_class: str = Field(min_length=1)
    candidate_classes: List[str] = Field(min_length=1)


@dataclass
class SubstitutionResult:
    """Full ranking (descending similarity, ties by name) and the selected candidates."""

    missing_class: str
    ranking: List[Tuple[str, float]]
    threshold: float
    metric: str
    selected: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "missing_class": self.missing_class,
            "metric": self.metric,
            "threshold": self.threshold,
            "ranking": [{"candidate": c, "similarity": s} for c, s in self.ranking],
            "selected": list(self.selected),
        }


def class_vector(kb: KnowledgeBase, class_label: str) -> Tuple[List[QualitySymbol], np.ndarray]:
    """
    Proportion vector of a class over the knowledge base vocabulary.

    Returns:
        (vocabulary, vector); symbols the class never holds are 0

    Raises:
        UnknownClassError: The class is not in the knowledge base
    """
    if class_label not in kb.classes():
        raise UnknownClassError(f"class '{class_label}' is not in the knowledge base")
    vocabulary = kb.vocabulary()
    position = {symbol: i for i, symbol in enumerate(vocabulary)}
    vector = np.zeros(len(vocabulary))
    for concept in kb.concepts_for(class_label):
        vector[position[concept.quality]] = concept.proportion
    return vocabulary, vector


def _property_blocks(vocabulary: List[QualitySymbol]) -> List[slice]:
    blocks, start = [], 0
    for i in range(1, len(vocabulary) + 1):
        if i == len(vocabulary) or vocabulary[i].property_label != vocabulary[start].property_label:
            blocks.append(slice(start, i))
            start = i
    return blocks


def substitute(
    kb: KnowledgeBase,
    query: SubstitutionQuery,
    threshold: float = 0.8,
    metric: str = "cosine",
) -> SubstitutionResult:
    """
    Rank the candidates of a query by similarity to the missing class.

    Args:
        kb: Knowledge base
        query: Missing class and candidate classes
        threshold: Candidates at or above this similarity are selected
        metric: Registered metric name

    Returns:
        SubstitutionResult

    Raises:
        SubstitutionError: No candidates, bad threshold or unknown metric
        UnknownClassError: A class is not in the knowledge base
    """
    if not query.candidate_classes:
        raise SubstitutionError(f"query for '{query.missing_class}' has no candidates")
    if not 0.0 <= threshold <= 1.0:
        raise SubstitutionError(f"threshold must lie in [0, 1], got {threshold}")
    similarity = get_metric(metric)

    vocabulary, target = class_vector(kb, query.missing_class)
    blocks = _property_blocks(vocabulary)
    scores = {}
    for candidate in dict.fromkeys(query.candidate_classes):
        _, vector = class_vector(kb, candidate)
        scores[candidate] = similarity(target, vector, blocks)

    ranking = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    selected = [c for c, s in ranking if s >= threshold]
    logger.debug(f"[Substitution] {query.missing_class}: {ranking}")
    return SubstitutionResult(query.missing_class, ranking, threshold, metric, selected)


# =============================================================================
# Query Batches and Heat Map
# =============================================================================

def load_queries(path: str) -> List[SubstitutionQuery]:
    """
    Read a query file: one query object, a list of them, or ``{"queries": [...]}``.

    Raises:
        SubstitutionError: The file is missing or malformed
    """
    if not os.path.exists(path):
        raise SubstitutionError(f"query file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise SubstitutionError(f"{path}: not valid JSON ({e})") from e

    if isinstance(payload, dict) and "queries" in payload:
        payload = payload["queries"]
    items = payload if isinstance(payload, list) else [payload]
    try:
        return [SubstitutionQuery.model_validate(item) for item in items]
    except ValidationError as e:
        problem = e.errors()[0]
        raise SubstitutionError(
            f"{path}: invalid query ({'.'.join(map(str, problem['loc']))}: {problem['msg']})"
        ) from e


def save_queries(queries: List[SubstitutionQuery], path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump({"queries": [q.model_dump() for q in queries]}, f, indent=2)
        f.write("\n")
    return path


def generate_queries(kb: KnowledgeBase, n_candidates: int = 5, seed: int = 0) -> List[SubstitutionQuery]:
    """One query per class with candidates drawn at random from the other classes."""
    classes = kb.classes()
    if len(classes) < 2:
        raise SubstitutionError("at least two classes are needed to build queries")
    rng = np.random.default_rng(seed)
    queries = []
    for missing in classes:
        others = [c for c in classes if c != missing]
        picked = rng.choice(len(others), size=min(n_candidates, len(others)), replace=False)
        queries.append(SubstitutionQuery(
            missing_class=missing,
            candidate_classes=sorted(others[i] for i in picked),
        ))
    return queries


def heatmap_table(kb: KnowledgeBase, results: List[SubstitutionResult]) -> pd.DataFrame:
    """Rows are missing classes, columns every class; cells hold the similarity or NaN."""
    table = pd.DataFrame(index=[r.missing_class for r in results], columns=kb.classes(), dtype=float)
    for row, result in enumerate(results):
        for candidate, score in result.ranking:
            table.iloc[row, table.columns.get_loc(candidate)] = score
    table.index.name = "missing_class"
    return table


def render_heatmap(table: pd.DataFrame) -> str:
    return table.to_csv(na_rep="", lineterminator="\n")


def render_results(results: List[SubstitutionResult]) -> str:
    return json.dumps({"results": [r.to_dict() for r in results]}, indent=2) + "\n"


def run_queries(
    kb: KnowledgeBase,
    queries: List[SubstitutionQuery],
    threshold: float = 0.8,
    metric: str = "cosine",
    missing_ok: bool = False,
) -> List[SubstitutionResult]:
    """Answer a batch of queries; ``missing_ok`` skips (and logs) queries naming unknown classes."""
    results: List[SubstitutionResult] = []
    for query in queries:
        try:
            results.append(substitute(kb, query, threshold, metric))
        except UnknownClassError as e:
            if not missing_ok:
                raise
            logger.warning(f"[Substitution] skipped query for '{query.missing_class}': {e}")
    return results
