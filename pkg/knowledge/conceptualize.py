"""
Symbolic knowledge - quality symbols, the holds relation and concept tuples.

Attribution gives every instance exactly one quality symbol per property;
conceptualization turns those into the proportion of a class's instances
that hold each symbol.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

from concept_engine.errors import AttributionConflictError, KnowledgeError


@dataclass(frozen=True, order=True)
class QualitySymbol:
    """One cluster of one property, rendered ``<property>_<index>``."""

    property_label: str
    cluster_index: int

    def __post_init__(self):
        if self.cluster_index < 0:
            raise ValueError(f"cluster index must be non-negative, got {self.cluster_index}")

    def __str__(self) -> str:
        return f"{self.property_label}_{self.cluster_index}"

    @classmethod
    def parse(cls, text: str) -> "QualitySymbol":
        label, sep, index = text.rpartition("_")
        if not sep or not label or not index.isdigit():
            raise ValueError(f"not a quality symbol: '{text}'")
        return cls(label, int(index))


class HoldsRelation:
    """
    (instance, quality symbol) pairs with one symbol per (instance, property).

    Raises:
        AttributionConflictError: A second symbol is given for an (instance, property)
    """

    def __init__(self, pairs: Iterable[Tuple[str, QualitySymbol]] = ()):
        self._symbols: Dict[Tuple[str, str], QualitySymbol] = {}
        for instance, symbol in pairs:
            self.add(instance, symbol)

    def add(self, instance: str, symbol: QualitySymbol):
        if isinstance(symbol, str):
            symbol = QualitySymbol.parse(symbol)
        key = (instance, symbol.property_label)
        if key in self._symbols:
            raise AttributionConflictError(
                f"{instance} already holds {self._symbols[key]} for {symbol.property_label}; got {symbol}"
            )
        self._symbols[key] = symbol

    def symbol_for(self, instance: str, property_label: str) -> Optional[QualitySymbol]:
        return self._symbols.get((instance, property_label))

    def instances(self) -> List[str]:
        return sorted({instance for instance, _ in self._symbols})

    def properties(self) -> List[str]:
        return sorted({prop for _, prop in self._symbols})

    def pairs(self) -> List[Tuple[str, str]]:
        """Sorted (instance, rendered symbol) pairs."""
        return [(instance, str(self._symbols[(instance, prop)])) for instance, prop in sorted(self._symbols)]

    def __iter__(self) -> Iterator[Tuple[str, QualitySymbol]]:
        for key in sorted(self._symbols):
            yield key[0], self._symbols[key]

    def __len__(self) -> int:
        return len(self._symbols)

    def __eq__(self, other) -> bool:
        return isinstance(other, HoldsRelation) and self._symbols == other._symbols

    def __repr__(self) -> str:
        return f"HoldsRelation({len(self)} pairs)"


def attribute(fragments: Iterable[HoldsRelation]) -> HoldsRelation:
    """Merge per-property fragments into one holds relation."""
    merged = HoldsRelation()
    for fragment in fragments:
        for instance, symbol in fragment:
            merged.add(instance, symbol)
    return merged


@dataclass(frozen=True, order=True)
class ConceptTuple:
    """Share of a class's instances holding a quality."""

    class_label: str
    quality: QualitySymbol
    proportion: float

    def to_dict(self) -> Dict[str, object]:
        return {"class": self.class_label, "quality": str(self.quality), "proportion": self.proportion}


def conceptualize(holds: HoldsRelation, class_membership: Mapping[str, str]) -> List[ConceptTuple]:
    """
    Aggregate the holds relation per class.

    The proportion of a quality is the number of class instances holding it over
    the number of class instances with that property measured.

    Args:
        holds: Attribution of all instances
        class_membership: instance -> class

    Returns:
        Concept tuples with non-zero proportion, sorted by class, property, index

    Raises:
        KnowledgeError: An instance without a class, or a class without any
                        attributed instance
    """
    orphans = [i for i in holds.instances() if i not in class_membership]
    if orphans:
        raise KnowledgeError(f"instances without a class: {orphans[:5]}")

    tallies: Dict[Tuple[str, str], Counter] = defaultdict(Counter)
    for instance, symbol in holds:
        tallies[(class_membership[instance], symbol.property_label)][symbol] += 1

    attributed = {class_label for class_label, _ in tallies}
    empty = sorted(set(class_membership.values()) - attributed)
    if empty:
        raise KnowledgeError(f"classes without attributed instances: {empty}")

    concepts = []
    for (class_label, _), counter in tallies.items():
        measured = sum(counter.values())
        for symbol, count in counter.items():
            concepts.append(ConceptTuple(class_label, symbol, count / measured))
    return sorted(concepts, key=lambda c: (c.class_label, c.quality))
