"""
Functional property derivation.

Support, containment, movability and blockage are projections of the physical
properties (blockage negated). The component tables below are the single
source for both the per-observation vectors and the clustering features.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

from extraction.geometry import SizeTriple

PHYSICAL_COLUMNS: Tuple[str, ...] = (
    "flatness",
    "rigidity",
    "roughness",
    "size_length",
    "size_width",
    "size_height",
    "heaviness",
    "hollowness",
)

SIZE_COLUMNS = ("size_length", "size_width", "size_height")

FUNCTIONAL_COMPONENTS: Dict[str, Tuple[Tuple[str, int], ...]] = {
    "support": tuple((c, 1) for c in SIZE_COLUMNS) + (("flatness", 1), ("rigidity", 1)),
    "containment": tuple((c, 1) for c in SIZE_COLUMNS) + (("hollowness", 1),),
    "movability": (("heaviness", 1), ("roughness", 1)),
    "blockage": (("heaviness", -1), ("roughness", -1)),
}

# every clusterable property and the signed record columns it is built from
PROPERTY_COMPONENTS: Dict[str, Tuple[Tuple[str, int], ...]] = {
    "size": tuple((c, 1) for c in SIZE_COLUMNS),
    "flatness": (("flatness", 1),),
    "hollowness": (("hollowness", 1),),
    "heaviness": (("heaviness", 1),),
    "rigidity": (("rigidity", 1),),
    "roughness": (("roughness", 1),),
    **FUNCTIONAL_COMPONENTS,
}


@dataclass(frozen=True)
class PhysicalVector:
    """Physical properties of one observation; roughness may be missing."""

    si: SizeTriple
    fl: float
    ho: float
    he: float
    ri: float
    ro: Optional[float] = None

    def __post_init__(self):
        for name in ("fl", "ho", "ri"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.ro is not None and not 0.0 <= self.ro <= 1.0:
            raise ValueError(f"ro must lie in [0, 1], got {self.ro}")
        if self.he < 0:
            raise ValueError(f"he must be non-negative, got {self.he}")

    def columns(self) -> Dict[str, Optional[float]]:
        """Values keyed by dataset column name."""
        return {
            "flatness": self.fl,
            "rigidity": self.ri,
            "roughness": self.ro,
            "size_length": self.si.l,
            "size_width": self.si.w,
            "size_height": self.si.h,
            "heaviness": self.he,
            "hollowness": self.ho,
        }


@dataclass(frozen=True)
class FunctionalVector:
    support: Tuple[float, ...]
    containment: Tuple[float, ...]
    movability: Optional[Tuple[float, ...]]
    blockage: Optional[Tuple[float, ...]]


def _project(pv: PhysicalVector, components: Tuple[Tuple[str, int], ...]) -> Optional[Tuple[float, ...]]:
    values = pv.columns()
    if any(values[column] is None for column, _ in components):
        return None
    return tuple(sign * values[column] for column, sign in components)


def derive_support(pv: PhysicalVector) -> Tuple[float, ...]:
    """su = [l, w, h, fl, ri]"""
    return _project(pv, FUNCTIONAL_COMPONENTS["support"])


def derive_containment(pv: PhysicalVector) -> Tuple[float, ...]:
    """co = [l, w, h, ho]"""
    return _project(pv, FUNCTIONAL_COMPONENTS["containment"])


def derive_movability(pv: PhysicalVector) -> Optional[Tuple[float, ...]]:
    """mo = [he, ro]; missing when roughness is missing."""
    return _project(pv, FUNCTIONAL_COMPONENTS["movability"])


def derive_blockage(pv: PhysicalVector) -> Optional[Tuple[float, ...]]:
    """bl = -mo"""
    return _project(pv, FUNCTIONAL_COMPONENTS["blockage"])


def derive_functional(pv: PhysicalVector) -> FunctionalVector:
    return FunctionalVector(
        support=derive_support(pv),
        containment=derive_containment(pv),
        movability=derive_movability(pv),
        blockage=derive_blockage(pv),
    )
