"""
Concept Engine - Robot-Centric Object Knowledge

Extracts physical and functional object properties from (simulated) sensor
data, summarizes the resulting dataset and turns it into symbolic conceptual
knowledge that answers tool-substitution queries.
"""

from concept_engine.config import PipelineConfig, load_config
from concept_engine.errors import ConceptEngineError

__all__ = ["ConceptEngine", "ConceptEngineError", "PipelineConfig", "load_config"]


def __getattr__(name):
    # the engine pulls in every stage, which in turn import this package's config
    if name == "ConceptEngine":
        from concept_engine.engine import ConceptEngine
        return ConceptEngine
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
