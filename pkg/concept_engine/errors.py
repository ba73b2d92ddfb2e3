"""
Concept Engine - Error Types

Every failure the pipeline can report carries a machine-readable ``code`` and the
process ``exit_code`` the CLI uses for it. Families group errors by the stage that
raised them so callers can catch a whole stage at once.
"""

from typing import List, Tuple


class ConceptEngineError(Exception):
    """Base class for all pipeline errors."""

    code = "E_INTERNAL"
    exit_code = 1

    def one_line(self) -> str:
        """Single-line rendering used on stderr by the CLI."""
        message = " ".join(str(self).split())
        return f"ERROR {self.code}: {message}"


# =============================================================================
# Configuration
# =============================================================================

class ConfigError(ConceptEngineError):
    code = "E_CONFIG"
    exit_code = 2


# =============================================================================
# Simulation
# =============================================================================

class SceneParseError(ConceptEngineError):
    code = "E_SCENE_PARSE"
    exit_code = 3


class SimulationError(ConceptEngineError):
    code = "E_SIMULATION"
    exit_code = 3


# =============================================================================
# Extraction
# =============================================================================

class ExtractionError(ConceptEngineError):
    code = "E_EXTRACTION"
    exit_code = 4


class SegmentationError(ExtractionError):
    code = "E_SEGMENTATION"


class MeasurementError(ExtractionError):
    """Inputs are individually valid but physically inconsistent."""

    code = "E_MEASUREMENT"


class PressIncompleteError(ExtractionError):
    code = "E_PRESS_INCOMPLETE"


class SlideNotObservedError(ExtractionError):
    code = "E_SLIDE_NOT_OBSERVED"


# =============================================================================
# Dataset
# =============================================================================

class DatasetError(ConceptEngineError):
    code = "E_DATASET"
    exit_code = 5


class SchemaError(DatasetError):
    code = "E_SCHEMA"


class IngestError(DatasetError):
    """
    Raised when one or more rows fail validation.

    Args:
        path: File being ingested
        row_errors: (row number, message) pairs; rows are 1-based data rows
    """

    code = "E_INGEST"

    def __init__(self, path: str, row_errors: List[Tuple[int, str]]):
        self.path = path
        self.row_errors = row_errors
        shown = "; ".join(f"row {row}: {msg}" for row, msg in row_errors[:5])
        more = f" (+{len(row_errors) - 5} more)" if len(row_errors) > 5 else ""
        super().__init__(f"{path}: {len(row_errors)} invalid row(s): {shown}{more}")


# =============================================================================
# Knowledge
# =============================================================================

class KnowledgeError(ConceptEngineError):
    code = "E_KNOWLEDGE"
    exit_code = 6


class ClusteringError(KnowledgeError):
    code = "E_CLUSTERING"


class AttributionConflictError(KnowledgeError):
    code = "E_ATTRIBUTION_CONFLICT"


# =============================================================================
# Substitution
# =============================================================================

class SubstitutionError(ConceptEngineError):
    code = "E_SUBSTITUTION"
    exit_code = 7


class UnknownClassError(SubstitutionError):
    code = "E_UNKNOWN_CLASS"
