"""
Extraction pipeline - feature bundle to observation record.

Runs the geometric and interaction extractions of one bundle in order:
segmentation, size, flatness, hollowness, rigidity, roughness, heaviness.
A missing or unresolved ramp log leaves roughness missing; every other
failure aborts the bundle.
"""

import logging
from dataclasses import dataclass
from typing import Optional

from concept_engine.config import PipelineConfig
from concept_engine.errors import SegmentationError, SlideNotObservedError
from concept_engine.seeding import derive_seed
from database.records import ObservationRecord
from extraction.functional import FunctionalVector, PhysicalVector, derive_functional
from extraction.geometry import compute_flatness, compute_hollowness, compute_size, segment_tabletop
from extraction.interaction import compute_heaviness, compute_rigidity, compute_roughness
from extraction.simulator import FeatureBundle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionResult:
    physical: PhysicalVector
    functional: FunctionalVector
    height: float


def extract_physical(
    bundle: FeatureBundle,
    config: Optional[PipelineConfig] = None,
    seed: Optional[int] = None,
) -> ExtractionResult:
    """
    Measure the physical properties of one bundle.

    Args:
        bundle: Raw feature data
        config: Pipeline configuration; defaults throughout when omitted
        seed: Root seed of the RANSAC streams; defaults to ``config.seed``

    Returns:
        ExtractionResult with the physical and functional vectors and the
        measured object height in meters

    Raises:
        ExtractionError: Any extraction step other than roughness fails
    """
    config = config or PipelineConfig()
    root = config.seed if seed is None else seed
    geometry = config.geometry
    interaction = config.interaction
    label = "/".join(str(part) for part in bundle.key)

    segmentation = segment_tabletop(
        bundle.side_cloud, geometry.table, seed=derive_seed(root, "table", *bundle.key)
    )
    if segmentation.is_empty:
        raise SegmentationError(f"{label}: no object above the support plane")
    si, extents = compute_size(segmentation.object_points)
    h = float(extents[2])

    fl = compute_flatness(bundle.top_cloud, geometry.flatness, seed=derive_seed(root, "flatness", *bundle.key))
    ho = compute_hollowness(
        h, bundle.d_r, bundle.d_h,
        min_cavity_depth=geometry.min_cavity_depth,
        tolerance=geometry.inconsistency_tolerance,
    )
    ri = compute_rigidity(bundle.press_log, h, interaction.effort_cutoff, interaction)

    ro = None
    if bundle.ramp_log is None:
        logger.warning(f"[Extraction] {label}: no ramp log; roughness is missing")
    else:
        try:
            ro = compute_roughness(bundle.ramp_log)
        except SlideNotObservedError as e:
            logger.warning(f"[Extraction] {label}: {e}")

    he = float(compute_heaviness(bundle.scale_reading))
    physical = PhysicalVector(si=si, fl=fl, ho=ho, he=he, ri=ri, ro=ro)
    logger.debug(f"[Extraction] {label}: h={h:.4f} fl={fl:.3f} ho={ho:.3f} ri={ri:.3f} he={he:.0f}")
    return ExtractionResult(physical, derive_functional(physical), h)


def extract_record(
    bundle: FeatureBundle,
    config: Optional[PipelineConfig] = None,
    seed: Optional[int] = None,
) -> ObservationRecord:
    """Observation record of one bundle."""
    result = extract_physical(bundle, config, seed)
    return ObservationRecord.from_physical(
        bundle.class_label, bundle.instance_id, bundle.repetition, result.physical
    )
