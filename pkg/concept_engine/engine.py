"""
Concept Engine - Pipeline Orchestration

Runs the stages end to end: synthetic scenes are turned into feature bundles,
bundles into observation records, records into dataset statistics and a
knowledge base, and the knowledge base answers substitution queries.
"""

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple, Union

import pandas as pd

from concept_engine.config import PipelineConfig
from concept_engine.errors import ConceptEngineError
from concept_engine.seeding import derive_seed
from database.bundle_store import list_bundle_dirs, read_bundle, write_bundle
from database.dataset_operations import ingest
from database.records import ObservationRecord, RecordSet
from database.statistics import ClassSummary, coverage_stats, mean_variance_table, pearson_matrix
from extraction.pipeline import extract_record
from extraction.simulator import SyntheticObject, household_scene, load_scene, render_scene, synthesize_bundle
from knowledge.knowledge_base import KnowledgeBase, PartitionLevel, build_knowledge_base, partition_pyramid
from knowledge.substitution import SubstitutionQuery, SubstitutionResult, generate_queries, run_queries

logger = logging.getLogger(__name__)


@dataclass
class ExtractionReport:
    """Records of the bundles that extracted cleanly and the failures of the rest."""

    records: RecordSet
    failures: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def attempted(self) -> int:
        return len(self.records) + len(self.failures)


@dataclass
class DatasetStatistics:
    summary: ClassSummary
    correlation: pd.DataFrame
    coverage: pd.DataFrame


class ConceptEngine:
    """
    Facade over the simulation, extraction, dataset and knowledge stages.

    Every stage reads its settings from one PipelineConfig and derives its
    random streams from ``config.seed``.
    """

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = config or PipelineConfig()
        self.last_duration = 0.0

    # =========================================================================
    # Simulation
    # =========================================================================

    def household_objects(self, instances_per_class: int = 10) -> List[SyntheticObject]:
        return household_scene(derive_seed(self.config.seed, "scene"), instances_per_class)

    def write_scene(self, path: str, instances_per_class: int = 10) -> List[SyntheticObject]:
        """Write the household scene file and return its objects."""
        objects = self.household_objects(instances_per_class)
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(render_scene(objects))
        return objects

    def simulate(
        self,
        scene: Union[str, List[SyntheticObject]],
        out_dir: str,
        repetitions: Optional[int] = None,
    ) -> List[str]:
        """
        Synthesize feature bundles for every object of a scene.

        Args:
            scene: Scene file or object list
            out_dir: Bundle root directory
            repetitions: Bundles per object; defaults to the simulation settings

        Returns:
            Bundle directories in write order
        """
        start = time.time()
        objects = load_scene(scene) if isinstance(scene, str) else list(scene)
        settings = self.config.simulation
        repetitions = repetitions or settings.repetitions
        os.makedirs(out_dir, exist_ok=True)

        written = []
        for obj in objects:
            for repetition in range(1, repetitions + 1):
                bundle = synthesize_bundle(
                    obj,
                    seed=derive_seed(self.config.seed, "simulate", obj.name, repetition),
                    repetition=repetition,
                    settings=settings,
                    effort_cutoff=self.config.interaction.effort_cutoff,
                )
                written.append(write_bundle(bundle, out_dir))
        self.last_duration = time.time() - start
        logger.info(f"[Simulation] wrote {len(written)} bundles for {len(objects)} objects to {out_dir}")
        return written

    # =========================================================================
    # Extraction
    # =========================================================================

    def _extract_one(self, directory: str) -> ObservationRecord:
        return extract_record(read_bundle(directory), self.config)

    def extract_bundles(self, bundle_root: str, workers: Optional[int] = None) -> ExtractionReport:
        """
        Extract every bundle under ``bundle_root``.

        Bundles fail independently: a failing bundle is logged and reported,
        the rest still produce records.
        """
        start = time.time()
        directories = list_bundle_dirs(bundle_root)
        workers = workers or self.config.workers

        records: List[ObservationRecord] = []
        failures: List[Tuple[str, str]] = []
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [(d, executor.submit(self._extract_one, d)) for d in directories]
            for directory, future in futures:
                try:
                    records.append(future.result())
                except ConceptEngineError as e:
                    logger.warning(f"[Extraction] {os.path.basename(directory)} failed: {e.one_line()}")
                    failures.append((directory, e.one_line()))

        self.last_duration = time.time() - start
        return ExtractionReport(RecordSet(records), failures)

    def load_records(self, source: str, workers: Optional[int] = None) -> Tuple[RecordSet, List[Tuple[str, str]]]:
        """Records from a bundle directory (extracted) or a dataset file (ingested)."""
        if os.path.isdir(source):
            report = self.extract_bundles(source, workers)
            return report.records, report.failures
        return ingest(source), []

    # =========================================================================
    # Dataset Statistics
    # =========================================================================

    def compute_stats(self, records: Iterable[ObservationRecord]) -> DatasetStatistics:
        record_set = records if isinstance(records, RecordSet) else RecordSet(records)
        return DatasetStatistics(
            summary=mean_variance_table(record_set, self.config.dataset.variance),
            correlation=pearson_matrix(record_set),
            coverage=coverage_stats(record_set),
        )

    # =========================================================================
    # Knowledge
    # =========================================================================

    def build_kb(self, records: Iterable[ObservationRecord]) -> KnowledgeBase:
        start = time.time()
        kb = build_knowledge_base(
            records,
            self.config.knowledge,
            seed=derive_seed(self.config.seed, "knowledge"),
            workers=self.config.workers,
        )
        self.last_duration = time.time() - start
        return kb

    def pyramid(
        self,
        records: Iterable[ObservationRecord],
        feature: str = "containment",
        k_range: Optional[Iterable[int]] = None,
    ) -> List[PartitionLevel]:
        return partition_pyramid(
            records,
            feature=feature,
            k_range=k_range,
            seed=derive_seed(self.config.seed, "pyramid"),
            max_iterations=self.config.knowledge.max_iterations,
        )

    # =========================================================================
    # Substitution
    # =========================================================================

    def query(
        self, kb: KnowledgeBase, queries: List[SubstitutionQuery], missing_ok: bool = False
    ) -> List[SubstitutionResult]:
        settings = self.config.substitution
        return run_queries(kb, queries, settings.threshold, settings.metric, missing_ok=missing_ok)

    def generate_queries(self, kb: KnowledgeBase) -> List[SubstitutionQuery]:
        return generate_queries(
            kb,
            n_candidates=self.config.substitution.n_candidates,
            seed=derive_seed(self.config.seed, "queries"),
        )
