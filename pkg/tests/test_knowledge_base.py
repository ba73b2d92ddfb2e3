"""Tests for knowledge base construction, persistence and the partition pyramid."""

import json

import numpy as np
import pytest

from concept_engine.config import KnowledgeConfig
from concept_engine.errors import KnowledgeError
from conftest import make_record
from extraction.functional import PROPERTY_COMPONENTS
from extraction.simulator import ground_truth_records, household_scene
from knowledge.knowledge_base import (
    CLUSTER_PROPERTIES,
    KnowledgeBase,
    build_knowledge_base,
    feature_matrix,
    normalized_instance_means,
    partition_pyramid,
    pyramid_frame,
)

CONTAINERS = {"plate", "bowl", "cup", "to_go_cup"}


@pytest.fixture(scope="module")
def household_records():
    return ground_truth_records(household_scene(seed=0), repetitions=2)


@pytest.fixture(scope="module")
def household_kb(household_records):
    return build_knowledge_base(household_records, seed=0)


# ---------------------------------------------------------------------------
# Feature Preparation
# ---------------------------------------------------------------------------

class TestFeatures:
    def test_heaviness_scaled(self, small_records):
        means, membership, normalization = normalized_instance_means(small_records)
        assert means["heaviness"].min() == 0.0
        assert means["heaviness"].max() == 1.0
        assert normalization == {"heaviness": {"min": 100.0, "max": 600.0}}
        assert membership["plate/plate_02"] == "plate"

    def test_blockage_is_negated(self, small_records):
        means, _, _ = normalized_instance_means(small_records)
        _, movability = feature_matrix(means, PROPERTY_COMPONENTS["movability"])
        _, blockage = feature_matrix(means, PROPERTY_COMPONENTS["blockage"])
        np.testing.assert_array_equal(blockage, -movability)

    def test_missing_rows_dropped(self):
        records = [make_record("cup", "cup_01", roughness=None), make_record("cup", "cup_02", roughness=0.4)]
        means, _, _ = normalized_instance_means(records)
        keys, matrix = feature_matrix(means, PROPERTY_COMPONENTS["roughness"])
        assert keys == ["cup/cup_02"]
        assert matrix.shape == (1, 1)

    def test_empty_dataset(self):
        with pytest.raises(KnowledgeError):
            normalized_instance_means([])


# ---------------------------------------------------------------------------
# Knowledge Base
# ---------------------------------------------------------------------------

class TestBuild:
    def test_one_symbol_per_property(self, household_kb):
        assert len(household_kb.class_membership) == 110
        assert household_kb.properties() == list(CLUSTER_PROPERTIES)
        for instance in household_kb.class_membership:
            for prop in household_kb.properties():
                assert household_kb.holds.symbol_for(instance, prop) is not None

    def test_proportions_sum_to_one(self, household_kb):
        totals = {}
        for concept in household_kb.concepts:
            key = (concept.class_label, concept.quality.property_label)
            totals[key] = totals.get(key, 0.0) + concept.proportion
        assert len(totals) == 11 * len(CLUSTER_PROPERTIES)
        for value in totals.values():
            assert value == pytest.approx(1.0, abs=1e-9)

    def test_assignments_match_nearest_centroid(self, household_records, household_kb):
        means, _, _ = normalized_instance_means(household_records)
        for prop in household_kb.properties():
            keys, matrix = feature_matrix(means, PROPERTY_COMPONENTS[prop])
            centroids = np.array(household_kb.cluster_models[prop].centroids)
            distances = ((matrix[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            for key, row in zip(keys, distances):
                index = household_kb.holds.symbol_for(key, prop).cluster_index
                assert row[index] == row.min()

    def test_flat_books_share_one_quality(self, household_kb):
        flatness = [c for c in household_kb.concepts_for("book") if c.quality.property_label == "flatness"]
        assert len(flatness) == 1
        assert flatness[0].proportion == 1.0
        assert flatness[0].quality.cluster_index == household_kb.cluster_models["flatness"].eta - 1

    def test_rebuild_is_byte_identical(self, household_records, household_kb):
        again = build_knowledge_base(household_records, seed=0, workers=4)
        assert again.to_json() == household_kb.to_json()

    def test_seed_recorded(self, household_records):
        kb = build_knowledge_base(household_records, seed=17, properties=("size",))
        assert kb.seed == 17
        assert kb.properties() == ["size"]

    def test_eta_per_property(self, household_records):
        config = KnowledgeConfig(default_eta=3, eta={"size": 5})
        kb = build_knowledge_base(household_records, config, properties=("size", "flatness"))
        assert kb.cluster_models["size"].eta == 5
        assert kb.cluster_models["flatness"].eta == 3

    def test_missing_property_skipped(self, small_records):
        records = [r.model_copy(update={"roughness": None}) for r in small_records]
        kb = build_knowledge_base(records, KnowledgeConfig(default_eta=2))
        assert "roughness" not in kb.properties()
        assert "movability" not in kb.properties()
        assert "containment" in kb.properties()

    def test_unknown_property(self, small_records):
        with pytest.raises(KnowledgeError):
            build_knowledge_base(small_records, properties=("colour",))


class TestPersistence:
    def test_round_trip(self, tmp_path, household_kb):
        path = household_kb.save(str(tmp_path / "kb.json"))
        loaded = KnowledgeBase.load(path)
        assert loaded.to_json() == household_kb.to_json()
        assert loaded.holds == household_kb.holds
        assert loaded.concepts == household_kb.concepts

    def test_sorted_keys(self, household_kb):
        data = json.loads(household_kb.to_json())
        assert list(data) == sorted(data)
        assert data["format"] == "concept-kb/1"

    def test_wrong_format(self):
        with pytest.raises(KnowledgeError):
            KnowledgeBase.from_dict({"format": "other"})

    def test_malformed_body(self, household_kb):
        data = household_kb.to_dict()
        data["holds"] = [["cup/cup_01", "not-a-symbol"]]
        with pytest.raises(KnowledgeError):
            KnowledgeBase.from_dict(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(KnowledgeError):
            KnowledgeBase.load(str(tmp_path / "absent.json"))


# ---------------------------------------------------------------------------
# Partition Pyramid
# ---------------------------------------------------------------------------

class TestPyramid:
    def test_every_instance_once_per_level(self, household_records):
        levels = partition_pyramid(household_records, "containment")
        assert [level.k for level in levels] == list(range(2, 12))
        for level in levels:
            assert level.total == 110
            assert len(level.clusters) == level.k

    def test_containers_group_together(self, household_records):
        levels = partition_pyramid(household_records, "containment", k_range=range(2, 7))
        best = 0.0
        for level in levels:
            for histogram in level.clusters:
                size = sum(histogram.values())
                if size:
                    share = sum(n for c, n in histogram.items() if c in CONTAINERS) / size
                    best = max(best, share)
        assert best >= 0.6

    def test_frame(self, household_records):
        levels = partition_pyramid(household_records, "physical", k_range=[3])
        frame = pyramid_frame(levels)
        assert list(frame.columns) == ["k", "cluster", "class", "count"]
        assert frame["count"].sum() == 110

    def test_bad_feature(self, household_records):
        with pytest.raises(KnowledgeError):
            partition_pyramid(household_records, "colour")

    def test_k_out_of_range(self, household_records):
        with pytest.raises(KnowledgeError):
            partition_pyramid(household_records, k_range=[1, 12])
