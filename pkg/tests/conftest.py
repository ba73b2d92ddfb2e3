"""Shared fixtures: simulated objects and small record sets."""

import pytest

from database.records import ObservationRecord
from extraction.simulator import SyntheticObject


def make_record(class_label="cup", instance_id="cup_01", repetition=1, **values) -> ObservationRecord:
    """Observation record with neutral defaults for every property not given."""
    fields = {
        "flatness": 0.5,
        "rigidity": 0.1,
        "roughness": 0.3,
        "size_length": 1.0,
        "size_width": 0.8,
        "size_height": 0.6,
        "heaviness": 250.0,
        "hollowness": 0.0,
    }
    fields.update(values)
    return ObservationRecord(class_label=class_label, instance_id=instance_id, repetition=repetition, **fields)


@pytest.fixture
def box() -> SyntheticObject:
    return SyntheticObject(
        name="metal_box_01", class_label="metal_box", shape_kind="box",
        length=0.2, width=0.1, height=0.08,
        true_rigidity=0.0, true_slide_angle=0.3, mass=0.4,
    )


@pytest.fixture
def cup() -> SyntheticObject:
    return SyntheticObject(
        name="cup_01", class_label="cup", shape_kind="cylinder_cup",
        length=0.08, width=0.08, height=0.12, cavity_depth=0.11,
        true_rigidity=0.02, true_slide_angle=0.35, mass=0.3,
    )


@pytest.fixture
def tray() -> SyntheticObject:
    return SyntheticObject(
        name="tray_01", class_label="tray", shape_kind="open_box",
        length=0.3, width=0.2, height=0.05, cavity_depth=0.04,
        true_rigidity=0.01, true_slide_angle=0.25, mass=0.5,
    )


@pytest.fixture
def ball() -> SyntheticObject:
    return SyntheticObject(
        name="ball_01", class_label="ball", shape_kind="sphere",
        length=0.1, width=0.1, height=0.1,
        true_rigidity=0.15, true_slide_angle=0.05, mass=0.25,
    )


@pytest.fixture
def sponge() -> SyntheticObject:
    return SyntheticObject(
        name="sponge_01", class_label="sponge", shape_kind="box",
        length=0.1, width=0.07, height=0.04,
        true_rigidity=0.7, true_slide_angle=0.8, mass=0.02,
    )


@pytest.fixture
def book() -> SyntheticObject:
    return SyntheticObject(
        name="book_01", class_label="book", shape_kind="flat_sheet",
        length=0.24, width=0.16, height=0.03,
        true_rigidity=0.0, true_slide_angle=None, mass=0.6,
    )


@pytest.fixture
def small_records():
    """Two classes, two instances each, three repetitions per instance."""
    records = []
    for class_label, base in (("cup", 0.2), ("plate", 0.7)):
        for i in (1, 2):
            for repetition in (1, 2, 3):
                records.append(make_record(
                    class_label, f"{class_label}_{i:02d}", repetition,
                    flatness=base + 0.01 * repetition,
                    hollowness=1.0 - base - 0.05 * i,
                    roughness=base / 2 + 0.02 * i,
                    heaviness=100.0 * i + (400.0 if class_label == "plate" else 0.0),
                    rigidity=0.05 * i,
                    size_height=base + 0.1 * i,
                ))
    return records
