"""Tests for press contact detection, rigidity, roughness and heaviness."""

import math

import numpy as np
import pytest

from concept_engine.errors import MeasurementError, PressIncompleteError, SlideNotObservedError
from extraction.interaction import (
    PressLog,
    RampLog,
    compute_heaviness,
    compute_rigidity,
    compute_roughness,
    detect_contact,
)
from extraction.simulator import synthesize_bundle

PERIOD = 0.05


def press_log(efforts, drop=0.0, contact=40, cutoff=70):
    """Press sampled every 50 ms with a linear height drop between contact and cutoff."""
    n = len(efforts)
    idx = np.arange(n)
    progress = np.clip((idx - contact) / (cutoff - contact), 0.0, 1.0)
    z = 0.3 - drop * progress
    return PressLog(idx * PERIOD, z, np.asarray(efforts, float))


def step_then_ramp(n=81, contact=40, cutoff=70):
    """Zero effort, a unit step at ``contact`` and a linear ramp reaching 8 at ``cutoff``."""
    idx = np.arange(n)
    ramp = 1.0 + (idx - contact) / (cutoff - contact) * 7.0
    return np.where(idx < contact, 0.0, ramp)


# ---------------------------------------------------------------------------
# Contact Detection
# ---------------------------------------------------------------------------

class TestDetectContact:
    def test_step_and_ramp(self):
        events = detect_contact(press_log(step_then_ramp()))
        assert events.t0 == pytest.approx(2.0)
        assert events.t1 == pytest.approx(3.5)
        assert (events.index0, events.index1) == (40, 70)

    def test_multi_joint_uses_first_departure(self):
        base = step_then_ramp()
        efforts = np.column_stack([base, 0.5 * base - 1.0])
        events = detect_contact(press_log(efforts))
        assert events.index0 == 40

    def test_cutoff_never_reached(self):
        with pytest.raises(PressIncompleteError):
            detect_contact(press_log(np.minimum(step_then_ramp(), 5.0)))

    def test_simulated_contact_within_one_sample(self, box):
        log = synthesize_bundle(box).press_log
        events = detect_contact(log)
        assert abs(events.t0 - 10.0) <= PERIOD + 1e-9
        assert events.t1 == pytest.approx(18.0, abs=PERIOD + 1e-9)


class TestPressLog:
    def test_rising_height_rejected(self):
        with pytest.raises(ValueError):
            PressLog([0.0, 0.1], [0.1, 0.2], [0.0, 1.0])

    def test_timestamps_must_increase(self):
        with pytest.raises(ValueError):
            PressLog([0.0, 0.0], [0.1, 0.1], [0.0, 1.0])

    def test_default_joint_names(self):
        log = PressLog([0.0, 0.1], [0.1, 0.1], np.zeros((2, 3)))
        assert log.joint_names == ["joint_1", "joint_2", "joint_3"]


# ---------------------------------------------------------------------------
# Rigidity
# ---------------------------------------------------------------------------

class TestRigidity:
    def test_rigid_object(self):
        assert compute_rigidity(press_log(step_then_ramp()), 0.1) == 0.0

    def test_half_deformation(self):
        log = press_log(step_then_ramp(), drop=0.05)
        assert compute_rigidity(log, 0.10) == pytest.approx(0.5)

    def test_capped_at_one(self):
        log = press_log(step_then_ramp(), drop=0.2)
        assert compute_rigidity(log, 0.10) == 1.0

    def test_contact_must_precede_cutoff(self):
        efforts = np.where(np.arange(81) < 40, 0.0, 9.0)
        with pytest.raises(MeasurementError):
            compute_rigidity(press_log(efforts), 0.1)

    def test_height_must_be_positive(self):
        with pytest.raises(MeasurementError):
            compute_rigidity(press_log(step_then_ramp()), 0.0)

    def test_simulated_sponge(self, sponge):
        log = synthesize_bundle(sponge).press_log
        assert compute_rigidity(log, sponge.height) == pytest.approx(0.7, abs=0.02)


# ---------------------------------------------------------------------------
# Roughness and Heaviness
# ---------------------------------------------------------------------------

class TestRoughness:
    @pytest.mark.parametrize("slide_at,expected", [(0.0, 0.0), (1.0, 0.5), (2.0, 1.0), (0.5, 0.25)])
    def test_slide_angle(self, slide_at, expected):
        log = RampLog([0.0, 1.0, 2.0], [0.0, math.pi / 4, math.pi / 2], slide_detected_at=slide_at)
        assert compute_roughness(log) == pytest.approx(expected)

    def test_no_slide(self):
        with pytest.raises(SlideNotObservedError):
            compute_roughness(RampLog([0.0, 1.0], [0.0, 0.5]))

    def test_simulated_ramp(self, box):
        log = synthesize_bundle(box).ramp_log
        assert compute_roughness(log) == pytest.approx(0.3 / (math.pi / 2), abs=0.0025 / (math.pi / 2) + 1e-9)

    def test_angle_must_start_at_zero(self):
        with pytest.raises(ValueError):
            RampLog([0.0, 1.0], [0.1, 0.2])


class TestHeaviness:
    @pytest.mark.parametrize("reading,expected", [
        (0.0, 0),
        (250.4, 250),
        (250.5, 250),
        (250.6, 251),
        (500.0, 500),
    ])
    def test_quantization(self, reading, expected):
        assert compute_heaviness(reading) == expected

    @pytest.mark.parametrize("reading", [-1.0, float("nan")])
    def test_invalid_reading(self, reading):
        with pytest.raises(MeasurementError):
            compute_heaviness(reading)

    def test_simulated_mass(self, tray):
        assert compute_heaviness(synthesize_bundle(tray).scale_reading) == 500
