"""
Interaction Extraction - Rigidity, Roughness and Heaviness

Invasive property extraction from manipulator logs: a vertical press for
rigidity, a tilting ramp for roughness and a scale reading for heaviness.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from concept_engine.config import InteractionConfig
from concept_engine.errors import MeasurementError, PressIncompleteError, SlideNotObservedError

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2


@dataclass(frozen=True)
class PressLog:
    """End-effector height and joint efforts sampled during a press."""

    t: np.ndarray
    z: np.ndarray
    efforts: np.ndarray
    joint_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        t, z, efforts = np.asarray(self.t, float), np.asarray(self.z, float), np.asarray(self.efforts, float)
        if efforts.ndim == 1:
            efforts = efforts[:, None]
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "efforts", efforts)
        if not self.joint_names:
            object.__setattr__(self, "joint_names", [f"joint_{i + 1}" for i in range(efforts.shape[1])])

        if len(t) == 0:
            raise ValueError("press log is empty")
        if len(z) != len(t) or len(efforts) != len(t):
            raise ValueError("press log columns have different lengths")
        if len(self.joint_names) != efforts.shape[1]:
            raise ValueError("joint names do not match effort columns")
        if np.any(np.diff(t) <= 0):
            raise ValueError("press log timestamps must be strictly increasing")
        if np.any(np.diff(z) > 1e-12):
            raise ValueError("end-effector height must not rise during the press")


@dataclass(frozen=True)
class RampLog:
    """Ramp angle over time and the moment the object started to slide."""

    t: np.ndarray
    angle: np.ndarray
    slide_detected_at: Optional[float] = None

    def __post_init__(self):
        t, angle = np.asarray(self.t, float), np.asarray(self.angle, float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "angle", angle)
        if len(t) == 0 or len(angle) != len(t):
            raise ValueError("ramp log must be non-empty with one angle per timestamp")
        if np.any(np.diff(t) <= 0):
            raise ValueError("ramp log timestamps must be strictly increasing")
        if abs(angle[0]) > 1e-9 or np.any(np.diff(angle) < 0):
            raise ValueError("ramp angle must start at 0 and never decrease")
        if self.slide_detected_at is not None and not (t[0] <= self.slide_detected_at <= t[-1]):
            raise ValueError(f"slide timestamp {self.slide_detected_at} outside log span")


@dataclass(frozen=True)
class ContactEvents:
    """Contact (t0) and cutoff (t1) samples of a press."""

    t0: float
    t1: float
    index0: int
    index1: int


# =============================================================================
# Rigidity
# =============================================================================

def detect_contact(
    log: PressLog,
    effort_threshold: float = 8.0,
    params: Optional[InteractionConfig] = None,
) -> ContactEvents:
    """
    Locate contact and cutoff in a press log.

    The baseline of every joint is taken over the first samples; contact is the
    first sample where any joint leaves its baseline by more than the adaptive
    margin, moved back to the start of that departure. Cutoff is the first
    sample where any joint effort reaches ``effort_threshold``.

    Args:
        log: Press log spanning the whole press
        effort_threshold: Cutoff effort in N·m
        params: Baseline and margin settings

    Returns:
        ContactEvents

    Raises:
        PressIncompleteError: The cutoff is never reached
    """
    params = params or InteractionConfig()
    efforts = log.efforts
    n = len(log.t)

    reached = np.any(np.abs(efforts) >= effort_threshold, axis=1)
    if not reached.any():
        raise PressIncompleteError(
            f"efforts never reached the {effort_threshold} N·m cutoff "
            f"(peak {np.abs(efforts).max():.3f} N·m)"
        )
    index1 = int(np.argmax(reached))

    n_base = min(n, max(2, int(n * params.baseline_fraction)))
    baseline = efforts[:n_base].mean(axis=0)
    spread = efforts[:n_base].std(axis=0)
    margin = np.maximum(params.margin_multiplier * spread, params.margin_floor)
    deviation = np.abs(efforts - baseline)

    departed = np.any(deviation > margin, axis=1)
    index0 = int(np.argmax(departed)) if departed.any() else index1

    # walk back to where the departing joints left the noise band
    joints = deviation[index0] > margin
    if not joints.any():
        joints = np.ones(efforts.shape[1], dtype=bool)
    band = np.maximum(params.knee_sigma * spread, 1e-9)[joints]
    while index0 > 0 and np.any(deviation[index0 - 1, joints] > band):
        index0 -= 1

    return ContactEvents(float(log.t[index0]), float(log.t[index1]), index0, index1)


def compute_rigidity(
    log: PressLog,
    h: float,
    effort_threshold: float = 8.0,
    params: Optional[InteractionConfig] = None,
) -> float:
    """
    Normalized deformation of the object under the press.

    Args:
        log: Press log
        h: Object height in meters
        effort_threshold: Cutoff effort in N·m
        params: Contact detection settings

    Returns:
        ri in [0, 1]; 0 means the object did not yield
    """
    if h <= 0:
        raise MeasurementError(f"object height must be positive, got {h}")
    events = detect_contact(log, effort_threshold, params)
    if events.index0 >= events.index1:
        raise MeasurementError(
            f"contact at t={events.t0:.3f}s does not precede cutoff at t={events.t1:.3f}s"
        )
    deformation = max(0.0, float(log.z[events.index0] - log.z[events.index1]))
    return min(1.0, deformation / h)


# =============================================================================
# Roughness and Heaviness
# =============================================================================

def compute_roughness(log: RampLog) -> float:
    """
    Normalized ramp angle at which the object started to slide.

    Raises:
        SlideNotObservedError: The object never slid before the ramp limit
    """
    if log.slide_detected_at is None:
        raise SlideNotObservedError(
            f"no slide observed up to {log.angle[-1]:.4f} rad; roughness is missing"
        )
    a_i = float(log.angle[0])
    a_r = float(np.interp(log.slide_detected_at, log.t, log.angle))
    return min(1.0, abs(a_i - a_r) / HALF_PI)


def compute_heaviness(scale_reading: float) -> int:
    """Scale reading quantized to whole grams, halves rounded down."""
    if math.isnan(scale_reading) or scale_reading < 0:
        raise MeasurementError(f"scale reading must be a non-negative weight, got {scale_reading}")
    return int(math.ceil(scale_reading - 0.5))
