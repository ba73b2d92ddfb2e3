"""
Bundle store - on-disk feature bundles.

One directory per observation:

    side.ply          ASCII PLY, side camera (x y z per vertex)
    top.ply           ASCII PLY, top camera
    press.log         header ``t z <joint names>``, one sample per line
    ramp.log          ``# slide_detected_at=<seconds|none>``, header ``t angle``, samples
    observation.txt   KEY=value lines: labels, marker distances, scale reading

The ramp log is optional; its absence means roughness was not measured.
"""

import logging
import os
from typing import List, Optional, TextIO

import numpy as np
from dotenv import dotenv_values

from concept_engine.errors import DatasetError
from extraction.interaction import PressLog, RampLog
from extraction.simulator import FeatureBundle

logger = logging.getLogger(__name__)

SIDE_CLOUD = "side.ply"
TOP_CLOUD = "top.ply"
PRESS_LOG = "press.log"
RAMP_LOG = "ramp.log"
OBSERVATION = "observation.txt"

_FMT = "%.9f"


def bundle_dirname(class_label: str, instance_id: str, repetition: int) -> str:
    return f"{class_label}__{instance_id}__r{repetition:02d}"


# =============================================================================
# Point Clouds (ASCII PLY)
# =============================================================================

def write_ply(path: str, cloud: np.ndarray):
    header = "\n".join([
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ])
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(header + "\n")
        np.savetxt(f, cloud, fmt=_FMT)


def read_ply(path: str) -> np.ndarray:
    """Read the x, y, z columns of an ASCII PLY vertex list."""
    with open(path, "r", encoding="ascii") as f:
        if f.readline().strip() != "ply":
            raise DatasetError(f"{path}: not a PLY file")
        count, properties = None, []
        for line in f:
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "format" and tokens[1] != "ascii":
                raise DatasetError(f"{path}: only ASCII PLY is supported")
            if tokens[:2] == ["element", "vertex"]:
                count = int(tokens[2])
            elif tokens[0] == "property" and count is not None and len(tokens) == 3:
                properties.append(tokens[2])
            elif tokens[0] == "end_header":
                break
        if count is None or not {"x", "y", "z"} <= set(properties):
            raise DatasetError(f"{path}: PLY header lacks vertex x/y/z properties")
        data = np.loadtxt(f, ndmin=2, max_rows=count) if count else np.empty((0, len(properties)))
    if len(data) != count:
        raise DatasetError(f"{path}: expected {count} vertices, found {len(data)}")
    columns = [properties.index(axis) for axis in ("x", "y", "z")]
    return data[:, columns]


# =============================================================================
# Logs
# =============================================================================

def write_press_log(path: str, log: PressLog):
    table = np.column_stack([log.t, log.z, log.efforts])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(" ".join(["t", "z", *log.joint_names]) + "\n")
        np.savetxt(f, table, fmt=_FMT)


def read_press_log(path: str) -> PressLog:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        data = np.loadtxt(f, ndmin=2)
    if header[:2] != ["t", "z"] or data.shape[1] != len(header):
        raise DatasetError(f"{path}: press log header must be 't z <joints...>' matching the columns")
    try:
        return PressLog(data[:, 0], data[:, 1], data[:, 2:], header[2:])
    except ValueError as e:
        raise DatasetError(f"{path}: {e}") from e


def write_ramp_log(path: str, log: RampLog):
    slide = "none" if log.slide_detected_at is None else repr(float(log.slide_detected_at))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# slide_detected_at={slide}\n")
        f.write("t angle\n")
        np.savetxt(f, np.column_stack([log.t, log.angle]), fmt=_FMT)


def read_ramp_log(path: str) -> RampLog:
    with open(path, "r", encoding="utf-8") as f:
        marker = f.readline().strip()
        header = f.readline().split()
        data = np.loadtxt(f, ndmin=2)
    if not marker.startswith("# slide_detected_at=") or header != ["t", "angle"]:
        raise DatasetError(f"{path}: malformed ramp log header")
    value = marker.split("=", 1)[1].strip()
    slide = None if value.lower() == "none" else float(value)
    try:
        return RampLog(data[:, 0], data[:, 1], slide)
    except ValueError as e:
        raise DatasetError(f"{path}: {e}") from e


# =============================================================================
# Bundles
# =============================================================================

def _write_observation(f: TextIO, bundle: FeatureBundle):
    entries = {
        "CLASS_LABEL": bundle.class_label,
        "INSTANCE_ID": bundle.instance_id,
        "REPETITION": str(bundle.repetition),
        "D_R": repr(float(bundle.d_r)),
        "D_H": repr(float(bundle.d_h)),
        "SCALE_READING": repr(float(bundle.scale_reading)),
    }
    for key, value in entries.items():
        f.write(f"{key}={value}\n")


def write_bundle(bundle: FeatureBundle, root: str) -> str:
    """
    Write a bundle under ``root``.

    Returns:
        The bundle directory
    """
    directory = os.path.join(root, bundle_dirname(*bundle.key))
    os.makedirs(directory, exist_ok=True)
    write_ply(os.path.join(directory, SIDE_CLOUD), bundle.side_cloud)
    write_ply(os.path.join(directory, TOP_CLOUD), bundle.top_cloud)
    write_press_log(os.path.join(directory, PRESS_LOG), bundle.press_log)
    if bundle.ramp_log is not None:
        write_ramp_log(os.path.join(directory, RAMP_LOG), bundle.ramp_log)
    with open(os.path.join(directory, OBSERVATION), "w", encoding="utf-8", newline="\n") as f:
        _write_observation(f, bundle)
    return directory


def read_bundle(directory: str) -> FeatureBundle:
    """
    Load a bundle directory.

    Raises:
        DatasetError: A required file is missing or malformed
    """
    for name in (SIDE_CLOUD, TOP_CLOUD, PRESS_LOG, OBSERVATION):
        if not os.path.exists(os.path.join(directory, name)):
            raise DatasetError(f"bundle {directory} is missing {name}")

    fields = dotenv_values(os.path.join(directory, OBSERVATION), interpolate=False)
    try:
        class_label = fields["CLASS_LABEL"]
        instance_id = fields["INSTANCE_ID"]
        repetition = int(fields["REPETITION"])
        d_r, d_h = float(fields["D_R"]), float(fields["D_H"])
        reading = float(fields["SCALE_READING"])
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetError(f"bundle {directory}: bad observation file ({e})") from e

    ramp_path = os.path.join(directory, RAMP_LOG)
    ramp: Optional[RampLog] = read_ramp_log(ramp_path) if os.path.exists(ramp_path) else None

    try:
        return FeatureBundle(
            class_label=class_label,
            instance_id=instance_id,
            repetition=repetition,
            side_cloud=read_ply(os.path.join(directory, SIDE_CLOUD)),
            top_cloud=read_ply(os.path.join(directory, TOP_CLOUD)),
            d_r=d_r,
            d_h=d_h,
            press_log=read_press_log(os.path.join(directory, PRESS_LOG)),
            ramp_log=ramp,
            scale_reading=reading,
        )
    except ValueError as e:
        raise DatasetError(f"bundle {directory}: {e}") from e


def list_bundle_dirs(root: str) -> List[str]:
    """Bundle directories directly under ``root``, sorted by name."""
    if not os.path.isdir(root):
        raise DatasetError(f"bundle root not found: {root}")
    found = []
    for name in sorted(os.listdir(root)):
        path = os.path.join(root, name)
        if os.path.isfile(os.path.join(path, OBSERVATION)):
            found.append(path)
    if not found:
        logger.warning(f"[Bundles] no bundle directories under {root}")
    return found
