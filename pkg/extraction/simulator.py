"""
Object Simulator - Synthetic Feature Bundles

Stands in for the acquisition rig (two depth cameras, a manipulator, a tilting
ramp and a scale). Parametric objects are turned into the raw feature data the
extraction stage consumes, together with the ground-truth property values those
extractions must recover.

Sensor model:
- side camera: the object's outer surface plus the support table around it
- top camera: an orthographic height map of the object, cropped to its markers
- press: approach from above at constant speed; after contact the lead joint
  effort ramps linearly and the object yields in proportion to that effort
- ramp: the tilt angle grows at constant speed until the object slides
"""

import io
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from concept_engine.config import FlatnessParams, GeometryConfig, NoiseSpec, SimulationConfig
from concept_engine.errors import SceneParseError, SimulationError
from database.records import ObservationRecord
from extraction.functional import PhysicalVector
from extraction.geometry import SizeTriple
from extraction.interaction import PressLog, RampLog, compute_heaviness

logger = logging.getLogger(__name__)

ShapeKind = Literal["box", "open_box", "cylinder_cup", "sphere", "flat_sheet"]
OPEN_KINDS = ("open_box", "cylinder_cup")
ROUND_KINDS = ("cylinder_cup", "sphere")
WALL_THICKNESS = 0.02

JOINT_NAMES = ["joint_1", "joint_2", "joint_3", "joint_4", "joint_5"]
JOINT_WEIGHTS = np.array([1.0, 0.6, 0.35, 0.2, 0.1])
JOINT_OFFSETS = np.array([0.0, -1.5, 0.8, 0.3, -0.2])

_EPS = 1e-9


# =============================================================================
# Domain Types
# =============================================================================

class SyntheticObject(BaseModel):
    """
    Parametric description of one object instance.

    Round kinds use ``length`` as their diameter; a sphere's three extents are
    equal. ``true_rigidity`` is the deformation at the effort cutoff relative to
    the height (0 = rigid). A missing ``true_slide_angle`` means the object
    never slides on the ramp.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "object"
    class_label: str = "object"
    shape_kind: ShapeKind
    length: float
    width: float
    height: float
    cavity_depth: float = Field(0.0, ge=0)
    wall_thickness: float = Field(WALL_THICKNESS, gt=0)
    true_rigidity: float = Field(0.0, ge=0, le=1)
    true_slide_angle: Optional[float] = Field(None, ge=0, lt=math.pi / 2)
    mass: float = Field(ge=0)

    @field_validator("true_slide_angle", mode="before")
    @classmethod
    def _blank_is_missing(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none"):
            return None
        return value

    @model_validator(mode="after")
    def _check_geometry(self):
        problems = geometry_problems(self)
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def base_thickness(self) -> float:
        return self.height - self.cavity_depth

    @property
    def extents(self) -> Tuple[float, float, float]:
        return (self.length, self.width, self.height)


def geometry_problems(obj: SyntheticObject) -> List[str]:
    """List every violated geometric constraint of an object description."""
    problems = []
    if min(obj.length, obj.width, obj.height) <= 0:
        problems.append(f"degenerate extents {obj.extents}")
        return problems
    if obj.cavity_depth > obj.height:
        problems.append("cavity deeper than the object")
    if obj.shape_kind not in OPEN_KINDS and obj.cavity_depth != 0:
        problems.append(f"{obj.shape_kind} is solid; cavity_depth must be 0")
    if obj.shape_kind in ROUND_KINDS and obj.length != obj.width:
        problems.append(f"{obj.shape_kind} needs length == width (diameter)")
    if obj.shape_kind == "sphere" and obj.height != obj.length:
        problems.append("sphere needs equal extents")
    if obj.shape_kind in OPEN_KINDS and 2 * obj.wall_thickness >= min(obj.length, obj.width):
        problems.append("walls leave no cavity")
    return problems


@dataclass(frozen=True, eq=False)
class FeatureBundle:
    """Raw feature data of one observation."""

    class_label: str
    instance_id: str
    repetition: int
    side_cloud: np.ndarray
    top_cloud: np.ndarray
    d_r: float
    d_h: float
    press_log: PressLog
    ramp_log: Optional[RampLog]
    scale_reading: float
    side_object_mask: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("side_cloud", "top_cloud"):
            cloud = getattr(self, name)
            if cloud.ndim != 2 or cloud.shape[1] != 3 or len(cloud) == 0:
                raise ValueError(f"{name} must be a non-empty (N, 3) array")
        if not self.d_r >= self.d_h >= 0:
            raise ValueError(f"marker distances must satisfy d_r >= d_h >= 0, got {self.d_r}, {self.d_h}")
        if self.scale_reading < 0:
            raise ValueError("scale reading must be non-negative")
        if self.repetition < 1:
            raise ValueError("repetition numbers start at 1")

    @property
    def key(self) -> Tuple[str, str, int]:
        return (self.class_label, self.instance_id, self.repetition)


# =============================================================================
# Surface Sampling
# =============================================================================

def _axis(lo: float, hi: float, spacing: float) -> np.ndarray:
    n = max(2, int(math.ceil((hi - lo) / spacing - _EPS)) + 1)
    return np.linspace(lo, hi, n)


def _centred_axis(half: float, spacing: float) -> np.ndarray:
    # odd count keeps the points on the axes, and with them the rim at r == radius
    m = max(1, int(math.ceil(half / spacing - _EPS)))
    return np.linspace(-half, half, 2 * m + 1)


def _ring_count(radius: float, spacing: float) -> int:
    return 4 * max(1, int(math.ceil(2 * math.pi * radius / (4 * spacing))))


def top_heightmap(obj: SyntheticObject, spacing: float) -> np.ndarray:
    """Orthographic top view: one surface point per grid cell inside the footprint."""
    half_l, half_w = obj.length / 2, obj.width / 2
    if obj.shape_kind in ROUND_KINDS:
        axis = _centred_axis(half_l, spacing)
        xs, ys = np.meshgrid(axis, axis, indexing="ij")
    else:
        xs, ys = np.meshgrid(_axis(-half_l, half_l, spacing), _axis(-half_w, half_w, spacing), indexing="ij")
    x, y = xs.ravel(), ys.ravel()
    base = obj.base_thickness
    t = obj.wall_thickness

    if obj.shape_kind in ROUND_KINDS:
        radius = half_l
        r = np.hypot(x, y)
        keep = r <= radius + _EPS
        x, y, r = x[keep], y[keep], r[keep]
        if obj.shape_kind == "sphere":
            z = radius + np.sqrt(np.maximum(radius ** 2 - r ** 2, 0.0))
        else:
            z = np.where(r >= radius - t - _EPS, obj.height, base)
    elif obj.shape_kind == "open_box":
        rim = (np.abs(x) >= half_l - t - _EPS) | (np.abs(y) >= half_w - t - _EPS)
        z = np.where(rim, obj.height, base)
    else:
        z = np.full_like(x, obj.height)
    return np.column_stack([x, y, z])


def _outer_surface(obj: SyntheticObject, spacing: float) -> np.ndarray:
    half_l, half_w, h = obj.length / 2, obj.width / 2, obj.height
    parts = []
    if obj.shape_kind == "sphere":
        radius = half_l
        n_lon = _ring_count(radius, spacing)
        n_lat = 2 * max(1, int(math.ceil(math.pi * radius / (2 * spacing)))) + 1
        phi, theta = np.meshgrid(
            np.linspace(0.0, math.pi, n_lat),
            np.arange(n_lon) * (2 * math.pi / n_lon),
            indexing="ij",
        )
        phi, theta = phi.ravel(), theta.ravel()
        parts.append(np.column_stack([
            radius * np.sin(phi) * np.cos(theta),
            radius * np.sin(phi) * np.sin(theta),
            radius + radius * np.cos(phi),
        ]))
    elif obj.shape_kind == "cylinder_cup":
        radius = half_l
        n = _ring_count(radius, spacing)
        theta, z = np.meshgrid(np.arange(n) * (2 * math.pi / n), _axis(0.0, h, spacing), indexing="ij")
        theta, z = theta.ravel(), z.ravel()
        parts.append(np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z]))
    else:
        zs = _axis(0.0, h, spacing)
        ys, zy = np.meshgrid(_axis(-half_w, half_w, spacing), zs, indexing="ij")
        xs, zx = np.meshgrid(_axis(-half_l, half_l, spacing), zs, indexing="ij")
        for sign in (-1.0, 1.0):
            parts.append(np.column_stack([np.full(ys.size, sign * half_l), ys.ravel(), zy.ravel()]))
            parts.append(np.column_stack([xs.ravel(), np.full(xs.size, sign * half_w), zx.ravel()]))
    parts.append(top_heightmap(obj, spacing))
    return np.vstack(parts)


def _table(obj: SyntheticObject, settings: SimulationConfig, spacing: float) -> np.ndarray:
    size = max(settings.table_size, 3 * max(obj.length, obj.width))
    xs, ys = np.meshgrid(_axis(-size / 2, size / 2, spacing), _axis(-size / 2, size / 2, spacing), indexing="ij")
    x, y = xs.ravel(), ys.ravel()
    shadow = settings.table_shadow
    if obj.shape_kind in ROUND_KINDS:
        occluded = np.hypot(x, y) <= obj.length / 2 + shadow
    else:
        occluded = (np.abs(x) <= obj.length / 2 + shadow) & (np.abs(y) <= obj.width / 2 + shadow)
    return np.column_stack([x[~occluded], y[~occluded], np.zeros((~occluded).sum())])


# =============================================================================
# Interaction Logs
# =============================================================================

def _press_log(obj: SyntheticObject, settings: SimulationConfig, cutoff: float,
               rng: np.random.Generator, effort_std: float) -> PressLog:
    h = obj.height
    contact_time = settings.approach_clearance / settings.press_speed
    cutoff_time = contact_time + cutoff / settings.effort_rate
    n = int(math.ceil(cutoff_time / settings.press_period)) + 3
    t = np.arange(n) * settings.press_period

    lead = np.minimum(settings.effort_rate * np.maximum(t - contact_time, 0.0), cutoff)
    yielded = obj.true_rigidity * h * lead / cutoff
    approach = h + settings.approach_clearance - settings.press_speed * t
    z = np.where(t < contact_time, np.maximum(approach, h), h - yielded)

    efforts = JOINT_OFFSETS + np.outer(lead, JOINT_WEIGHTS)
    efforts = efforts + rng.normal(0.0, effort_std, efforts.shape)
    return PressLog(t, z, efforts, list(JOINT_NAMES))


def _ramp_log(obj: SyntheticObject, settings: SimulationConfig,
              rng: np.random.Generator, angle_std: float) -> RampLog:
    step = settings.ramp_speed * settings.ramp_period
    n = int(math.floor(settings.ramp_limit / step + _EPS)) + 1
    t = np.arange(n) * settings.ramp_period
    angle = np.minimum(settings.ramp_speed * t, settings.ramp_limit)
    angle = angle + rng.normal(0.0, angle_std, n)
    angle[0] = 0.0
    angle = np.maximum.accumulate(np.clip(angle, 0.0, None))

    slide_at = None
    if obj.true_slide_angle is not None:
        slid = np.flatnonzero(angle >= obj.true_slide_angle)
        if slid.size:
            slide_at = float(t[slid[0]])
    return RampLog(t, angle, slide_at)


# =============================================================================
# Bundle Synthesis
# =============================================================================

def synthesize_bundle(
    obj: SyntheticObject,
    noise: Optional[NoiseSpec] = None,
    seed: int = 0,
    repetition: int = 1,
    settings: Optional[SimulationConfig] = None,
    effort_cutoff: float = 8.0,
) -> FeatureBundle:
    """
    Generate the raw feature data of one observation.

    Args:
        obj: Object description
        noise: Sensor noise; defaults to the settings' noise (zero by default)
        seed: Seed of the noise stream; identical inputs give identical bundles
        repetition: Repetition number recorded in the bundle
        settings: Rig geometry and sampling density
        effort_cutoff: Press cutoff effort in N·m

    Returns:
        FeatureBundle with the ground-truth object membership of the side cloud
    """
    problems = geometry_problems(obj)
    if problems:
        raise SimulationError(f"{obj.name}: {'; '.join(problems)}")
    settings = settings or SimulationConfig()
    noise = noise or settings.noise
    spacing = 1.0 / math.sqrt(settings.density)
    rng = np.random.default_rng(seed)

    table = _table(obj, settings, spacing)
    surface = _outer_surface(obj, spacing)
    side = np.vstack([table, surface])
    side = side + rng.normal(0.0, noise.point_std, side.shape)
    mask = np.concatenate([np.zeros(len(table), bool), np.ones(len(surface), bool)])

    top = top_heightmap(obj, spacing)
    top = top + rng.normal(0.0, noise.point_std, top.shape)

    marker_height = obj.base_thickness if obj.shape_kind in OPEN_KINDS else obj.height
    d_r = settings.camera_height + rng.normal(0.0, noise.marker_std)
    d_h = settings.camera_height - marker_height + rng.normal(0.0, noise.marker_std)
    d_h = float(min(max(d_h, 0.0), d_r))

    press = _press_log(obj, settings, effort_cutoff, rng, noise.effort_std)
    ramp = _ramp_log(obj, settings, rng, noise.angle_std)
    reading = max(0.0, obj.mass * 1000.0 + rng.normal(0.0, noise.scale_std))

    return FeatureBundle(
        class_label=obj.class_label,
        instance_id=obj.name,
        repetition=repetition,
        side_cloud=side,
        top_cloud=top,
        d_r=float(d_r),
        d_h=d_h,
        press_log=press,
        ramp_log=ramp,
        scale_reading=float(reading),
        side_object_mask=mask,
    )


# =============================================================================
# Ground Truth
# =============================================================================

def _expected_flatness(obj: SyntheticObject, spacing: float, params: FlatnessParams) -> float:
    if obj.shape_kind == "sphere":
        return 0.0
    z = top_heightmap(obj, spacing)[:, 2]
    minimum = max(params.min_plane_points, math.ceil(params.ransac.min_inlier_fraction * len(z)))
    # a top level too small for a plane leaves nothing flat on top
    members = int(np.sum(np.abs(z - z.max()) <= params.ransac.distance_threshold))
    return members / len(z) if members >= minimum else 0.0


def expected_properties(
    obj: SyntheticObject,
    settings: Optional[SimulationConfig] = None,
    geometry: Optional[GeometryConfig] = None,
) -> PhysicalVector:
    """Ground-truth physical properties the extraction stage should recover."""
    settings = settings or SimulationConfig()
    geometry = geometry or GeometryConfig()
    spacing = 1.0 / math.sqrt(settings.density)

    extents = np.array(obj.extents, dtype=float)
    si = SizeTriple(*(float(v) for v in extents / extents.max()))

    cavity = obj.cavity_depth if obj.shape_kind in OPEN_KINDS else 0.0
    ho = 0.0 if cavity < geometry.min_cavity_depth else min(1.0, cavity / obj.height)
    ro = None if obj.true_slide_angle is None else obj.true_slide_angle / (math.pi / 2)

    return PhysicalVector(
        si=si,
        fl=_expected_flatness(obj, spacing, geometry.flatness),
        ho=ho,
        he=float(compute_heaviness(obj.mass * 1000.0)),
        ri=obj.true_rigidity,
        ro=ro,
    )


# =============================================================================
# Scenes
# =============================================================================

def load_scene(path: str) -> List[SyntheticObject]:
    """
    Read a scene file: ``field=value`` records separated by blank lines.

    Raises:
        SceneParseError: A record is malformed or describes an invalid object
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise SceneParseError(f"cannot read scene file {path}: {e}") from e
    return parse_scene(text, source=path)


def parse_scene(text: str, source: str = "<scene>") -> List[SyntheticObject]:
    objects = []
    blocks = [b for b in _split_blocks(text) if b.strip()]
    for number, block in enumerate(blocks, start=1):
        fields = dotenv_values(stream=io.StringIO(block), interpolate=False)
        if not fields:
            continue
        if any(value is None for value in fields.values()):
            raise SceneParseError(f"{source}: record {number} has a field without a value")
        try:
            objects.append(SyntheticObject.model_validate(fields))
        except ValidationError as e:
            detail = "; ".join(f"{'.'.join(map(str, err['loc'])) or 'object'}: {err['msg']}"
                               for err in e.errors())
            raise SceneParseError(f"{source}: record {number}: {detail}") from e
    names = [o.name for o in objects]
    duplicates = sorted({n for n in names if names.count(n) > 1})
    if duplicates:
        raise SceneParseError(f"{source}: duplicate object names {duplicates}")
    return objects


def _split_blocks(text: str) -> List[str]:
    blocks, current = [], []
    for line in text.splitlines():
        if line.strip():
            current.append(line)
        elif current:
            blocks.append("\n".join(current))
            current = []
    if current:
        blocks.append("\n".join(current))
    # comment-only blocks carry no record
    return [b for b in blocks if any(not l.lstrip().startswith("#") for l in b.splitlines())]


def render_scene(objects: List[SyntheticObject]) -> str:
    records = []
    for obj in objects:
        data = obj.model_dump()
        lines = [f"{key}={'none' if value is None else value}" for key, value in data.items()]
        records.append("\n".join(lines))
    return "\n\n".join(records) + "\n"


# class -> (shape, length range, width range | None, height range | None,
#           base thickness range | None, rigidity range, slide angle range, mass range)
HOUSEHOLD_CLASSES: Dict[str, tuple] = {
    "ball": ("sphere", (0.06, 0.10), None, None, None, (0.05, 0.25), (0.02, 0.08), (0.05, 0.45)),
    "book": ("flat_sheet", (0.18, 0.28), (0.12, 0.20), (0.03, 0.05), None, (0.0, 0.03), (0.30, 0.45), (0.20, 1.00)),
    "bowl": ("cylinder_cup", (0.12, 0.18), None, (0.05, 0.08), (0.005, 0.010), (0.0, 0.05), (0.30, 0.50), (0.15, 0.50)),
    "cup": ("cylinder_cup", (0.07, 0.09), None, (0.08, 0.11), (0.005, 0.010), (0.0, 0.03), (0.25, 0.40), (0.20, 0.35)),
    "metal_box": ("box", (0.12, 0.22), (0.08, 0.15), (0.04, 0.10), None, (0.0, 0.02), (0.15, 0.30), (0.20, 0.80)),
    "paper_box": ("box", (0.15, 0.30), (0.10, 0.20), (0.06, 0.15), None, (0.10, 0.30), (0.35, 0.50), (0.05, 0.20)),
    "plastic_box": ("box", (0.15, 0.25), (0.10, 0.18), (0.06, 0.12), None, (0.05, 0.15), (0.25, 0.40), (0.10, 0.40)),
    "plate": ("cylinder_cup", (0.18, 0.26), None, (0.025, 0.035), (0.008, 0.012), (0.0, 0.03), (0.25, 0.40), (0.30, 0.70)),
    "sponge": ("box", (0.08, 0.12), (0.05, 0.08), (0.03, 0.045), None, (0.50, 0.80), (0.60, 0.90), (0.01, 0.03)),
    "to_go_cup": ("cylinder_cup", (0.07, 0.08), None, (0.12, 0.16), (0.003, 0.006), (0.30, 0.50), (0.20, 0.35), (0.01, 0.03)),
    "tray": ("open_box", (0.30, 0.45), (0.20, 0.30), (0.03, 0.045), (0.005, 0.008), (0.0, 0.05), (0.20, 0.40), (0.20, 0.80)),
}

# rolled lips, thinner than a grid cell of the top view
THIN_RIMS: Dict[str, float] = {"bowl": 0.0004, "to_go_cup": 0.0004}


def household_scene(seed: int = 0, instances_per_class: int = 10) -> List[SyntheticObject]:
    """
    Synthetic household objects: every class of the acquisition set with
    class-typical dimensions, compliance, friction and mass.
    """
    rng = np.random.default_rng(seed)

    def draw(bounds) -> float:
        return round(float(rng.uniform(*bounds)), 4)

    objects = []
    for class_label, (kind, length, width, height, base, rigidity, slide, mass) in HOUSEHOLD_CLASSES.items():
        for i in range(instances_per_class):
            l = draw(length)
            w = l if kind in ROUND_KINDS else draw(width)
            h = l if kind == "sphere" else draw(height)
            cavity = round(h - draw(base), 4) if base else 0.0
            objects.append(SyntheticObject(
                name=f"{class_label}_{i + 1:02d}",
                class_label=class_label,
                shape_kind=kind,
                length=l,
                width=w,
                height=h,
                cavity_depth=cavity,
                wall_thickness=THIN_RIMS.get(class_label, WALL_THICKNESS),
                true_rigidity=draw(rigidity),
                true_slide_angle=draw(slide),
                mass=draw(mass),
            ))
    return objects


def ground_truth_records(
    objects: List[SyntheticObject],
    repetitions: int = 10,
    jitter: float = 0.0,
    seed: int = 0,
    settings: Optional[SimulationConfig] = None,
    geometry: Optional[GeometryConfig] = None,
) -> List[ObservationRecord]:
    """
    Observation records taken straight from the ground truth.

    ``jitter`` adds zero-mean Gaussian noise to the bounded scalar properties of
    every repetition; size and heaviness stay exact.
    """
    rng = np.random.default_rng(seed)
    records = []
    for obj in objects:
        truth = expected_properties(obj, settings, geometry).columns()
        for repetition in range(1, repetitions + 1):
            values = dict(truth)
            for column in ("flatness", "rigidity", "roughness", "hollowness"):
                if values[column] is not None and jitter > 0:
                    values[column] = float(np.clip(values[column] + rng.normal(0.0, jitter), 0.0, 1.0))
            records.append(ObservationRecord(
                class_label=obj.class_label,
                instance_id=obj.name,
                repetition=repetition,
                **values,
            ))
    return records
