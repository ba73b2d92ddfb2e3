"""
Geometry Extraction - Size, Flatness and Hollowness

Non-invasive property extraction from point clouds and marker distances.
The support table is found with RANSAC, the object is cut out above it and
measured in the table frame; flatness comes from the top-level plane of the
top-camera cloud, hollowness from the two marker distances.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from concept_engine.config import FlatnessParams, RansacParams
from concept_engine.errors import ExtractionError, MeasurementError, SegmentationError

logger = logging.getLogger(__name__)


# =============================================================================
# Domain Types
# =============================================================================

@dataclass(frozen=True)
class PlaneModel:
    """Plane ``normal . p + offset = 0`` with the indices of its inliers."""

    normal: np.ndarray
    offset: float
    inlier_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __post_init__(self):
        norm = float(np.linalg.norm(self.normal))
        if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"plane normal must be unit length, got norm {norm}")

    def signed_distance(self, cloud: np.ndarray) -> np.ndarray:
        return cloud @ self.normal + self.offset

    def inlier_mask(self, cloud: np.ndarray, threshold: float) -> np.ndarray:
        return np.abs(self.signed_distance(cloud)) <= threshold

    def flipped(self) -> "PlaneModel":
        return PlaneModel(-self.normal, -self.offset, self.inlier_indices)


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned bounding box (z-up)."""

    min_corner: np.ndarray
    max_corner: np.ndarray

    def __post_init__(self):
        if np.any(self.min_corner > self.max_corner):
            raise ValueError("bounding box min corner exceeds max corner")

    @classmethod
    def from_points(cls, points: np.ndarray) -> "BoundingBox":
        return cls(points.min(axis=0), points.max(axis=0))

    @property
    def extents(self) -> np.ndarray:
        return self.max_corner - self.min_corner


@dataclass(frozen=True)
class SizeTriple:
    """Extents normalized by the largest one; the largest component is 1."""

    l: float
    w: float
    h: float

    def __post_init__(self):
        values = (self.l, self.w, self.h)
        if any(not (0.0 < v <= 1.0 + 1e-9) for v in values):
            raise ValueError(f"size components must lie in (0, 1], got {values}")
        if not math.isclose(max(values), 1.0, abs_tol=1e-6):
            raise ValueError(f"largest size component must be 1, got {max(values)}")

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.l, self.w, self.h)


@dataclass(frozen=True)
class TabletopSegmentation:
    """
    Result of cutting an object out of a tabletop scene.

    ``object_points`` are expressed in the table frame: the first two columns
    span the table plane, the third is the height above it.
    """

    plane: PlaneModel
    object_indices: np.ndarray
    object_points: np.ndarray

    @property
    def is_empty(self) -> bool:
        return len(self.object_indices) == 0


# =============================================================================
# Point Cloud Helpers
# =============================================================================

def _as_cloud(cloud) -> np.ndarray:
    points = np.asarray(cloud, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ExtractionError(f"point cloud must be an (N, 3) array, got shape {points.shape}")
    return points


def voxel_downsample(cloud: np.ndarray, leaf_size: float) -> np.ndarray:
    """Replace the points of every occupied voxel by their centroid."""
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud / leaf_size).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, cloud)
    return sums / counts[:, None]


def estimate_normals(cloud: np.ndarray, k: int = 10) -> np.ndarray:
    """
    Unit normals from PCA over each point's k nearest neighbours.

    Args:
        cloud: (N, 3) points
        k: Neighbours per point, the point itself excluded

    Returns:
        (N, 3) unit normals with arbitrary sign
    """
    points = _as_cloud(cloud)
    n = len(points)
    if n < 3:
        return np.tile([0.0, 0.0, 1.0], (n, 1))
    tree = cKDTree(points)
    _, neighbors = tree.query(points, k=min(k + 1, n))
    hood = points[neighbors]
    centered = hood - hood.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / hood.shape[1]
    _, eigenvectors = np.linalg.eigh(cov)
    return eigenvectors[:, :, 0]


def _plane_through(p: np.ndarray) -> Optional[Tuple[np.ndarray, float]]:
    normal = np.cross(p[1] - p[0], p[2] - p[0])
    norm = np.linalg.norm(normal)
    if norm < 1e-12:
        return None
    normal = normal / norm
    return normal, float(-normal @ p[0])


def _required_iterations(inlier_ratio: float, confidence: float) -> float:
    w3 = inlier_ratio ** 3
    if w3 >= 1.0:
        return 1
    if w3 <= 0.0:
        return math.inf
    return math.ceil(math.log(1.0 - confidence) / math.log(1.0 - w3))


def _plane_basis(normal: np.ndarray) -> np.ndarray:
    helper = np.array([1.0, 0.0, 0.0])
    if abs(normal @ helper) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = helper - (helper @ normal) * normal
    u /= np.linalg.norm(u)
    v = np.cross(normal, u)
    return np.stack([u, v])


# =============================================================================
# RANSAC Plane Fitting
# =============================================================================

def fit_plane_ransac(cloud, params: RansacParams, seed: Optional[int] = None) -> PlaneModel:
    """
    Fit the dominant plane of a cloud.

    Hypotheses are drawn from the voxel-downsampled cloud and scored with a
    truncated quadratic cost; the iteration budget shrinks adaptively once a
    good model is known, but never below ``min_iterations``.

    Args:
        cloud: (N, 3) points
        params: RANSAC parameters
        seed: Overrides ``params.seed``

    Returns:
        PlaneModel with normal pointing to +z where possible and inliers
        indexed into ``cloud``

    Raises:
        SegmentationError: No plane reaches ``params.min_inlier_fraction``
    """
    points = _as_cloud(cloud)
    if len(points) < 3:
        raise SegmentationError(f"need at least 3 points to fit a plane, got {len(points)}")

    rng = np.random.default_rng(params.seed if seed is None else seed)
    sample = voxel_downsample(points, params.leaf_size)
    if len(sample) < 3:
        sample = points
    threshold = params.distance_threshold
    cap = threshold * threshold

    best: Optional[Tuple[np.ndarray, float]] = None
    best_cost = math.inf
    limit = params.max_iterations
    iteration = 0
    while iteration < limit:
        iteration += 1
        picked = sample[rng.choice(len(sample), 3, replace=False)]
        model = _plane_through(picked)
        if model is None:
            continue
        normal, offset = model
        residual = (sample @ normal + offset) ** 2
        cost = float(np.minimum(residual, cap).sum())
        if cost < best_cost:
            best_cost = cost
            best = model
            ratio = float(np.mean(residual <= cap))
            needed = max(params.min_iterations, _required_iterations(ratio, params.confidence))
            limit = int(min(params.max_iterations, needed))

    if best is None:
        raise SegmentationError("all RANSAC hypotheses were degenerate")

    normal, offset = best
    if normal[2] < 0:
        normal, offset = -normal, -offset
    distances = np.abs(points @ normal + offset)
    inliers = np.flatnonzero(distances <= threshold)
    fraction = len(inliers) / len(points)
    if fraction < params.min_inlier_fraction:
        raise SegmentationError(
            f"best plane holds {fraction:.1%} of points, "
            f"minimum is {params.min_inlier_fraction:.1%}"
        )
    logger.debug(f"[RANSAC] plane n={np.round(normal, 4)} d={offset:.4f} "
                 f"inliers={len(inliers)}/{len(points)} iterations={iteration}")
    return PlaneModel(normal, offset, inliers)


# =============================================================================
# Segmentation and Size
# =============================================================================

def _footprint_mask(seed_uv: np.ndarray, uv: np.ndarray, margin: float) -> np.ndarray:
    try:
        hull = ConvexHull(seed_uv)
    except (QhullError, ValueError):
        lo = seed_uv.min(axis=0) - margin
        hi = seed_uv.max(axis=0) + margin
        return np.all((uv >= lo) & (uv <= hi), axis=1)
    facets = hull.equations
    return np.all(uv @ facets[:, :2].T + facets[:, 2] <= margin, axis=1)


def segment_tabletop(cloud, ransac: RansacParams, seed: Optional[int] = None) -> TabletopSegmentation:
    """
    Cut the object out of a tabletop scene.

    Points clearly above the table (beyond the distance threshold) outline the
    object's footprint; every point inside that footprint and not below the
    table belongs to the object, including its lowest rows.

    Args:
        cloud: (N, 3) scene points, z-up
        ransac: Table-plane RANSAC parameters
        seed: Overrides ``ransac.seed``

    Returns:
        TabletopSegmentation; empty (and logged) when nothing rises above the table

    Raises:
        SegmentationError: No dominant support plane
    """
    points = _as_cloud(cloud)
    plane = fit_plane_ransac(points, ransac, seed)
    heights = plane.signed_distance(points)
    threshold = ransac.distance_threshold

    off_plane = heights[np.abs(heights) > threshold]
    if off_plane.size and off_plane.sum() < 0:
        plane = plane.flipped()
        heights = -heights

    seeds = heights > threshold
    if not np.any(seeds):
        logger.warning("[Segmentation] nothing above the support plane; object set is empty")
        empty = np.empty(0, dtype=np.int64)
        return TabletopSegmentation(plane, empty, np.empty((0, 3)))

    uv = points @ _plane_basis(plane.normal).T
    mask = _footprint_mask(uv[seeds], uv, ransac.leaf_size) & (heights >= -threshold)
    indices = np.flatnonzero(mask)
    table_frame = np.column_stack([uv[indices], heights[indices]])
    return TabletopSegmentation(plane, indices, table_frame)


def compute_size(object_cloud) -> Tuple[SizeTriple, np.ndarray]:
    """
    Normalized size of an axis-normal object cloud.

    Returns:
        (SizeTriple, raw extents in meters)
    """
    points = _as_cloud(object_cloud)
    if len(points) == 0:
        raise ExtractionError("cannot measure size of an empty object cloud")
    extents = BoundingBox.from_points(points).extents
    largest = float(extents.max())
    if largest <= 0:
        raise MeasurementError("object cloud has zero extent on every axis")
    normalized = np.clip(extents / largest, 0.0, 1.0)
    if np.any(normalized <= 0):
        raise MeasurementError(f"object cloud is flat along an axis: extents {extents}")
    return SizeTriple(*(float(v) for v in normalized)), extents


# =============================================================================
# Flatness
# =============================================================================

def extract_planes(cloud, params: FlatnessParams, seed: Optional[int] = None) -> List[PlaneModel]:
    """Sequentially peel planes off a cloud, largest consensus first."""
    points = _as_cloud(cloud)
    base_seed = params.ransac.seed if seed is None else seed
    minimum = max(params.min_plane_points, math.ceil(params.ransac.min_inlier_fraction * len(points)))
    remaining = np.arange(len(points))
    planes: List[PlaneModel] = []
    for i in range(params.max_planes):
        if len(remaining) < minimum:
            break
        try:
            plane = fit_plane_ransac(points[remaining], params.ransac, seed=base_seed + i)
        except SegmentationError:
            break
        members = remaining[plane.inlier_indices]
        if len(members) < minimum:
            break
        planes.append(PlaneModel(plane.normal, plane.offset, members))
        remaining = np.setdiff1d(remaining, members)
    return planes


def normal_consensus(normals: np.ndarray, plane_normal: np.ndarray, max_angle_deg: float) -> float:
    """Fraction of normals within ``max_angle_deg`` of the plane normal (sign-agnostic)."""
    if len(normals) == 0:
        return 0.0
    cosines = np.abs(normals @ plane_normal)
    return float(np.mean(cosines >= math.cos(math.radians(max_angle_deg))))


def compute_flatness(object_cloud, params: FlatnessParams, seed: Optional[int] = None) -> float:
    """
    Share of the top-view cloud lying on the object's top-level plane.

    The top-level plane is the highest of the extracted planes. It only counts
    when nothing rises above it and enough of its points have normals agreeing
    with it. Normals are estimated from the points within ``surface_band`` of
    the plane, so a floor a few centimeters below a rim does not tilt them.
    Round surfaces fail the check and score zero, as do vessels whose rim is
    too thin to form a plane of its own.

    Args:
        object_cloud: (N, 3) object points seen from above, z-up
        params: Plane search and consensus settings
        seed: Overrides ``params.ransac.seed``

    Returns:
        fl in [0, 1]
    """
    points = _as_cloud(object_cloud)
    if len(points) == 0:
        raise ExtractionError("cannot measure flatness of an empty cloud")
    planes = extract_planes(points, params, seed)
    if not planes:
        return 0.0

    top = max(planes, key=lambda p: float(points[p.inlier_indices, 2].mean()))
    heights = top.signed_distance(points) * math.copysign(1.0, top.normal[2])
    if np.any(heights > params.surface_band):
        logger.debug(f"[Flatness] {int(np.sum(heights > params.surface_band))} points above the highest plane")
        return 0.0

    surface = np.flatnonzero(np.abs(heights) <= params.surface_band)
    normals = estimate_normals(points[surface], params.normal_neighbors)
    on_plane = np.isin(surface, top.inlier_indices)
    agreement = normal_consensus(normals[on_plane], top.normal, params.max_normal_angle_deg)
    if agreement < params.consensus:
        logger.debug(f"[Flatness] top plane rejected, normal agreement {agreement:.2f}")
        return 0.0
    return len(top.inlier_indices) / len(points)


# =============================================================================
# Hollowness
# =============================================================================

def compute_hollowness(
    h: float,
    d_r: float,
    d_h: float,
    min_cavity_depth: float = 0.01,
    tolerance: float = 0.01,
) -> float:
    """
    Hollowness from the object height and the two marker distances.

    Args:
        h: Object height in meters
        d_r: Top camera to the reference marker on the table
        d_h: Top camera to the marker placed in the object
        min_cavity_depth: Cavities shallower than this score zero
        tolerance: How far the base may read above the rim before the
                   measurement is rejected

    Returns:
        ho in [0, 1]
    """
    if h <= 0:
        raise MeasurementError(f"object height must be positive, got {h}")
    if d_h < 0 or d_r < d_h:
        raise MeasurementError(f"marker distances must satisfy d_r >= d_h >= 0, got {d_r}, {d_h}")
    base = d_r - d_h
    if base > h + tolerance:
        raise MeasurementError(
            f"in-object marker sits {base - h:.4f} m above the object rim (base {base:.4f}, h {h:.4f})"
        )
    cavity = h - base
    if cavity < min_cavity_depth:
        return 0.0
    return float(min(1.0, max(0.0, cavity / h)))
