"""
Concept Engine - Pipeline Configuration

Typed, validated settings for every pipeline stage. Files use the dotenv
``KEY=value`` format with dotted keys, one group per module section:

    # [geometry]
    geometry.table.distance_threshold=0.02
    # [knowledge]
    knowledge.default_eta=4
    knowledge.eta.size=5
"""

import math
import os
from typing import Any, Dict, Literal, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from concept_engine.errors import ConfigError

CONFIG_ENV_VAR = "CONCEPT_ENGINE_CONFIG"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# =============================================================================
# Stage Parameters
# =============================================================================

class RansacParams(_Section):
    """RANSAC plane-fit parameters. Defaults are the tabletop acquisition settings."""

    leaf_size: float = Field(0.0025, gt=0)
    max_iterations: int = Field(10_000, ge=1)
    min_iterations: int = Field(50, ge=1)
    distance_threshold: float = Field(0.02, gt=0)
    min_inlier_fraction: float = Field(0.3, ge=0, le=1)
    confidence: float = Field(0.99, gt=0, lt=1)
    seed: int = Field(0, ge=0)


class FlatnessParams(_Section):
    """Top-level plane search and normal-consensus check."""

    ransac: RansacParams = RansacParams(distance_threshold=0.005, min_inlier_fraction=0.02)
    consensus: float = Field(0.95, gt=0, le=1)
    max_normal_angle_deg: float = Field(15.0, gt=0, lt=90)
    normal_neighbors: int = Field(10, ge=3)
    max_planes: int = Field(8, ge=1)
    min_plane_points: int = Field(10, ge=3)
    # points farther than this from the top plane belong to another surface
    surface_band: float = Field(0.01, gt=0)


class NoiseSpec(_Section):
    """Standard deviations of the simulated sensor noise."""

    point_std: float = Field(0.0, ge=0)
    marker_std: float = Field(0.0, ge=0)
    effort_std: float = Field(0.0, ge=0)
    angle_std: float = Field(0.0, ge=0)
    scale_std: float = Field(0.0, ge=0)


class SimulationConfig(_Section):
    density: float = Field(1e4, gt=0)
    repetitions: int = Field(1, ge=1)
    noise: NoiseSpec = NoiseSpec()
    camera_height: float = Field(1.0, gt=0)
    table_size: float = Field(0.8, gt=0)
    table_shadow: float = Field(0.015, ge=0)
    approach_clearance: float = Field(0.05, gt=0)
    press_speed: float = Field(0.005, gt=0)
    effort_rate: float = Field(1.0, gt=0)
    press_period: float = Field(0.05, gt=0)
    ramp_speed: float = Field(0.05, gt=0)
    ramp_period: float = Field(0.05, gt=0)
    ramp_limit: float = Field(math.pi / 2, gt=0, le=math.pi / 2)


class GeometryConfig(_Section):
    table: RansacParams = RansacParams()
    flatness: FlatnessParams = FlatnessParams()
    min_cavity_depth: float = Field(0.01, ge=0)
    inconsistency_tolerance: float = Field(0.01, ge=0)


class InteractionConfig(_Section):
    effort_cutoff: float = Field(8.0, gt=0)
    baseline_fraction: float = Field(0.1, gt=0, lt=1)
    margin_multiplier: float = Field(5.0, gt=0)
    margin_floor: float = Field(0.05, ge=0)
    knee_sigma: float = Field(2.0, ge=0)


class DatasetConfig(_Section):
    variance: Literal["population", "sample"] = "population"


class KnowledgeConfig(_Section):
    default_eta: int = Field(4, ge=2)
    eta: Dict[str, int] = Field(default_factory=dict)
    max_iterations: int = Field(300, ge=1)

    def eta_for(self, property_label: str) -> int:
        return self.eta.get(property_label, self.default_eta)


class SubstitutionConfig(_Section):
    threshold: float = Field(0.8, ge=0, le=1)
    metric: str = "cosine"
    n_candidates: int = Field(5, ge=1)


class PathsConfig(_Section):
    scene: Optional[str] = None
    bundles: Optional[str] = None
    dataset: Optional[str] = None
    kb: Optional[str] = None
    query: Optional[str] = None


# =============================================================================
# Pipeline Configuration
# =============================================================================

class PipelineConfig(_Section):
    """
    Complete configuration of one pipeline run.

    All randomness flows from ``seed``; stages derive their own seeds from it.
    """

    seed: int = Field(0, ge=0)
    workers: int = Field(4, ge=1)
    paths: PathsConfig = PathsConfig()
    simulation: SimulationConfig = SimulationConfig()
    geometry: GeometryConfig = GeometryConfig()
    interaction: InteractionConfig = InteractionConfig()
    dataset: DatasetConfig = DatasetConfig()
    knowledge: KnowledgeConfig = KnowledgeConfig()
    substitution: SubstitutionConfig = SubstitutionConfig()

    @classmethod
    def from_mapping(cls, flat: Dict[str, Optional[str]]) -> "PipelineConfig":
        """
        Build a config from dotted ``section.key`` entries.

        Args:
            flat: Mapping as returned by ``dotenv_values``

        Returns:
            Validated PipelineConfig

        Raises:
            ConfigError: On unknown keys, bad values or out-of-range numbers
        """
        nested: Dict[str, Any] = {}
        for key, value in flat.items():
            if value is None:
                raise ConfigError(f"config key '{key}' has no value")
            node = nested
            parts = key.strip().split(".")
            for part in parts[:-1]:
                child = node.setdefault(part, {})
                if not isinstance(child, dict):
                    raise ConfigError(f"config key '{key}' conflicts with a scalar setting")
                node = child
            node[parts[-1]] = value
        try:
            return cls.model_validate(nested)
        except ValidationError as e:
            problems = "; ".join(
                f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"invalid configuration: {problems}") from e

    def to_config_text(self) -> str:
        """Render in the file format accepted by ``load_config``."""
        lines = []
        data = self.model_dump()
        scalars = {k: v for k, v in data.items() if not isinstance(v, dict)}
        for key, value in scalars.items():
            lines.append(f"{key}={_render(value)}")
        for section, body in data.items():
            if not isinstance(body, dict):
                continue
            entries = list(_flatten(body, section))
            if not entries:
                continue
            lines.append("")
            lines.append(f"# [{section}]")
            lines.extend(f"{key}={value}" for key, value in entries)
        return "\n".join(lines) + "\n"

    def with_overrides(
        self,
        seed: Optional[int] = None,
        eta: Optional[int] = None,
        variance: Optional[str] = None,
        threshold: Optional[float] = None,
    ) -> "PipelineConfig":
        """Apply command-line overrides; ``None`` keeps the file value."""
        data = self.model_dump()
        if seed is not None:
            data["seed"] = seed
        if eta is not None:
            data["knowledge"]["default_eta"] = eta
            data["knowledge"]["eta"] = {}
        if variance is not None:
            data["dataset"]["variance"] = variance
        if threshold is not None:
            data["substitution"]["threshold"] = threshold
        try:
            return PipelineConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid override: {e.errors()[0]['msg']}") from e


def _render(value: Any) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _flatten(body: Dict[str, Any], prefix: str):
    for key, value in body.items():
        dotted = f"{prefix}.{key}"
        if isinstance(value, dict):
            yield from _flatten(value, dotted)
        elif value is not None:
            yield dotted, _render(value)


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """
    Load the pipeline configuration.

    Args:
        path: Config file; falls back to the CONCEPT_ENGINE_CONFIG environment
              variable (a project ``.env`` is honoured), then to defaults

    Returns:
        PipelineConfig
    """
    load_dotenv()
    path = path or os.getenv(CONFIG_ENV_VAR)
    if not path:
        return PipelineConfig()
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    return PipelineConfig.from_mapping(dotenv_values(path, interpolate=False))
