"""Harness configuration: one JSON document drives every subcommand.

``HarnessConfig.default()`` holds every default; ``--print-config`` dumps it.
A config file only needs the keys it overrides.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .camera import Intrinsics
from .errors import IoFailureError, SchemaMismatchError
from .estimators import (
    DEFAULT_DEPTH_BIAS_AMPLITUDE,
    DEFAULT_DEPTH_BIAS_WAVELENGTH,
    DEFAULT_DEPTH_SIGMA,
    DEFAULT_NORMAL_ANGLE_SIGMA,
    DEFAULT_NORMAL_BIAS_AMPLITUDE,
    DEFAULT_NORMAL_BIAS_WAVELENGTH,
    TrainConfig,
)
from .losses import LossConfig
from .synth import CorruptionModel, SceneConfig, default_template_library


@dataclass(frozen=True)
class SamplerConfig:
    point_count: int = 1024
    ray_norm_exponent: float = 1.0
    patch_size: int = 256


@dataclass(frozen=True)
class EstimatorConfig:
    """Which stand-ins feed the second stage."""

    depth: str = "oracle"        # oracle | noisy
    normals: str = "oracle"      # oracle | noisy
    checkpoint: str = ""         # decoder checkpoint path; zero decoder if empty
    depth_sigma: float = DEFAULT_DEPTH_SIGMA
    depth_bias_amplitude: float = DEFAULT_DEPTH_BIAS_AMPLITUDE
    depth_bias_wavelength: float = DEFAULT_DEPTH_BIAS_WAVELENGTH
    normal_angle_sigma: float = DEFAULT_NORMAL_ANGLE_SIGMA
    normal_bias_amplitude: float = DEFAULT_NORMAL_BIAS_AMPLITUDE
    normal_bias_wavelength: float = DEFAULT_NORMAL_BIAS_WAVELENGTH

    def __post_init__(self):
        if self.depth not in ("oracle", "noisy"):
            raise SchemaMismatchError(f"estimators.depth must be oracle|noisy, got {self.depth!r}")
        if self.normals not in ("oracle", "noisy"):
            raise SchemaMismatchError(
                f"estimators.normals must be oracle|noisy, got {self.normals!r}"
            )


@dataclass(frozen=True)
class SceneSettings:
    """Scene generation knobs (flattened SceneConfig minus intrinsics)."""

    min_instances: int = 1
    max_instances: int = 3
    depth_range: tuple = (0.7, 1.5)
    background_depth: float = 2.0
    background_tilt: float = 0.12
    margin: int = 24
    max_attempts: int = 200
    orientation: str = "random"
    max_tilt: float = 0.6


@dataclass(frozen=True)
class HarnessConfig:
    intrinsics: Intrinsics = field(
        default_factory=lambda: Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0,
                                           width=640, height=480)
    )
    scene: SceneSettings = field(default_factory=SceneSettings)
    corruption: CorruptionModel = field(default_factory=CorruptionModel)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    estimators: EstimatorConfig = field(default_factory=EstimatorConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    symmetry_aware_metrics: bool = True

    @classmethod
    def default(cls) -> "HarnessConfig":
        return cls()

    def scene_config(self) -> SceneConfig:
        return SceneConfig(
            intrinsics=self.intrinsics,
            min_instances=self.scene.min_instances,
            max_instances=self.scene.max_instances,
            depth_range=tuple(self.scene.depth_range),
            background_depth=self.scene.background_depth,
            background_tilt=self.scene.background_tilt,
            margin=self.scene.margin,
            max_attempts=self.scene.max_attempts,
            orientation=self.scene.orientation,
            max_tilt=self.scene.max_tilt,
            templates=tuple(default_template_library()),
            corruption=self.corruption,
        )

    def to_json(self) -> dict:
        data = dataclasses.asdict(self)
        data["intrinsics"] = self.intrinsics.to_json()
        return data

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_json(cls, data: dict) -> "HarnessConfig":
        base = cls.default()
        kwargs = {}
        sections = {
            "intrinsics": lambda d: Intrinsics.from_json({**base.intrinsics.to_json(), **d}),
            "scene": lambda d: _merge(SceneSettings, base.scene, d),
            "corruption": lambda d: _merge(CorruptionModel, base.corruption, d),
            "sampler": lambda d: _merge(SamplerConfig, base.sampler, d),
            "loss": lambda d: _merge(LossConfig, base.loss, d),
            "estimators": lambda d: _merge(EstimatorConfig, base.estimators, d),
            "training": lambda d: _merge(TrainConfig, base.training, d),
        }
        for key, value in data.items():
            if key in sections:
                kwargs[key] = sections[key](value)
            elif key == "symmetry_aware_metrics":
                kwargs[key] = bool(value)
            else:
                raise SchemaMismatchError(f"unknown config key {key!r}")
        return dataclasses.replace(base, **kwargs)

    @classmethod
    def load(cls, path) -> "HarnessConfig":
        try:
            with open(path) as fh:
                return cls.from_json(json.load(fh))
        except OSError as exc:
            raise IoFailureError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise SchemaMismatchError(f"config {path} is not valid JSON: {exc}") from exc


def _merge(cls, base, overrides: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(overrides) - known
    if unknown:
        raise SchemaMismatchError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    merged = {**dataclasses.asdict(base), **overrides}
    for key, value in merged.items():
        if isinstance(value, list):
            merged[key] = tuple(value)
    return cls(**merged)
