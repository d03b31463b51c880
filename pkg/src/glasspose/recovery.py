"""Deterministic pose decoding: priors, residuals, axis orthogonalization,
and a correspondence-based similarity-transform baseline."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .camera import Intrinsics
from .errors import (
    DegenerateAxesError,
    DegenerateConfigurationError,
    EmptyCloudError,
    IoFailureError,
    NonPositiveScaleError,
)
from .features import GeneralizedPointCloud
from .pose_core import CategoryLabel, Pose, check_scale, rotation_about_axis

_PARALLEL_TOL = 1e-9


@dataclass
class AxisPrediction:
    """Predicted object x/z axes with their confidences.

    Axes are renormalized to unit length on construction. A zero confidence
    pair is repaired to an equal 0.5/0.5 split so the orthogonalization
    weights are always defined.
    """

    axis_x: np.ndarray
    conf_x: float
    axis_z: np.ndarray
    conf_z: float

    def __post_init__(self):
        for name in ("axis_x", "axis_z"):
            axis = np.asarray(getattr(self, name), dtype=np.float64)
            norm = np.linalg.norm(axis)
            if not np.all(np.isfinite(axis)) or norm == 0.0 or not np.isfinite(norm):
                raise ValueError(f"{name} must be finite and nonzero, got {axis}")
            setattr(self, name, axis / norm)
        if self.conf_x < 0 or self.conf_z < 0:
            raise ValueError("confidences must be non-negative")
        if self.conf_x + self.conf_z == 0.0:
            self.conf_x = 0.5
            self.conf_z = 0.5


@dataclass
class CategoryPriors:
    """Per-category scale priors (mean box extents, meters)."""

    extents: dict = field(default_factory=dict)

    def get(self, category: CategoryLabel) -> np.ndarray:
        return np.asarray(self.extents[category.name], dtype=np.float64)

    def to_json(self) -> dict:
        return {name: [float(x) for x in extents] for name, extents in self.extents.items()}

    @classmethod
    def from_json(cls, data: dict) -> "CategoryPriors":
        return cls({name: np.asarray(v, dtype=np.float64) for name, v in data.items()})

    def save(self, path):
        try:
            with open(path, "w") as fh:
                json.dump(self.to_json(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoFailureError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "CategoryPriors":
        try:
            with open(path) as fh:
                return cls.from_json(json.load(fh))
        except OSError as exc:
            raise IoFailureError(str(exc)) from exc


def translation_prior(cloud: GeneralizedPointCloud, intrinsics: Intrinsics) -> np.ndarray:
    """Mean backprojected position of the sampled pixels.

    Components are accumulated with exact (fsum) summation, so the result
    equals the brute-force arithmetic mean bit for bit regardless of row
    order.
    """
    if len(cloud) == 0:
        raise EmptyCloudError("translation prior needs at least one sampled point")
    depth = cloud.depth
    if not np.all(np.isfinite(depth)):
        raise ValueError("cloud depths must be finite")
    u, v = cloud.pixels[:, 0], cloud.pixels[:, 1]
    x = (u - intrinsics.cx) / intrinsics.fx * depth
    y = (v - intrinsics.cy) / intrinsics.fy * depth
    n = len(cloud)
    return np.array([math.fsum(x) / n, math.fsum(y) / n, math.fsum(depth) / n])


def apply_translation_residual(prior: np.ndarray, residual: np.ndarray) -> np.ndarray:
    """Decoded translation: prior plus learned residual."""
    prior = np.asarray(prior, dtype=np.float64)
    residual = np.asarray(residual, dtype=np.float64)
    if not (np.all(np.isfinite(prior)) and np.all(np.isfinite(residual))):
        raise ValueError("translation prior and residual must be finite")
    return prior + residual


def apply_scale_residual(priors: CategoryPriors, category: CategoryLabel,
                         residual: np.ndarray) -> np.ndarray:
    """Decoded scale: category prior plus learned residual; must stay positive."""
    result = priors.get(category) + np.asarray(residual, dtype=np.float64)
    if np.any(result <= 0) or not np.all(np.isfinite(result)):
        raise NonPositiveScaleError(f"decoded scale {result} has a non-positive component")
    return check_scale(result)


def orthogonalize_axes(pred: AxisPrediction):
    """Rotate the predicted axes within their common plane to exact orthogonality.

    With theta the angle between the axes, each axis rotates about the plane
    normal by a share of (theta - pi/2) proportional to the *other* axis's
    confidence, so the more trusted axis moves less:

        theta_z = c_x / (c_x + c_z) * (theta - pi/2)
        theta_x = c_z / (c_x + c_z) * (theta - pi/2)

    Signs are chosen so the axes rotate toward each other when theta > pi/2
    and apart when theta < pi/2, closing exactly to 90 degrees. Returns the
    corrected (axis_x, axis_z) pair.
    """
    a_x, a_z = pred.axis_x, pred.axis_z
    dot = float(a_x @ a_z)
    if abs(dot) >= 1.0 - _PARALLEL_TOL:
        raise DegenerateAxesError(f"axes nearly parallel (dot {dot})")
    cross = np.cross(a_x, a_z)
    theta = math.atan2(np.linalg.norm(cross), dot)
    normal = cross / np.linalg.norm(cross)

    share = pred.conf_x / (pred.conf_x + pred.conf_z)
    theta_z = share * (theta - math.pi / 2.0)
    theta_x = (1.0 - share) * (theta - math.pi / 2.0)

    new_x = rotation_about_axis(normal, theta_x) @ a_x
    new_z = rotation_about_axis(normal, -theta_z) @ a_z
    return new_x / np.linalg.norm(new_x), new_z / np.linalg.norm(new_z)


def umeyama_fit(source: np.ndarray, target: np.ndarray):
    """Least-squares similarity transform aligning ``source`` onto ``target``.

    Minimizes sum ||target - (s R source + t)||^2 over rotations (reflections
    corrected), translation, and a uniform scale. Returns (Pose, scale).
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape or source.ndim != 2 or source.shape[1] != 3:
        raise ValueError("source and target must be matching (M, 3) arrays")
    m = source.shape[0]
    if m < 3:
        raise DegenerateConfigurationError(f"need at least 3 points, got {m}")

    mean_src = source.mean(axis=0)
    mean_tgt = target.mean(axis=0)
    dev_src = source - mean_src
    dev_tgt = target - mean_tgt
    var_src = float((dev_src**2).sum()) / m
    if var_src == 0.0:
        raise DegenerateConfigurationError("source points are coincident")

    cov = dev_tgt.T @ dev_src / m
    u, d, vt = np.linalg.svd(cov)
    if d[1] <= max(d[0], 1.0) * 1e-12:
        raise DegenerateConfigurationError("source points are collinear")

    correction = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0:
        correction[2] = -1.0
    rotation = u @ np.diag(correction) @ vt
    scale = float((d * correction).sum()) / var_src
    translation = mean_tgt - scale * rotation @ mean_src
    return Pose(rotation, translation), scale
