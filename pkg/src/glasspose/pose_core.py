"""Rigid-body pose, scale, symmetry, and oriented-box primitives.

Conventions used throughout the package:

* Rotation matrices are 3x3 row-major arrays whose *columns* are the object
  axes expressed in camera coordinates (x = column 0, z = column 2).
* Scales are full box extents along the object x/y/z axes, in meters.
* Object symmetry is either absent, axial (any rotation about the object
  z-axis leaves the shape unchanged), or planar (a finite set of x-axis
  rotations about z leaves the shape unchanged).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonOrthogonalAxesError, NonPositiveScaleError, NonUnitAxisError

_ROTATION_TOL = 1e-9
_AXIS_TOL = 1e-6

CATEGORY_NAMES = ("bottle", "bowl", "container", "tableware", "water cup", "wine cup")


def _frozen_array(values, shape, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.shape != shape:
        raise ValueError(f"expected shape {shape}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


def check_rotation(rotation: np.ndarray, tol: float = _ROTATION_TOL) -> np.ndarray:
    """Validate that a 3x3 matrix is a proper rotation within ``tol``."""
    rotation = np.asarray(rotation, dtype=np.float64)
    if rotation.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {rotation.shape}")
    if not np.all(np.isfinite(rotation)):
        raise ValueError("rotation contains non-finite entries")
    err = np.abs(rotation.T @ rotation - np.eye(3)).max()
    if err > tol:
        raise ValueError(f"rotation columns not orthonormal (deviation {err:.3e})")
    det = np.linalg.det(rotation)
    if abs(det - 1.0) > tol:
        raise ValueError(f"rotation determinant {det} != +1")
    return rotation


def check_scale(scale) -> np.ndarray:
    """Validate box extents: a finite, strictly positive 3-vector (meters)."""
    scale = np.asarray(scale, dtype=np.float64)
    if scale.shape != (3,):
        raise NonPositiveScaleError(f"scale must be a 3-vector, got shape {scale.shape}")
    if not np.all(np.isfinite(scale)) or np.any(scale <= 0.0):
        raise NonPositiveScaleError(f"scale components must be positive, got {scale}")
    return scale


def rotation_about_axis(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix for a unit ``axis`` and ``angle`` in radians."""
    axis = np.asarray(axis, dtype=np.float64)
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    cross = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return c * np.eye(3) + s * cross + (1.0 - c) * np.outer(axis, axis)


def rotation_z(angle: float) -> np.ndarray:
    """Rotation about the +z axis by ``angle`` radians."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Pose:
    """Rigid transform from object frame to camera frame.

    ``rotation`` columns are the object x/y/z axes in camera coordinates;
    ``translation`` is the object origin in meters.
    """

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = check_rotation(self.rotation)
        trans = np.asarray(self.translation, dtype=np.float64)
        if trans.shape != (3,) or not np.all(np.isfinite(trans)):
            raise ValueError(f"translation must be a finite 3-vector, got {trans}")
        object.__setattr__(self, "rotation", _frozen_array(rot, (3, 3)))
        object.__setattr__(self, "translation", _frozen_array(trans, (3,)))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix) -> "Pose":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise ValueError(f"expected 4x4 homogeneous matrix, got {matrix.shape}")
        return cls(matrix[:3, :3], matrix[:3, 3])

    def matrix(self) -> np.ndarray:
        """4x4 row-major homogeneous matrix (the JSON serialization form)."""
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @property
    def axis_x(self) -> np.ndarray:
        return self.rotation[:, 0]

    @property
    def axis_z(self) -> np.ndarray:
        return self.rotation[:, 2]

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 3) object-frame points into the camera frame."""
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation


@dataclass(frozen=True)
class SymmetryClass:
    """Shape symmetry; ``angles`` holds planar candidate x-axis rotations about z."""

    kind: str
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in ("none", "axial", "planar"):
            raise ValueError(f"unknown symmetry kind {self.kind!r}")
        if self.kind == "planar":
            angles = tuple(float(a) for a in self.angles)
            if not angles or not any(a == 0.0 for a in angles):
                raise ValueError("planar symmetry needs a non-empty angle list containing 0")
            object.__setattr__(self, "angles", angles)
        elif self.angles:
            raise ValueError(f"{self.kind} symmetry takes no angle list")

    @classmethod
    def none(cls) -> "SymmetryClass":
        return cls("none")

    @classmethod
    def axial(cls) -> "SymmetryClass":
        return cls("axial")

    @classmethod
    def planar(cls, angles=(0.0, math.pi)) -> "SymmetryClass":
        return cls("planar", tuple(angles))

    def to_json(self) -> dict:
        return {"kind": self.kind, "angles": list(self.angles)}

    @classmethod
    def from_json(cls, data: dict) -> "SymmetryClass":
        return cls(data["kind"], tuple(data.get("angles", ())))


@dataclass(frozen=True)
class CategoryLabel:
    """One of the six object categories, with its one-hot encoding."""

    id: int

    def __post_init__(self):
        if not 0 <= self.id < len(CATEGORY_NAMES):
            raise ValueError(f"category id must be in [0, {len(CATEGORY_NAMES)}), got {self.id}")

    @classmethod
    def from_name(cls, name: str) -> "CategoryLabel":
        return cls(CATEGORY_NAMES.index(name))

    @property
    def name(self) -> str:
        return CATEGORY_NAMES[self.id]

    @property
    def one_hot(self) -> np.ndarray:
        vec = np.zeros(len(CATEGORY_NAMES))
        vec[self.id] = 1.0
        return vec


# Default category -> symmetry assignment; overridable via configuration.
DEFAULT_CATEGORY_SYMMETRY = {
    "bottle": SymmetryClass.axial(),
    "bowl": SymmetryClass.axial(),
    "container": SymmetryClass.planar(),
    "tableware": SymmetryClass.planar(),
    "water cup": SymmetryClass.axial(),
    "wine cup": SymmetryClass.axial(),
}


@dataclass(frozen=True)
class OrientedBox:
    """A pose plus full extents; the unit of the 3D-IoU metric."""

    pose: Pose
    scale: np.ndarray = field(default_factory=lambda: np.ones(3))

    def __post_init__(self):
        object.__setattr__(self, "scale", _frozen_array(check_scale(self.scale), (3,)))

    @property
    def volume(self) -> float:
        return float(np.prod(self.scale))


# Corner k carries sign pattern (bit2 -> x, bit1 -> y, bit0 -> z), bit set = +1:
# k=0 -> (-,-,-), k=1 -> (-,-,+), ..., k=7 -> (+,+,+).
_CORNER_SIGNS = np.array(
    [[(-1.0, 1.0)[(k >> b) & 1] for b in (2, 1, 0)] for k in range(8)]
)


def box_corners(box: OrientedBox) -> np.ndarray:
    """The 8 corners of an oriented box, ordered by the documented sign pattern."""
    local = _CORNER_SIGNS * (box.scale / 2.0)
    return box.pose.transform(local)


def rotation_from_axes(a_x: np.ndarray, a_z: np.ndarray) -> np.ndarray:
    """Assemble a rotation from its object x- and z-axis columns.

    The y column is ``a_z x a_x`` so the result is right-handed with
    determinant +1. Inputs must be unit length and mutually orthogonal
    within 1e-6.
    """
    a_x = np.asarray(a_x, dtype=np.float64)
    a_z = np.asarray(a_z, dtype=np.float64)
    for name, axis in (("a_x", a_x), ("a_z", a_z)):
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) > _AXIS_TOL:
            raise NonUnitAxisError(f"{name} has norm {norm}, expected 1 within {_AXIS_TOL}")
    dot = float(a_x @ a_z)
    if abs(dot) > _AXIS_TOL:
        raise NonOrthogonalAxesError(f"axes have dot product {dot}, expected 0 within {_AXIS_TOL}")
    a_y = np.cross(a_z, a_x)
    return np.column_stack([a_x, a_y, a_z])


def symmetry_candidates(symmetry: SymmetryClass, pose: Pose):
    """Ground-truth pose candidates equivalent under the object's symmetry.

    Returns a list of poses for "none" (just the input) and "planar" (one
    pose per candidate angle, x-axis rotated about the object z-axis).
    Returns ``None`` for "axial": the sentinel meaning the x-axis is
    unconstrained, so candidates cannot be enumerated. Every returned
    candidate shares the input pose's z-axis and translation.
    """
    if symmetry.kind == "none":
        return [pose]
    if symmetry.kind == "axial":
        return None
    return [
        Pose(pose.rotation @ rotation_z(angle), pose.translation)
        for angle in symmetry.angles
    ]
