"""Pinhole camera math: rays, backprojection, and normals from depth.

Depth maps store the camera-frame z coordinate (not ray length), in meters,
with a boolean validity mask. Surface normals are camera-facing:
``<normal, ray> <= 0`` for every valid pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepthError, OutOfBoundsError

_UNIT_TOL = 1e-9
_DEGENERATE_NORMAL = 1e-14


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics. Focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie strictly inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def to_json(self) -> dict:
        return {
            "fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
            "width": self.width, "height": self.height,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Intrinsics":
        return cls(
            fx=float(data["fx"]), fy=float(data["fy"]),
            cx=float(data["cx"]), cy=float(data["cy"]),
            width=int(data["width"]), height=int(data["height"]),
        )


@dataclass
class DepthMap:
    """(H, W) z-depth grid in meters with a validity mask (True = valid)."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.values.shape != self.mask.shape or self.values.ndim != 2:
            raise ValueError("values and mask must be matching 2-D grids")

    @classmethod
    def from_values(cls, values, invalid_value: float = 0.0) -> "DepthMap":
        values = np.asarray(values, dtype=np.float64)
        return cls(values, (values != invalid_value) & np.isfinite(values) & (values > 0))

    @property
    def shape(self):
        return self.values.shape

    def validate(self):
        valid = self.values[self.mask]
        if valid.size and (not np.all(np.isfinite(valid)) or np.any(valid <= 0)):
            raise ValueError("valid depth entries must be strictly positive and finite")

    def copy(self) -> "DepthMap":
        return DepthMap(self.values.copy(), self.mask.copy())


@dataclass
class NormalMap:
    """(H, W, 3) camera-facing unit normals with a validity mask."""

    vectors: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.vectors.ndim != 3 or self.vectors.shape[2] != 3:
            raise ValueError("vectors must have shape (H, W, 3)")
        if self.vectors.shape[:2] != self.mask.shape:
            raise ValueError("vectors and mask must share (H, W)")

    @property
    def shape(self):
        return self.mask.shape

    def copy(self) -> "NormalMap":
        return NormalMap(self.vectors.copy(), self.mask.copy())


def pixel_directions(intrinsics: Intrinsics) -> np.ndarray:
    """Unnormalized per-pixel view directions K^-1 [u, v, 1], shape (H, W, 3)."""
    u = np.arange(intrinsics.width, dtype=np.float64)
    v = np.arange(intrinsics.height, dtype=np.float64)
    x = (u - intrinsics.cx) / intrinsics.fx
    y = (v - intrinsics.cy) / intrinsics.fy
    dirs = np.empty((intrinsics.height, intrinsics.width, 3))
    dirs[..., 0] = x[None, :]
    dirs[..., 1] = y[:, None]
    dirs[..., 2] = 1.0
    return dirs


def ray_direction(intrinsics: Intrinsics, u: float, v: float) -> np.ndarray:
    """Unit direction from the camera origin through pixel (u, v); z > 0."""
    if not (0 <= u < intrinsics.width and 0 <= v < intrinsics.height):
        raise OutOfBoundsError(f"pixel ({u}, {v}) outside {intrinsics.width}x{intrinsics.height}")
    d = np.array([(u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, 1.0])
    return d / np.linalg.norm(d)


def ray_map(intrinsics: Intrinsics, norm_exponent: float = 1.0) -> np.ndarray:
    """Per-pixel ray features K^-1 p / ||K^-1 p||^exponent, shape (H, W, 3).

    Exponent 1 (the default) gives unit rays; exponent 2 matches the
    squared-norm variant and is exposed for comparison only.
    """
    dirs = pixel_directions(intrinsics)
    norms = np.linalg.norm(dirs, axis=2, keepdims=True)
    return dirs / norms**norm_exponent


def backproject(intrinsics: Intrinsics, u: float, v: float, depth: float) -> np.ndarray:
    """Camera-frame point for pixel (u, v) at z-depth ``depth`` (meters)."""
    if depth <= 0:
        raise NonPositiveDepthError(f"depth must be positive, got {depth}")
    return np.array(
        [
            (u - intrinsics.cx) / intrinsics.fx * depth,
            (v - intrinsics.cy) / intrinsics.fy * depth,
            depth,
        ]
    )


def backproject_pixels(intrinsics: Intrinsics, u: np.ndarray, v: np.ndarray,
                       depth: np.ndarray) -> np.ndarray:
    """Vectorized :func:`backproject` over matching arrays, returns (..., 3)."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    depth = np.asarray(depth, dtype=np.float64)
    if np.any(depth <= 0):
        raise NonPositiveDepthError("all depths must be positive")
    return np.stack(
        [
            (u - intrinsics.cx) / intrinsics.fx * depth,
            (v - intrinsics.cy) / intrinsics.fy * depth,
            depth,
        ],
        axis=-1,
    )


def _depth_stencil(intrinsics: Intrinsics, depth: DepthMap):
    """Shared forward pass for normals_from_depth and its VJP.

    Returns (dirs, tu, tv, w, wnorm, sign, valid): the per-pixel view
    directions, central-difference tangents, raw cross products, their norms,
    the camera-facing sign, and the validity mask of the produced normals.
    """
    h, w_ = depth.shape
    dirs = pixel_directions(intrinsics)[:h, :w_]
    points = depth.values[..., None] * dirs

    tu = np.zeros((h, w_, 3))
    tv = np.zeros((h, w_, 3))
    tu_valid = np.zeros((h, w_), dtype=bool)
    tv_valid = np.zeros((h, w_), dtype=bool)
    tu[:, 1:-1] = points[:, 2:] - points[:, :-2]
    tu_valid[:, 1:-1] = depth.mask[:, 2:] & depth.mask[:, :-2]
    tv[1:-1, :] = points[2:, :] - points[:-2, :]
    tv_valid[1:-1, :] = depth.mask[2:, :] & depth.mask[:-2, :]

    w = np.cross(tu, tv)
    wnorm = np.linalg.norm(w, axis=2)
    valid = tu_valid & tv_valid & depth.mask & (wnorm > _DEGENERATE_NORMAL)

    # Flip so normals face the camera.
    facing = np.einsum("ijk,ijk->ij", w, dirs)
    sign = np.where(facing > 0, -1.0, 1.0)
    return dirs, tu, tv, w, wnorm, sign, valid


def normals_from_depth(intrinsics: Intrinsics, depth: DepthMap) -> NormalMap:
    """Surface normals from a depth map via a radius-1 central-difference stencil.

    At each pixel the 4-neighborhood is backprojected, tangents are the
    central differences along u and v, and the normal is their normalized
    cross product, flipped to face the camera. A pixel gets a valid normal
    only when it and all four neighbors carry valid depth.
    """
    dirs, tu, tv, w, wnorm, sign, valid = _depth_stencil(intrinsics, depth)
    safe = np.where(wnorm > 0, wnorm, 1.0)
    vectors = sign[..., None] * w / safe[..., None]
    vectors[~valid] = 0.0
    return NormalMap(vectors, valid)


def normals_from_depth_vjp(intrinsics: Intrinsics, depth: DepthMap,
                           grad_normals: np.ndarray) -> np.ndarray:
    """Backpropagate a cotangent on the normal map to the depth grid.

    ``grad_normals`` is dL/dn per pixel, (H, W, 3); entries at pixels without
    a valid normal are ignored. The camera-facing sign is treated as locally
    constant. Returns dL/ddepth with the same (H, W) shape.
    """
    dirs, tu, tv, w, wnorm, sign, valid = _depth_stencil(intrinsics, depth)
    g = np.where(valid[..., None], np.asarray(grad_normals, dtype=np.float64), 0.0)

    safe = np.where(wnorm > 0, wnorm, 1.0)[..., None]
    what = w / safe
    # n = sign * w / |w|  =>  dL/dw = sign * (g - <what, g> what) / |w|
    gw = sign[..., None] * (g - np.einsum("ijk,ijk->ij", what, g)[..., None] * what) / safe

    g_tu = np.cross(tv, gw)
    g_tv = np.cross(gw, tu)

    grad = np.zeros(depth.shape)
    # tu at column c reads points at c+1 and c-1; tv at row r reads r+1, r-1.
    grad[:, 2:] += np.einsum("ijk,ijk->ij", g_tu[:, 1:-1], dirs[:, 2:])
    grad[:, :-2] -= np.einsum("ijk,ijk->ij", g_tu[:, 1:-1], dirs[:, :-2])
    grad[2:, :] += np.einsum("ijk,ijk->ij", g_tv[1:-1, :], dirs[2:, :])
    grad[:-2, :] -= np.einsum("ijk,ijk->ij", g_tv[1:-1, :], dirs[:-2, :])
    return grad
