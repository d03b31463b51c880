"""Generalized point cloud construction.

A feature patch stacks 10 channels per pixel in the fixed order
``[rgb(3), completed depth(1), normal(3), ray(3)]``. Sampling N pixels inside
the transparency mask turns the patch into an (N, 10) point cloud whose rows
also remember their source pixel in the original image.

Sampling uses numpy's PCG64 generator seeded explicitly; platform-default
RNG state is never consulted, so a fixed seed reproduces the same rows on
any machine.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .camera import DepthMap, NormalMap
from .errors import EmptyMaskError, ShapeMismatchError
from .pose_core import CategoryLabel

FEATURE_DIM = 10
RGB_COLUMNS = slice(0, 3)
DEPTH_COLUMN = 3
NORMAL_COLUMNS = slice(4, 7)
RAY_COLUMNS = slice(7, 10)


@dataclass
class PatchInputs:
    """First-stage inputs cropped to one instance patch.

    ``u_map``/``v_map`` give each patch pixel's source coordinates in the
    original image, so frame-scoped estimators can look up per-pixel truth
    and downstream math can backproject with the original intrinsics.
    """

    rgb: np.ndarray                 # (H, W, 3) in [0, 1]
    raw_depth: DepthMap
    transparency_mask: np.ndarray   # (H, W) bool
    u_map: np.ndarray               # (H, W) int source column
    v_map: np.ndarray               # (H, W) int source row


@dataclass
class PatchBundle:
    """Everything the second stage needs for one instance."""

    bbox: tuple                     # (u0, v0, u1, v1), exclusive upper bounds
    rgb: np.ndarray
    raw_depth: DepthMap
    completed_depth: DepthMap
    normals: NormalMap
    rays: np.ndarray                # (H, W, 3)
    instance_mask: np.ndarray       # (H, W) bool
    transparency_mask: np.ndarray   # (H, W) bool
    category: CategoryLabel
    u_map: np.ndarray
    v_map: np.ndarray

    @property
    def sample_mask(self) -> np.ndarray:
        """Pixels eligible for sampling: transparency and instance mask agree."""
        return self.transparency_mask & self.instance_mask


@dataclass
class GeneralizedPointCloud:
    """(N, 10) feature rows plus each row's source pixel (u, v)."""

    features: np.ndarray
    pixels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[1] != FEATURE_DIM:
            raise ShapeMismatchError(f"features must be (N, {FEATURE_DIM})")
        if self.pixels.shape != (self.features.shape[0], 2):
            raise ShapeMismatchError("pixels must be (N, 2)")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.features[:, RGB_COLUMNS]

    @property
    def depth(self) -> np.ndarray:
        return self.features[:, DEPTH_COLUMN]

    @property
    def normals(self) -> np.ndarray:
        return self.features[:, NORMAL_COLUMNS]

    @property
    def rays(self) -> np.ndarray:
        return self.features[:, RAY_COLUMNS]

    def points_3d(self) -> np.ndarray:
        """Camera-frame points: ray scaled so its z component equals the depth."""
        rays = self.rays
        return rays * (self.depth / rays[:, 2])[:, None]

    def to_csv(self, path):
        """Debug dump: one row per point, columns u, v, then the 10 features."""
        header = ["u", "v", "r", "g", "b", "depth", "nx", "ny", "nz", "rx", "ry", "rz"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for (u, v), feat in zip(self.pixels, self.features):
                writer.writerow([repr(float(u)), repr(float(v))] + [repr(float(x)) for x in feat])

    @classmethod
    def from_csv(cls, path) -> "GeneralizedPointCloud":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                rows.append([float(x) for x in row])
        data = np.array(rows, dtype=np.float64).reshape(-1, 12)
        return cls(data[:, 2:], data[:, :2])


def assemble_features(bundle: PatchBundle) -> np.ndarray:
    """Concatenate the patch channels into an (H, W, 10) feature grid."""
    h, w = bundle.rgb.shape[:2]
    parts = {
        "rgb": bundle.rgb.shape[:2],
        "completed depth": bundle.completed_depth.shape,
        "normal": bundle.normals.shape,
        "ray": bundle.rays.shape[:2],
        "instance mask": bundle.instance_mask.shape,
        "transparency mask": bundle.transparency_mask.shape,
    }
    for name, shape in parts.items():
        if shape != (h, w):
            raise ShapeMismatchError(f"{name} patch is {shape}, expected {(h, w)}")
    patch = np.empty((h, w, FEATURE_DIM))
    patch[..., RGB_COLUMNS] = bundle.rgb
    patch[..., DEPTH_COLUMN] = bundle.completed_depth.values
    patch[..., NORMAL_COLUMNS] = bundle.normals.vectors
    patch[..., RAY_COLUMNS] = bundle.rays
    return patch


def sample_points(patch: np.ndarray, mask: np.ndarray, count: int, seed: int,
                  u_map: np.ndarray = None, v_map: np.ndarray = None) -> GeneralizedPointCloud:
    """Draw ``count`` feature rows uniformly from the masked pixels.

    Sampling is without replacement while the mask population allows it and
    falls back to with-replacement for smaller masks. Deterministic for a
    fixed seed (PCG64).
    """
    mask = np.asarray(mask, dtype=bool)
    if patch.shape[:2] != mask.shape:
        raise ShapeMismatchError(f"mask {mask.shape} does not match patch {patch.shape[:2]}")
    flat = np.flatnonzero(mask)
    if flat.size == 0:
        raise EmptyMaskError("cannot sample from an empty mask")
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = rng.choice(flat, size=count, replace=flat.size < count)
    rows, cols = np.unravel_index(chosen, mask.shape)
    if u_map is None:
        u = cols.astype(np.float64)
        v = rows.astype(np.float64)
    else:
        u = np.asarray(u_map)[rows, cols].astype(np.float64)
        v = np.asarray(v_map)[rows, cols].astype(np.float64)
    return GeneralizedPointCloud(patch[rows, cols], np.stack([u, v], axis=1))


def _nearest_indices(src_len: int, dst_len: int) -> np.ndarray:
    return np.minimum(
        ((np.arange(dst_len) + 0.5) * src_len / dst_len).astype(np.int64), src_len - 1
    )


def mask_bbox(mask: np.ndarray) -> tuple:
    """Tight (u0, v0, u1, v1) pixel bounds of a boolean mask, exclusive upper."""
    rows = np.any(mask, axis=1)
    cols = np.any(mask, axis=0)
    if not rows.any():
        raise EmptyMaskError("mask has no set pixels")
    v0, v1 = np.flatnonzero(rows)[[0, -1]]
    u0, u1 = np.flatnonzero(cols)[[0, -1]]
    return int(u0), int(v0), int(u1) + 1, int(v1) + 1


def build_patch_bundle(rgb, raw_depth: DepthMap, instance_mask, transparency_mask,
                       rays, category: CategoryLabel, depth_completer, normal_estimator,
                       patch_size: int = 256) -> PatchBundle:
    """Crop one instance, rescale to a square patch, and run the first stage.

    Crops follow the instance mask's bounding box and are resampled to
    ``patch_size`` x ``patch_size`` with nearest-neighbor lookup, which keeps
    masks binary and source-pixel coordinates exact. The depth completer and
    normal estimator are invoked on the cropped inputs.
    """
    bbox = mask_bbox(instance_mask)
    u0, v0, u1, v1 = bbox
    ri = v0 + _nearest_indices(v1 - v0, patch_size)
    ci = u0 + _nearest_indices(u1 - u0, patch_size)
    grid_r, grid_c = np.meshgrid(ri, ci, indexing="ij")

    patch = PatchInputs(
        rgb=np.asarray(rgb)[grid_r, grid_c],
        raw_depth=DepthMap(raw_depth.values[grid_r, grid_c], raw_depth.mask[grid_r, grid_c]),
        transparency_mask=np.asarray(transparency_mask)[grid_r, grid_c],
        u_map=grid_c,
        v_map=grid_r,
    )
    completed = depth_completer.complete(patch)
    normals = normal_estimator.estimate(patch)
    return PatchBundle(
        bbox=bbox,
        rgb=patch.rgb,
        raw_depth=patch.raw_depth,
        completed_depth=completed,
        normals=normals,
        rays=np.asarray(rays)[grid_r, grid_c],
        instance_mask=np.asarray(instance_mask)[grid_r, grid_c],
        transparency_mask=patch.transparency_mask,
        category=category,
        u_map=grid_c,
        v_map=grid_r,
    )
