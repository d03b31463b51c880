"""Symmetry-aware evaluation metrics.

Threshold indicators are strict everywhere: an instance counts for
"X deg Y cm" iff rotation error < X degrees AND translation error < Y cm,
an IoU threshold iff IoU > tau, and the depth ratio metric iff
max(pred/gt, gt/pred) < n.

Headline numbers average per-category means over the categories present;
per-category breakdowns are always part of the report.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .camera import DepthMap, NormalMap
from .errors import EmptyMaskError, EmptyRegionError, LengthMismatchError
from .pose_core import (
    CATEGORY_NAMES,
    CategoryLabel,
    OrientedBox,
    Pose,
    SymmetryClass,
    box_corners,
    symmetry_candidates,
)

_CLIP_EPS = 1e-12

# Face cycles over the documented corner ordering (see pose_core.box_corners).
_FACE_CYCLES = (
    (0, 1, 3, 2),  # x-
    (4, 5, 7, 6),  # x+
    (0, 1, 5, 4),  # y-
    (2, 3, 7, 6),  # y+
    (0, 2, 6, 4),  # z-
    (1, 3, 7, 5),  # z+
)

IOU_THRESHOLDS = (0.25, 0.50, 0.75)
DEGREE_CM_THRESHOLDS = ((5.0, 2.0), (5.0, 5.0), (10.0, 5.0), (10.0, 10.0))
DEGREE_THRESHOLDS = (5.0, 10.0)
CM_THRESHOLDS = (2.0, 5.0, 10.0)

METRIC_COLUMNS = (
    "3d_25", "3d_50", "3d_75",
    "5deg2cm", "5deg5cm", "10deg5cm", "10deg10cm",
    "5deg", "10deg", "2cm", "5cm", "10cm",
)


def _box_halfspaces(box: OrientedBox):
    """Six (normal, offset) pairs; a point x is inside iff normal . x <= offset."""
    planes = []
    for k in range(3):
        axis = box.pose.rotation[:, k]
        half = box.scale[k] / 2.0
        center = float(axis @ box.pose.translation)
        planes.append((axis, center + half))
        planes.append((-axis, -center + half))
    return planes


def _clip_faces(faces, normal, offset):
    """Sutherland-Hodgman clip of every face against one halfspace.

    Returns (faces, cut_points, any_cut): the clipped polygons, the vertices
    that landed on the clipping plane, and whether anything was removed.
    """
    new_faces = []
    cuts = []
    any_cut = False
    for poly in faces:
        dist = poly @ normal - offset
        if np.all(dist <= _CLIP_EPS):
            new_faces.append(poly)
            on_plane = np.abs(dist) <= _CLIP_EPS
            if on_plane.any():
                cuts.extend(poly[on_plane])
            continue
        any_cut = True
        if np.all(dist > -_CLIP_EPS):
            continue
        out = []
        m = len(poly)
        for i in range(m):
            a, da = poly[i - 1], dist[i - 1]
            b, db = poly[i], dist[i]
            b_in = db <= _CLIP_EPS
            if b_in:
                if da > _CLIP_EPS:
                    t = da / (da - db)
                    p = a + t * (b - a)
                    out.append(p)
                    cuts.append(p)
                out.append(b)
                if abs(db) <= _CLIP_EPS:
                    cuts.append(b)
            elif da <= _CLIP_EPS:
                t = da / (da - db)
                p = a + t * (b - a)
                out.append(p)
                cuts.append(p)
        if len(out) >= 3:
            new_faces.append(np.asarray(out))
    return new_faces, cuts, any_cut


def _cap_face(cuts, normal):
    """Order the on-plane cut points into a convex cap polygon."""
    if len(cuts) < 3:
        return None
    pts = np.asarray(cuts)
    keep = [pts[0]]
    for p in pts[1:]:
        if all(np.linalg.norm(p - q) > 1e-9 for q in keep):
            keep.append(p)
    if len(keep) < 3:
        return None
    pts = np.asarray(keep)
    center = pts.mean(axis=0)
    basis_u = np.eye(3)[np.argmin(np.abs(normal))]
    basis_u = basis_u - (basis_u @ normal) * normal
    basis_u /= np.linalg.norm(basis_u)
    basis_v = np.cross(normal, basis_u)
    rel = pts - center
    angles = np.arctan2(rel @ basis_v, rel @ basis_u)
    return pts[np.argsort(angles)]


def _polytope_volume(faces) -> float:
    if not faces:
        return 0.0
    center = np.concatenate(faces).mean(axis=0)
    volume = 0.0
    for poly in faces:
        rel = poly - center
        for i in range(1, len(poly) - 1):
            volume += abs(float(np.dot(rel[0], np.cross(rel[i], rel[i + 1])))) / 6.0
    return volume


def intersection_volume(a: OrientedBox, b: OrientedBox) -> float:
    """Exact volume of the intersection of two oriented boxes.

    Box a's polytope (8 corners, 6 quad faces) is clipped iteratively against
    each of box b's six face halfspaces; each cut gets a cap polygon so the
    boundary stays closed. The volume is the fan decomposition around an
    interior point.
    """
    faces = [box_corners(a)[list(cycle)] for cycle in _FACE_CYCLES]
    for normal, offset in _box_halfspaces(b):
        faces, cuts, any_cut = _clip_faces(faces, normal, offset)
        if not faces:
            return 0.0
        if any_cut:
            cap = _cap_face(cuts, normal)
            if cap is not None:
                faces.append(cap)
    return _polytope_volume(faces)


def oriented_iou(a: OrientedBox, b: OrientedBox) -> float:
    """Exact 3D intersection-over-union of two oriented boxes, in [0, 1]."""
    # Bounding-sphere early out.
    ra = float(np.linalg.norm(a.scale)) / 2.0
    rb = float(np.linalg.norm(b.scale)) / 2.0
    if np.linalg.norm(a.pose.translation - b.pose.translation) > ra + rb:
        return 0.0
    inter = intersection_volume(a, b)
    union = a.volume + b.volume - inter
    return min(max(inter / union, 0.0), 1.0)


def rotation_error(r_hat: np.ndarray, r_star: np.ndarray,
                   symmetry: SymmetryClass = SymmetryClass.none()) -> float:
    """Rotation error in degrees under the object's symmetry.

    No symmetry: geodesic angle of r_hat r_star^T. Axial: angle between the
    two z-axes only. Planar: minimum geodesic angle over the ground truth's
    candidate x-axis rotations.
    """
    r_hat = np.asarray(r_hat, dtype=np.float64)
    r_star = np.asarray(r_star, dtype=np.float64)
    if symmetry.kind == "axial":
        z_hat, z_star = r_hat[:, 2], r_star[:, 2]
        angle = math.atan2(np.linalg.norm(np.cross(z_hat, z_star)), float(z_hat @ z_star))
        return math.degrees(angle)
    candidates = symmetry_candidates(symmetry, Pose(r_star, np.zeros(3)))
    best = math.inf
    for cand in candidates:
        rel = r_hat @ cand.rotation.T
        # atan2 of the skew part keeps precision near zero where acos(trace)
        # loses half the significant digits
        sin = 0.5 * math.sqrt(
            (rel[2, 1] - rel[1, 2]) ** 2
            + (rel[0, 2] - rel[2, 0]) ** 2
            + (rel[1, 0] - rel[0, 1]) ** 2
        )
        cos = (np.trace(rel) - 1.0) / 2.0
        best = min(best, math.atan2(sin, cos))
    return math.degrees(best)


@dataclass
class PoseInstance:
    """One instance's category, pose, scale, and (for ground truth) symmetry."""

    category: CategoryLabel
    pose: Pose
    scale: np.ndarray
    symmetry: SymmetryClass = field(default_factory=SymmetryClass.none)

    @property
    def box(self) -> OrientedBox:
        return OrientedBox(self.pose, self.scale)


def _check_monotone(values: dict):
    assert values["3d_25"] >= values["3d_50"] >= values["3d_75"]
    assert values["5deg2cm"] <= values["5deg5cm"] <= values["10deg5cm"] <= values["10deg10cm"]
    assert values["5deg"] <= values["10deg"]
    assert values["2cm"] <= values["5cm"] <= values["10cm"]


@dataclass
class PoseMetricsReport:
    """Per-category and mean percentages for every pose metric column."""

    per_category: dict
    mean: dict
    counts: dict

    def rows(self):
        for name in CATEGORY_NAMES:
            if name in self.per_category:
                yield name, self.per_category[name]
        yield "mean", self.mean

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["category", "instances"] + list(METRIC_COLUMNS))
            for name, values in self.rows():
                count = self.counts.get(name, sum(self.counts.values()))
                writer.writerow([name, count] + [f"{values[c]:.4f}" for c in METRIC_COLUMNS])

    def to_markdown(self) -> str:
        header = "| category | " + " | ".join(METRIC_COLUMNS) + " |"
        rule = "|---" * (len(METRIC_COLUMNS) + 1) + "|"
        lines = [header, rule]
        for name, values in self.rows():
            cells = " | ".join(f"{values[c]:.2f}" for c in METRIC_COLUMNS)
            lines.append(f"| {name} | {cells} |")
        return "\n".join(lines) + "\n"


def pose_metrics(predictions, ground_truth, symmetry_aware: bool = True) -> PoseMetricsReport:
    """Score predicted poses/scales against ground truth.

    ``predictions[i]`` may be None (a missing or failed instance), which
    counts as a failure at every threshold. Ground-truth instances carry the
    symmetry used for the rotation error; ``symmetry_aware=False`` ignores it
    and scores plain geodesic error.
    """
    if len(predictions) != len(ground_truth):
        raise LengthMismatchError(
            f"{len(predictions)} predictions vs {len(ground_truth)} ground-truth instances"
        )
    hits = {}
    counts = {}
    for pred, truth in zip(predictions, ground_truth):
        name = truth.category.name
        counts[name] = counts.get(name, 0) + 1
        scores = hits.setdefault(name, {c: 0 for c in METRIC_COLUMNS})
        if pred is None:
            continue
        symmetry = truth.symmetry if symmetry_aware else SymmetryClass.none()
        rot = rotation_error(pred.pose.rotation, truth.pose.rotation, symmetry)
        trans_cm = float(np.linalg.norm(pred.pose.translation - truth.pose.translation)) * 100.0
        iou = oriented_iou(pred.box, truth.box)
        for tau, column in zip(IOU_THRESHOLDS, ("3d_25", "3d_50", "3d_75")):
            scores[column] += iou > tau
        for (deg, cm), column in zip(DEGREE_CM_THRESHOLDS,
                                     ("5deg2cm", "5deg5cm", "10deg5cm", "10deg10cm")):
            scores[column] += (rot < deg) and (trans_cm < cm)
        for deg, column in zip(DEGREE_THRESHOLDS, ("5deg", "10deg")):
            scores[column] += rot < deg
        for cm, column in zip(CM_THRESHOLDS, ("2cm", "5cm", "10cm")):
            scores[column] += trans_cm < cm

    per_category = {}
    for name, scores in hits.items():
        per_category[name] = {
            c: 100.0 * scores[c] / counts[name] for c in METRIC_COLUMNS
        }
        _check_monotone(per_category[name])
    if per_category:
        mean = {
            c: sum(v[c] for v in per_category.values()) / len(per_category)
            for c in METRIC_COLUMNS
        }
    else:
        mean = {c: 0.0 for c in METRIC_COLUMNS}
    _check_monotone(mean)
    return PoseMetricsReport(per_category, mean, counts)


@dataclass
class DepthMetricsReport:
    """Depth-completion accuracy within a mask: errors in meters, deltas in percent."""

    rmse: float
    rel: float
    mae: float
    delta_1_05: float
    delta_1_10: float
    delta_1_25: float

    def __post_init__(self):
        assert self.rmse >= self.mae >= 0.0
        assert self.delta_1_05 <= self.delta_1_10 <= self.delta_1_25

    def columns(self):
        return {
            "rmse": self.rmse, "rel": self.rel, "mae": self.mae,
            "delta_1.05": self.delta_1_05, "delta_1.10": self.delta_1_10,
            "delta_1.25": self.delta_1_25,
        }

    def to_csv(self, path):
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols.keys())
            writer.writerow([f"{v:.6f}" for v in cols.values()])

    def to_markdown(self) -> str:
        cols = self.columns()
        header = "| " + " | ".join(cols) + " |"
        rule = "|---" * len(cols) + "|"
        row = "| " + " | ".join(f"{v:.4f}" for v in cols.values()) + " |"
        return "\n".join([header, rule, row]) + "\n"


def depth_metrics(pred: DepthMap, gt: DepthMap, mask) -> DepthMetricsReport:
    """RMSE / REL / MAE plus strict ratio thresholds over the masked pixels."""
    region = np.asarray(mask, dtype=bool) & pred.mask & gt.mask
    n = int(region.sum())
    if n == 0:
        raise EmptyMaskError("depth metrics need at least one masked valid pixel")
    p = pred.values[region]
    g = gt.values[region]
    err = p - g
    ratio = np.maximum(p / g, g / p)
    return DepthMetricsReport(
        rmse=float(np.sqrt(np.mean(err**2))),
        rel=float(np.mean(np.abs(err) / g)),
        mae=float(np.mean(np.abs(err))),
        delta_1_05=100.0 * float(np.mean(ratio < 1.05)),
        delta_1_10=100.0 * float(np.mean(ratio < 1.10)),
        delta_1_25=100.0 * float(np.mean(ratio < 1.25)),
    )


@dataclass
class NormalMetricsReport:
    """Surface-normal accuracy: angular RMSE/MAE in radians, thresholds in percent."""

    rmse: float
    mae: float
    pct_11_25: float
    pct_22_5: float
    pct_30: float

    def __post_init__(self):
        assert self.rmse >= self.mae >= 0.0
        assert self.pct_11_25 <= self.pct_22_5 <= self.pct_30

    def columns(self):
        return {
            "rmse": self.rmse, "mae": self.mae,
            "11.25deg": self.pct_11_25, "22.5deg": self.pct_22_5, "30deg": self.pct_30,
        }

    to_csv = DepthMetricsReport.to_csv
    to_markdown = DepthMetricsReport.to_markdown


def normal_metrics(pred: NormalMap, gt: NormalMap, region) -> NormalMetricsReport:
    """Angular-distance statistics between two normal maps over a region."""
    region = np.asarray(region, dtype=bool) & pred.mask & gt.mask
    n = int(region.sum())
    if n == 0:
        raise EmptyRegionError("normal metrics need at least one valid pixel in the region")
    cos = np.einsum("ij,ij->i", pred.vectors[region], gt.vectors[region])
    angles = np.arccos(np.clip(cos, -1.0, 1.0))
    return NormalMetricsReport(
        rmse=float(np.sqrt(np.mean(angles**2))),
        mae=float(np.mean(angles)),
        pct_11_25=100.0 * float(np.mean(angles < math.radians(11.25))),
        pct_22_5=100.0 * float(np.mean(angles < math.radians(22.5))),
        pct_30=100.0 * float(np.mean(angles < math.radians(30.0))),
    )
