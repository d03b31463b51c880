"""Training losses with analytic gradients and symmetry dispatch.

Two different quantities are conventionally both called "L_s": the smoothness
term of the depth-completion loss and the scale loss of the pose stage. They
are kept apart here as ``smooth_term`` (normal cosine deficit) and
``scale_term``.

All L1 losses return the sign subgradient, with 0 at ties.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .camera import DepthMap, Intrinsics, NormalMap, normals_from_depth, normals_from_depth_vjp
from .errors import EmptyMaskError, EmptyRegionError
from .pose_core import Pose, SymmetryClass, rotation_about_axis


@dataclass(frozen=True)
class LossConfig:
    """Term weights for the second-stage loss, plus the depth-smoothness weight
    and the confidence target sharpness ``alpha`` (must be negative)."""

    lambda_smooth: float = 0.001
    lambda_scale: float = 8e-4
    lambda_translation: float = 8e-4
    lambda_axis_x: float = 8e-4
    lambda_axis_z: float = 8e-4
    lambda_angular: float = 4e-4
    lambda_conf_x: float = 1e-4
    lambda_conf_z: float = 1e-4
    alpha: float = -5.0

    def __post_init__(self):
        weights = (
            self.lambda_smooth, self.lambda_scale, self.lambda_translation,
            self.lambda_axis_x, self.lambda_axis_z, self.lambda_angular,
            self.lambda_conf_x, self.lambda_conf_z,
        )
        if any(w < 0 for w in weights):
            raise ValueError("loss weights must be non-negative")
        if self.alpha >= 0:
            raise ValueError("alpha must be negative")


@dataclass
class LossReport:
    """Per-term loss values, their weighted total, and optional gradients.

    ``gradients`` maps prediction field names (translation, axis_x, conf_x,
    axis_z, conf_z, scale) to d(total)/d(field).
    """

    translation_term: float = 0.0
    axis_x_term: float = 0.0
    axis_z_term: float = 0.0
    angular_term: float = 0.0
    conf_x_term: float = 0.0
    conf_z_term: float = 0.0
    scale_term: float = 0.0
    depth_term: float = 0.0
    smooth_term: float = 0.0
    total: float = 0.0
    gradients: dict = field(default_factory=dict)

    def to_json(self) -> str:
        data = asdict(self)
        data["gradients"] = {
            k: np.asarray(v).tolist() for k, v in self.gradients.items()
        }
        return json.dumps(data, sort_keys=True)


@dataclass
class PosePrediction:
    """Decoded quantities entering the second-stage loss."""

    translation: np.ndarray
    axis_x: np.ndarray
    conf_x: float
    axis_z: np.ndarray
    conf_z: float
    scale: np.ndarray


@dataclass
class PoseTarget:
    """Ground-truth counterparts of :class:`PosePrediction`."""

    translation: np.ndarray
    axis_x: np.ndarray
    axis_z: np.ndarray
    scale: np.ndarray

    @classmethod
    def from_pose_scale(cls, pose: Pose, scale) -> "PoseTarget":
        return cls(
            translation=np.array(pose.translation),
            axis_x=np.array(pose.axis_x),
            axis_z=np.array(pose.axis_z),
            scale=np.asarray(scale, dtype=np.float64),
        )


def translation_loss(t_hat, t_star):
    """L1 translation error; returns (value, gradient wrt t_hat)."""
    diff = np.asarray(t_hat, dtype=np.float64) - np.asarray(t_star, dtype=np.float64)
    return float(np.abs(diff).sum()), np.sign(diff)


def axis_loss(a_hat, a_star):
    """L1 plus cosine-deficit axis error; returns (value, gradient wrt a_hat)."""
    a_hat = np.asarray(a_hat, dtype=np.float64)
    a_star = np.asarray(a_star, dtype=np.float64)
    diff = a_hat - a_star
    value = float(np.abs(diff).sum() + 1.0 - a_hat @ a_star)
    return value, np.sign(diff) - a_star


def angular_loss(a_x, a_z):
    """Signed dot product of the two predicted axes; gradients are the twins."""
    a_x = np.asarray(a_x, dtype=np.float64)
    a_z = np.asarray(a_z, dtype=np.float64)
    return float(a_x @ a_z), np.array(a_z), np.array(a_x)


def confidence_target(a_hat, a_star, alpha: float) -> float:
    """exp(alpha * ||a_hat - a_star||_2), the confidence regression target."""
    return math.exp(alpha * float(np.linalg.norm(np.asarray(a_hat) - np.asarray(a_star))))


def confidence_loss(conf, a_hat, a_star, alpha: float):
    """L1 distance between a confidence and its axis-error target.

    Returns (value, gradient wrt conf, gradient wrt a_hat). The axis gradient
    is the chain through the exponential target; it is the zero subgradient
    exactly at ties and at a_hat == a_star.
    """
    a_hat = np.asarray(a_hat, dtype=np.float64)
    a_star = np.asarray(a_star, dtype=np.float64)
    diff = a_hat - a_star
    dist = float(np.linalg.norm(diff))
    target = math.exp(alpha * dist)
    sign = float(np.sign(conf - target))
    if dist == 0.0:
        grad_axis = np.zeros(3)
    else:
        grad_axis = -sign * target * alpha * diff / dist
    return abs(conf - target), sign, grad_axis


def scale_loss(s_hat, s_star):
    """L1 scale error; returns (value, gradient wrt s_hat)."""
    diff = np.asarray(s_hat, dtype=np.float64) - np.asarray(s_star, dtype=np.float64)
    return float(np.abs(diff).sum()), np.sign(diff)


def normal_loss(pred: NormalMap, gt: NormalMap, region):
    """Mean cosine deficit between predicted and true normals over a region.

    The value normalizes the predicted vector first, so the gradient is the
    tangent-projected -gt/N at each pixel: (I - n n^T) ( -gt ) / (N |v|).
    Returns (value, gradient grid (H, W, 3)).
    """
    region = np.asarray(region, dtype=bool) & pred.mask & gt.mask
    n = int(region.sum())
    if n == 0:
        raise EmptyRegionError("normal loss needs at least one valid pixel in the region")
    v = pred.vectors[region]
    g = gt.vectors[region]
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    unit = v / norms
    value = float(np.mean(1.0 - np.einsum("ij,ij->i", unit, g)))

    proj = g - np.einsum("ij,ij->i", unit, g)[:, None] * unit
    grad = np.zeros_like(pred.vectors)
    grad[region] = -proj / (n * norms)
    return value, grad


@dataclass
class DepthCompletionLoss:
    """Depth MSE plus weighted normal-smoothness term with its gradient grid."""

    total: float
    depth_term: float
    smooth_term: float
    grad: np.ndarray


def depth_completion_loss(pred: DepthMap, gt: DepthMap, mask, intrinsics: Intrinsics,
                          lambda_smooth: float) -> DepthCompletionLoss:
    """First-stage loss: masked MSE on depth plus normal cosine deficit.

    The depth term averages squared error over masked pixels valid in both
    maps; the smoothness term averages 1 - cos between normals computed from
    both depth maps (radius-1 stencil), over masked pixels where both normals
    exist. The returned gradient is d(total)/d(pred values), analytic through
    the normal stencil.
    """
    mask = np.asarray(mask, dtype=bool)
    depth_region = mask & pred.mask & gt.mask
    n_d = int(depth_region.sum())
    if n_d == 0:
        raise EmptyMaskError("depth loss needs at least one masked pixel valid in both maps")

    diff = np.where(depth_region, pred.values - gt.values, 0.0)
    depth_term = float((diff**2).sum()) / n_d
    grad = 2.0 * diff / n_d

    pred_normals = normals_from_depth(intrinsics, pred)
    gt_normals = normals_from_depth(intrinsics, gt)
    smooth_region = mask & pred_normals.mask & gt_normals.mask
    n_s = int(smooth_region.sum())
    smooth_term = 0.0
    if n_s > 0:
        cos = np.einsum("ijk,ijk->ij", pred_normals.vectors, gt_normals.vectors)
        smooth_term = float((1.0 - cos[smooth_region]).sum()) / n_s
        grad_normals = np.where(smooth_region[..., None], -gt_normals.vectors / n_s, 0.0)
        grad = grad + lambda_smooth * normals_from_depth_vjp(intrinsics, pred, grad_normals)

    total = depth_term + lambda_smooth * smooth_term
    return DepthCompletionLoss(total, depth_term, smooth_term, grad)


def _candidate_x_axes(target: PoseTarget, symmetry: SymmetryClass) -> list:
    axes = []
    for angle in symmetry.angles:
        axes.append(rotation_about_axis(target.axis_z, angle) @ target.axis_x)
    return axes


def total_pose_loss(pred: PosePrediction, target: PoseTarget, symmetry: SymmetryClass,
                    config: LossConfig) -> LossReport:
    """Weighted second-stage loss with symmetry dispatch.

    Axial symmetry zeroes and excludes the x-axis and x-confidence terms.
    Planar symmetry evaluates the x-axis loss for every candidate x-axis and
    keeps the minimum; the argmin candidate also defines the x-confidence
    target. Gradients with respect to every prediction field are filled in.
    """
    report = LossReport()
    grads = {
        "translation": np.zeros(3),
        "axis_x": np.zeros(3),
        "conf_x": 0.0,
        "axis_z": np.zeros(3),
        "conf_z": 0.0,
        "scale": np.zeros(3),
    }

    value, grad = translation_loss(pred.translation, target.translation)
    report.translation_term = value
    grads["translation"] += config.lambda_translation * grad

    value, grad = scale_loss(pred.scale, target.scale)
    report.scale_term = value
    grads["scale"] += config.lambda_scale * grad

    value, grad_x, grad_z = angular_loss(pred.axis_x, pred.axis_z)
    report.angular_term = value
    grads["axis_x"] += config.lambda_angular * grad_x
    grads["axis_z"] += config.lambda_angular * grad_z

    value, grad = axis_loss(pred.axis_z, target.axis_z)
    report.axis_z_term = value
    grads["axis_z"] += config.lambda_axis_z * grad

    value, grad_c, grad_a = confidence_loss(pred.conf_z, pred.axis_z, target.axis_z, config.alpha)
    report.conf_z_term = value
    grads["conf_z"] += config.lambda_conf_z * grad_c
    grads["axis_z"] += config.lambda_conf_z * grad_a

    if symmetry.kind != "axial":
        if symmetry.kind == "planar":
            candidates = _candidate_x_axes(target, symmetry)
            losses = [axis_loss(pred.axis_x, cand) for cand in candidates]
            best = min(range(len(candidates)), key=lambda i: losses[i][0])
            target_x = candidates[best]
            value, grad = losses[best]
        else:
            target_x = target.axis_x
            value, grad = axis_loss(pred.axis_x, target_x)
        report.axis_x_term = value
        grads["axis_x"] += config.lambda_axis_x * grad

        value, grad_c, grad_a = confidence_loss(pred.conf_x, pred.axis_x, target_x, config.alpha)
        report.conf_x_term = value
        grads["conf_x"] += config.lambda_conf_x * grad_c
        grads["axis_x"] += config.lambda_conf_x * grad_a

    report.total = (
        config.lambda_scale * report.scale_term
        + config.lambda_translation * report.translation_term
        + config.lambda_axis_x * report.axis_x_term
        + config.lambda_axis_z * report.axis_z_term
        + config.lambda_angular * report.angular_term
        + config.lambda_conf_x * report.conf_x_term
        + config.lambda_conf_z * report.conf_z_term
    )
    report.gradients = grads
    return report
