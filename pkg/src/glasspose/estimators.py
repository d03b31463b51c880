"""Pluggable stand-ins for every learned component.

Depth completers and normal estimators are frame-scoped: a factory binds one
to a frame's ground truth, and the returned object answers patch-level
queries through the patch's source-pixel maps. The oracle variants return
the truth; the noisy variants add calibrated, seed-deterministic error so
estimation-quality ablations can run without networks.

The trainable decoder is a single linear layer over pooled point-cloud
statistics. Accuracy parity with a learned embedding is a non-goal; the
layer exists so the loss suite, its gradients, and the decoding math can be
exercised end to end at desk scale.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .camera import DepthMap, NormalMap
from .errors import DivergedLossError, EmptyCloudError, WidthMismatchError
from .features import GeneralizedPointCloud, PatchInputs
from .losses import LossConfig, LossReport, PosePrediction, PoseTarget, total_pose_loss
from .pose_core import CATEGORY_NAMES, CategoryLabel, SymmetryClass
from .recovery import AxisPrediction
from .synth import SceneFrame, smooth_field

_WHITEN_FLOOR = 1e-7      # relative eigenvalue floor of the feature whitener
_WHITEN_SHRINKAGE = 0.1   # covariance shrinkage toward its diagonal

# Calibrated noise presets: the depth preset targets a mean absolute
# completion error around 0.04 m, the normal preset a mean angular error
# around 0.13 rad. Most of either budget sits in the smooth (spatially
# correlated) component: completion and normal-estimation networks get whole
# regions wrong together, and only structured error survives the point-cloud
# pooling downstream.
DEFAULT_DEPTH_SIGMA = 0.025
DEFAULT_DEPTH_BIAS_AMPLITUDE = 0.12
DEFAULT_DEPTH_BIAS_WAVELENGTH = 480.0
DEFAULT_NORMAL_ANGLE_SIGMA = 0.05
DEFAULT_NORMAL_BIAS_AMPLITUDE = 0.24
DEFAULT_NORMAL_BIAS_WAVELENGTH = 480.0


class _FrameDepthCompleter:
    """Crops a frame-level completed depth map to patches."""

    def __init__(self, completed_values: np.ndarray, completed_mask: np.ndarray):
        self._values = completed_values
        self._mask = completed_mask

    def complete(self, patch: PatchInputs) -> DepthMap:
        values = self._values[patch.v_map, patch.u_map]
        mask = self._mask[patch.v_map, patch.u_map]
        inside = patch.transparency_mask
        out_values = np.where(inside, values, patch.raw_depth.values)
        out_mask = np.where(inside, mask, patch.raw_depth.mask)
        return DepthMap(out_values, out_mask)


class _FrameNormalEstimator:
    """Crops a frame-level normal map to patches."""

    def __init__(self, vectors: np.ndarray, mask: np.ndarray):
        self._vectors = vectors
        self._mask = mask

    def estimate(self, patch: PatchInputs) -> NormalMap:
        return NormalMap(
            self._vectors[patch.v_map, patch.u_map],
            self._mask[patch.v_map, patch.u_map],
        )


def oracle_depth_completer(frame: SceneFrame) -> _FrameDepthCompleter:
    """Perfect completion: ground truth inside the transparency mask, raw outside."""
    return _FrameDepthCompleter(frame.gt_depth.values, frame.gt_depth.mask)


def noisy_depth_completer(frame: SceneFrame, sigma: float = DEFAULT_DEPTH_SIGMA,
                          seed: int = 0,
                          bias_amplitude: float = DEFAULT_DEPTH_BIAS_AMPLITUDE,
                          bias_wavelength: float = DEFAULT_DEPTH_BIAS_WAVELENGTH):
    """Completion with zero-mean Gaussian error plus a smooth bias field.

    Error is added to the ground truth inside the transparency mask only and
    is deterministic per (frame, sigma, seed).
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, frame.seed, 1])))
    values = frame.gt_depth.values.copy()
    mask = frame.transparency_mask
    if mask.any():
        if bias_amplitude > 0:
            bias = smooth_field(mask.shape, bias_amplitude, bias_wavelength, rng)
            values[mask] += bias[mask]
        if sigma > 0:
            values[mask] += rng.normal(0.0, sigma, size=int(mask.sum()))
        values[mask] = np.maximum(values[mask], 1e-3)
    return _FrameDepthCompleter(values, frame.gt_depth.mask)


def oracle_normal_estimator(frame: SceneFrame) -> _FrameNormalEstimator:
    """Analytic ground-truth normals."""
    return _FrameNormalEstimator(frame.gt_normals.vectors, frame.gt_normals.mask)


def noisy_normal_estimator(frame: SceneFrame,
                           angle_sigma: float = DEFAULT_NORMAL_ANGLE_SIGMA,
                           seed: int = 0,
                           bias_amplitude: float = DEFAULT_NORMAL_BIAS_AMPLITUDE,
                           bias_wavelength: float = DEFAULT_NORMAL_BIAS_WAVELENGTH):
    """Ground-truth normals with structured plus independent angular error.

    A smooth low-frequency pair of tangent fields tilts whole regions
    coherently (the dominant error mode of an estimation network); on top of
    that each pixel gets an independent half-normal jitter of scale
    ``angle_sigma`` about a random tangent axis. Jittered normals that would
    face away from the camera are reflected back across the view plane.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, frame.seed, 2])))
    shape = frame.gt_normals.shape
    vec = frame.gt_normals.vectors.reshape(-1, 3).copy()
    mask = frame.gt_normals.mask.reshape(-1)
    idx = np.flatnonzero(mask)

    bias_a = smooth_field(shape, bias_amplitude, bias_wavelength, rng).reshape(-1)[idx]
    bias_b = smooth_field(shape, bias_amplitude, bias_wavelength, rng).reshape(-1)[idx]
    iid = np.abs(rng.normal(0.0, angle_sigma, size=idx.size))
    azimuth = rng.uniform(0.0, 2.0 * math.pi, size=idx.size)

    n = vec[idx]
    helper = np.where(np.abs(n[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    t1 = np.cross(n, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(n, t1)

    # Tilting n toward a tangent direction by angle theta is exact rotation
    # because the tilt axis is perpendicular to n.
    tilt_x = bias_a + iid * np.cos(azimuth)
    tilt_y = bias_b + iid * np.sin(azimuth)
    angles = np.hypot(tilt_x, tilt_y)
    safe = np.where(angles > 0, angles, 1.0)
    tangent = (tilt_x / safe)[:, None] * t1 + (tilt_y / safe)[:, None] * t2
    jittered = np.cos(angles)[:, None] * n + np.sin(angles)[:, None] * tangent

    from .camera import pixel_directions

    rays = pixel_directions(frame.intrinsics).reshape(-1, 3)[idx]
    rays /= np.linalg.norm(rays, axis=1, keepdims=True)
    facing = np.einsum("ij,ij->i", jittered, rays)
    away = facing > 0
    jittered[away] -= 2.0 * facing[away, None] * rays[away]

    vec[idx] = jittered
    return _FrameNormalEstimator(vec.reshape(*shape, 3), frame.gt_normals.mask)


# ---------------------------------------------------------------------------
# Reference embedding and linear decoder.
# ---------------------------------------------------------------------------

POINT_FEATURE_DIM = 13          # 10 raw features + 3 centered coordinates
GLOBAL_FEATURE_DIM = 3 * POINT_FEATURE_DIM
POOLED_DIM = POINT_FEATURE_DIM + GLOBAL_FEATURE_DIM + len(CATEGORY_NAMES)
LIFT_DIM = 640                  # fixed random-feature expansion of the pooled vector
DECODER_INPUT_DIM = POOLED_DIM + LIFT_DIM
DECODER_OUTPUT_DIM = 14         # t(3) + axis_x(3) + conf_x + axis_z(3) + conf_z + scale(3)

# The lift is a fixed, seeded random projection shared by every decoder:
# lifted = [pooled, tanh(G pooled / sqrt(d) + phase)]. It widens the
# statistics the single linear layer sees without adding learned parameters.
_lift_rng = np.random.Generator(np.random.PCG64(0x11F7))
_LIFT_PROJECTION = _lift_rng.normal(0.0, 1.0, size=(LIFT_DIM, POOLED_DIM))
_LIFT_PHASE = _lift_rng.uniform(-2.0, 2.0, size=LIFT_DIM)
del _lift_rng


def lift_pooled(pooled: np.ndarray) -> np.ndarray:
    """Deterministic random-feature expansion of a pooled vector."""
    pooled = np.asarray(pooled, dtype=np.float64)
    hidden = np.tanh(_LIFT_PROJECTION @ pooled / math.sqrt(pooled.size) + _LIFT_PHASE)
    return np.concatenate([pooled, hidden])

_AXIS_X_INIT = np.array([1.0, 0.0, 0.0])
_AXIS_Z_INIT = np.array([0.0, 0.0, 1.0])


@dataclass
class Embedding:
    """Per-point features, pooled global statistics, and the category one-hot."""

    point_features: np.ndarray   # (N, 13)
    global_features: np.ndarray  # (39,) = mean | max | covariance diagonal
    category: CategoryLabel

    @property
    def concat(self) -> np.ndarray:
        """(N, 58) per-point rows: [point features, global features, one-hot]."""
        n = self.point_features.shape[0]
        return np.hstack(
            [
                self.point_features,
                np.tile(self.global_features, (n, 1)),
                np.tile(self.category.one_hot, (n, 1)),
            ]
        )

    @property
    def pooled(self) -> np.ndarray:
        """(58,) decoder input: mean-pooled point features, global, one-hot."""
        return np.concatenate(
            [self.point_features.mean(axis=0), self.global_features, self.category.one_hot]
        )


def reference_embedding(cloud: GeneralizedPointCloud, category: CategoryLabel) -> Embedding:
    """Deterministic embedding: raw features plus centered 3D coordinates,
    pooled into mean / max / covariance-diagonal statistics."""
    if len(cloud) == 0:
        raise EmptyCloudError("cannot embed an empty point cloud")
    points = cloud.points_3d()
    centered = points - points.mean(axis=0)
    point_features = np.hstack([cloud.features, centered])
    mean = point_features.mean(axis=0)
    peak = point_features.max(axis=0)
    cov_diag = ((point_features - mean) ** 2).mean(axis=0)
    return Embedding(point_features, np.concatenate([mean, peak, cov_diag]), category)


@dataclass
class DecoderOutput:
    translation_residual: np.ndarray
    axes: AxisPrediction
    scale_residual: np.ndarray


def _softplus(x: float) -> float:
    return math.log1p(math.exp(-abs(x))) + max(x, 0.0)


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass
class LinearDecoderModel:
    """Affine heads over a whitened pooled feature vector.

    Raw outputs split into translation residual (3), x-axis (3), x-confidence
    (1), z-axis (3), z-confidence (1), and scale residual (3): 14 values, so
    the learned parameter count is 14 * (in_dim + 1). ``feature_mean`` and
    ``feature_transform`` hold training-set whitening statistics (a fixed
    linear reparameterization, fitted once, not touched by gradient descent).
    Axis heads add a canonical (1,0,0)/(0,0,1) bias before unit
    normalization; confidence heads map through softplus. Zero parameters
    therefore decode to zero residuals, canonical axes, and confidence
    softplus(0).
    """

    weight: np.ndarray
    bias: np.ndarray
    feature_mean: np.ndarray
    feature_transform: np.ndarray

    @classmethod
    def zeros(cls, in_dim: int = DECODER_INPUT_DIM) -> "LinearDecoderModel":
        return cls(
            weight=np.zeros((DECODER_OUTPUT_DIM, in_dim)),
            bias=np.zeros(DECODER_OUTPUT_DIM),
            feature_mean=np.zeros(in_dim),
            feature_transform=np.eye(in_dim),
        )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    def transformed(self, pooled: np.ndarray) -> np.ndarray:
        lifted = lift_pooled(pooled)
        if lifted.shape != (self.in_dim,):
            raise WidthMismatchError(
                f"lifted feature has width {lifted.shape}, model expects ({self.in_dim},)"
            )
        return self.feature_transform @ (lifted - self.feature_mean)

    def raw_outputs(self, pooled: np.ndarray) -> np.ndarray:
        return self.weight @ self.transformed(pooled) + self.bias

    def save(self, path, seed: int = 0, config_digest: str = ""):
        header = {
            "shapes": {
                "weight": list(self.weight.shape),
                "bias": list(self.bias.shape),
                "feature_mean": list(self.feature_mean.shape),
                "feature_transform": list(self.feature_transform.shape),
            },
            "seed": int(seed),
            "config_hash": config_digest,
        }
        blob = json.dumps(header, sort_keys=True).encode()
        flat = np.concatenate(
            [self.weight.ravel(), self.bias, self.feature_mean, self.feature_transform.ravel()]
        ).astype("<f4")
        with open(path, "wb") as fh:
            fh.write(len(blob).to_bytes(4, "little"))
            fh.write(blob)
            fh.write(flat.tobytes())

    @classmethod
    def load(cls, path) -> "LinearDecoderModel":
        with open(path, "rb") as fh:
            header_len = int.from_bytes(fh.read(4), "little")
            header = json.loads(fh.read(header_len).decode())
            flat = np.frombuffer(fh.read(), dtype="<f4").astype(np.float64)
        shapes = header["shapes"]
        sizes = [
            int(np.prod(shapes[k]))
            for k in ("weight", "bias", "feature_mean", "feature_transform")
        ]
        parts = np.split(flat, np.cumsum(sizes)[:-1])
        return cls(
            weight=parts[0].reshape(shapes["weight"]),
            bias=parts[1],
            feature_mean=parts[2],
            feature_transform=parts[3].reshape(shapes["feature_transform"]),
        )


def decode(model: LinearDecoderModel, embedding: Embedding) -> DecoderOutput:
    """Deterministic forward pass from pooled features to decoder outputs."""
    y = model.raw_outputs(embedding.pooled)
    vx = y[3:6] + _AXIS_X_INIT
    vz = y[7:10] + _AXIS_Z_INIT
    return DecoderOutput(
        translation_residual=y[0:3],
        axes=AxisPrediction(
            axis_x=vx, conf_x=_softplus(y[6]),
            axis_z=vz, conf_z=_softplus(y[10]),
        ),
        scale_residual=y[11:14],
    )


def decoder_parameter_gradients(model: LinearDecoderModel, embedding: Embedding,
                                loss_grads: dict):
    """Chain loss gradients on the decoded quantities back to (weight, bias).

    ``loss_grads`` follows the LossReport gradient keys; translation and
    scale gradients pass straight through the residual heads, axis gradients
    go through unit normalization, and confidence gradients through the
    softplus derivative.
    """
    y = model.raw_outputs(embedding.pooled)
    g_y = np.zeros(DECODER_OUTPUT_DIM)
    g_y[0:3] = loss_grads["translation"]
    g_y[11:14] = loss_grads["scale"]

    for sl, conf_idx, init, axis_key, conf_key in (
        (slice(3, 6), 6, _AXIS_X_INIT, "axis_x", "conf_x"),
        (slice(7, 10), 10, _AXIS_Z_INIT, "axis_z", "conf_z"),
    ):
        v = y[sl] + init
        norm = np.linalg.norm(v)
        unit = v / norm
        g_axis = np.asarray(loss_grads[axis_key])
        g_y[sl] = (g_axis - (unit @ g_axis) * unit) / norm
        g_y[conf_idx] = loss_grads[conf_key] * _sigmoid(y[conf_idx])

    x = model.transformed(embedding.pooled)
    return np.outer(g_y, x), g_y


@dataclass
class TrainingSample:
    """One instance prepared for decoder training."""

    pooled: np.ndarray
    translation_prior: np.ndarray
    scale_prior: np.ndarray
    target: PoseTarget
    symmetry: SymmetryClass
    category: CategoryLabel

    def embedding_stub(self) -> Embedding:
        # Training only needs the pooled vector; wrap it so decode() applies.
        return _PooledEmbedding(self.pooled, self.category)


class _PooledEmbedding:
    def __init__(self, pooled: np.ndarray, category: CategoryLabel):
        self._pooled = np.asarray(pooled, dtype=np.float64)
        self.category = category

    @property
    def pooled(self) -> np.ndarray:
        return self._pooled


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 20.0
    epochs: int = 2000
    lr_decay: float = 0.998      # multiplicative per-epoch decay
    seed: int = 0
    init_scale: float = 0.0      # stddev of optional random weight init

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.__dict__, sort_keys=True).encode()).hexdigest()[:16]


def sample_prediction(model: LinearDecoderModel, sample: TrainingSample) -> PosePrediction:
    out = decode(model, sample.embedding_stub())
    return PosePrediction(
        translation=sample.translation_prior + out.translation_residual,
        axis_x=out.axes.axis_x,
        conf_x=out.axes.conf_x,
        axis_z=out.axes.axis_z,
        conf_z=out.axes.conf_z,
        scale=sample.scale_prior + out.scale_residual,
    )


def train_reference(model: LinearDecoderModel, samples, config: TrainConfig,
                    loss_config: LossConfig = LossConfig()):
    """Full-batch gradient descent on the pose loss; returns (model, history).

    Deterministic for a fixed config seed: samples are visited in order and
    gradients are averaged with a fixed reduction order. ``history`` holds
    one mean LossReport per epoch. Raises DivergedLoss if the total stops
    being finite.
    """
    if not samples:
        raise ValueError("training requires at least one sample")
    weight = model.weight.copy()
    bias = model.bias.copy()
    feature_mean = model.feature_mean.copy()
    feature_transform = model.feature_transform.copy()

    # A model that still carries the identity feature transform gets a ZCA
    # whitener fitted from the training features (keeps full-batch gradient
    # descent well conditioned); a loaded checkpoint keeps its own.
    if not feature_mean.any() and np.array_equal(feature_transform, np.eye(model.in_dim)):
        features = np.stack([lift_pooled(s.pooled) for s in samples])
        feature_mean = features.mean(axis=0)
        centered = features - feature_mean
        cov = centered.T @ centered / len(samples)
        # Shrinking toward the diagonal bounds how hard the whitener can
        # amplify cross-feature constraint directions that inputs off the
        # training manifold would excite.
        cov = (1.0 - _WHITEN_SHRINKAGE) * cov + _WHITEN_SHRINKAGE * np.diag(np.diag(cov))
        eigval, eigvec = np.linalg.eigh(cov)
        floor = max(float(eigval.max()), 1e-12) * _WHITEN_FLOOR
        feature_transform = eigvec @ np.diag(1.0 / np.sqrt(eigval + floor)) @ eigvec.T

    if config.init_scale > 0 and not weight.any():
        rng = np.random.Generator(np.random.PCG64(config.seed))
        weight = rng.normal(0.0, config.init_scale, size=weight.shape)
    model = LinearDecoderModel(
        weight=weight,
        bias=bias,
        feature_mean=feature_mean,
        feature_transform=feature_transform,
    )

    lr = config.learning_rate
    history = []
    for _ in range(config.epochs):
        grad_w = np.zeros_like(model.weight)
        grad_b = np.zeros_like(model.bias)
        epoch = LossReport()
        for sample in samples:
            try:
                pred = sample_prediction(model, sample)
            except ValueError as exc:
                raise DivergedLossError(f"non-finite decode during training: {exc}") from exc
            report = total_pose_loss(pred, sample.target, sample.symmetry, loss_config)
            gw, gb = decoder_parameter_gradients(
                model, sample.embedding_stub(), report.gradients
            )
            grad_w += gw
            grad_b += gb
            epoch.total += report.total
            epoch.translation_term += report.translation_term
            epoch.axis_x_term += report.axis_x_term
            epoch.axis_z_term += report.axis_z_term
            epoch.angular_term += report.angular_term
            epoch.conf_x_term += report.conf_x_term
            epoch.conf_z_term += report.conf_z_term
            epoch.scale_term += report.scale_term
        n = len(samples)
        for name in ("total", "translation_term", "axis_x_term", "axis_z_term",
                     "angular_term", "conf_x_term", "conf_z_term", "scale_term"):
            setattr(epoch, name, getattr(epoch, name) / n)
        if not math.isfinite(epoch.total):
            raise DivergedLossError(f"loss became {epoch.total}")
        history.append(epoch)
        model.weight = model.weight - lr * grad_w / n
        model.bias = model.bias - lr * grad_b / n
        if not (np.all(np.isfinite(model.weight)) and np.all(np.isfinite(model.bias))):
            raise DivergedLossError("parameters became non-finite")
        lr *= config.lr_decay
    return model, history
