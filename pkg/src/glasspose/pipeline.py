"""End-to-end prediction: patches -> completion -> normals -> sampling ->
embedding -> decoding -> pose and scale.

Every random choice derives from (seed, frame index, instance id) through
SeedSequence, so runs are reproducible instance by instance regardless of
execution order.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np

from .camera import ray_map
from .config import HarnessConfig
from .dataset_io import DatasetReader, save_depth_png, save_normals_f32
from .errors import EmptyMaskError, IoFailureError, SchemaMismatchError
from .estimators import (
    LinearDecoderModel,
    TrainingSample,
    decode,
    noisy_depth_completer,
    noisy_normal_estimator,
    oracle_depth_completer,
    oracle_normal_estimator,
    reference_embedding,
)
from .features import build_patch_bundle, sample_points, assemble_features
from .losses import PoseTarget
from .metrics import PoseInstance, PoseMetricsReport, pose_metrics
from .pose_core import Pose, rotation_from_axes
from .recovery import (
    apply_translation_residual,
    orthogonalize_axes,
    translation_prior,
)
from .synth import SceneFrame

_MIN_SCALE = 1e-3  # floor applied to decoded extents before building boxes


@dataclass
class PredictionRecord:
    frame_index: int
    instance_id: int
    category: str
    pose: Pose
    scale: np.ndarray
    seconds: float

    def to_json(self) -> dict:
        return {
            "frame": self.frame_index,
            "instance": self.instance_id,
            "category": self.category,
            "pose": self.pose.matrix().tolist(),
            "scale": [float(x) for x in self.scale],
            "seconds": self.seconds,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PredictionRecord":
        try:
            return cls(
                frame_index=int(data["frame"]),
                instance_id=int(data["instance"]),
                category=str(data["category"]),
                pose=Pose.from_matrix(np.asarray(data["pose"])),
                scale=np.asarray(data["scale"], dtype=np.float64),
                seconds=float(data.get("seconds", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise SchemaMismatchError(f"bad prediction record: {exc}") from exc


def write_predictions(records, path):
    try:
        with open(path, "w") as fh:
            for record in records:
                fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def read_predictions(path):
    records = []
    try:
        with open(path) as fh:
            for line in fh:
                if line.strip():
                    records.append(PredictionRecord.from_json(json.loads(line)))
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    return records


def make_estimators(frame: SceneFrame, config: HarnessConfig, seed: int):
    est = config.estimators
    if est.depth == "oracle":
        completer = oracle_depth_completer(frame)
    else:
        completer = noisy_depth_completer(
            frame, sigma=est.depth_sigma, seed=seed,
            bias_amplitude=est.depth_bias_amplitude,
            bias_wavelength=est.depth_bias_wavelength,
        )
    if est.normals == "oracle":
        normal_est = oracle_normal_estimator(frame)
    else:
        normal_est = noisy_normal_estimator(
            frame, angle_sigma=est.normal_angle_sigma, seed=seed,
            bias_amplitude=est.normal_bias_amplitude,
            bias_wavelength=est.normal_bias_wavelength,
        )
    return completer, normal_est


def instance_seed(master_seed: int, frame_index: int, instance_id: int) -> int:
    return int(
        np.random.SeedSequence([master_seed, frame_index, instance_id]).generate_state(1)[0]
    )


def _instance_bundle(frame: SceneFrame, anno, completer, normal_est, rays, config):
    return build_patch_bundle(
        rgb=frame.rgb,
        raw_depth=frame.corrupted_depth,
        instance_mask=frame.instance_mask(anno.instance_id),
        transparency_mask=frame.transparency_mask,
        rays=rays,
        category=anno.category,
        depth_completer=completer,
        normal_estimator=normal_est,
        patch_size=config.sampler.patch_size,
    )


def _complete_axial_x(axes):
    """Replace the x prediction for axially symmetric instances.

    The x-axis of an axial object is unconstrained (its losses are excluded
    from training), so the decoded value carries no signal; feeding it to the
    confidence-weighted orthogonalization would drag the supervised z-axis.
    A canonical completion orthogonal to the predicted z keeps the
    orthogonalization a no-op on z.
    """
    z = axes.axis_z
    for candidate in (np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])):
        projected = candidate - (candidate @ z) * z
        norm = np.linalg.norm(projected)
        if norm > 1e-6:
            from .recovery import AxisPrediction

            return AxisPrediction(projected / norm, axes.conf_x, z, axes.conf_z)
    raise AssertionError("unreachable: z cannot be parallel to both basis vectors")


def predict_instance(frame: SceneFrame, anno, completer, normal_est, rays,
                     model: LinearDecoderModel, priors, config: HarnessConfig,
                     seed: int, dump_dir=None, frame_index: int = 0):
    """Run the full second stage for one instance; returns a PredictionRecord."""
    start = time.perf_counter()
    bundle = _instance_bundle(frame, anno, completer, normal_est, rays, config)
    patch = assemble_features(bundle)
    cloud = sample_points(
        patch, bundle.sample_mask, config.sampler.point_count,
        instance_seed(seed, frame_index, anno.instance_id),
        u_map=bundle.u_map, v_map=bundle.v_map,
    )
    embedding = reference_embedding(cloud, anno.category)
    output = decode(model, embedding)

    axes = output.axes
    if anno.symmetry.kind == "axial":
        axes = _complete_axial_x(axes)
    axis_x, axis_z = orthogonalize_axes(axes)
    rotation = rotation_from_axes(axis_x, axis_z)
    prior = translation_prior(cloud, frame.intrinsics)
    translation = apply_translation_residual(prior, output.translation_residual)
    scale = np.maximum(priors.get(anno.category) + output.scale_residual, _MIN_SCALE)

    if dump_dir is not None:
        stem = f"{frame_index:06d}_{anno.instance_id:03d}"
        save_depth_png(dump_dir / f"completed_{stem}.png", bundle.completed_depth)
        save_normals_f32(dump_dir / f"normals_{stem}.f32", bundle.normals)
        cloud.to_csv(dump_dir / f"cloud_{stem}.csv")

    return PredictionRecord(
        frame_index=frame_index,
        instance_id=anno.instance_id,
        category=anno.category.name,
        pose=Pose(rotation, translation),
        scale=scale,
        seconds=time.perf_counter() - start,
    )


def predict_frame(frame: SceneFrame, frame_index: int, model, priors,
                  config: HarnessConfig, seed: int, dump_dir=None):
    """Predict every annotated instance; EmptyMask instances are skipped."""
    completer, normal_est = make_estimators(frame, config, seed)
    rays = ray_map(frame.intrinsics, config.sampler.ray_norm_exponent)
    records = []
    skipped = []
    for anno in frame.annotations:
        try:
            records.append(
                predict_instance(
                    frame, anno, completer, normal_est, rays, model, priors,
                    config, seed, dump_dir=dump_dir, frame_index=frame_index,
                )
            )
        except EmptyMaskError:
            skipped.append((frame_index, anno.instance_id))
    return records, skipped


def replay_from_cloud_csv(cloud_csv, category, priors, model, intrinsics):
    """Reproduce a prediction from a dumped point cloud (``--replay-dumps``)."""
    from .features import GeneralizedPointCloud

    cloud = GeneralizedPointCloud.from_csv(cloud_csv)
    embedding = reference_embedding(cloud, category)
    output = decode(model, embedding)
    axis_x, axis_z = orthogonalize_axes(output.axes)
    rotation = rotation_from_axes(axis_x, axis_z)
    translation = apply_translation_residual(
        translation_prior(cloud, intrinsics), output.translation_residual
    )
    scale = np.maximum(priors.get(category) + output.scale_residual, _MIN_SCALE)
    return Pose(rotation, translation), scale


def build_training_samples(reader: DatasetReader, config: HarnessConfig, seed: int):
    """Turn each annotated instance of a dataset into a TrainingSample."""
    samples = []
    for frame_index, frame in reader.frames():
        completer, normal_est = make_estimators(frame, config, seed)
        rays = ray_map(frame.intrinsics, config.sampler.ray_norm_exponent)
        for anno in frame.annotations:
            try:
                bundle = _instance_bundle(frame, anno, completer, normal_est, rays, config)
                patch = assemble_features(bundle)
                cloud = sample_points(
                    patch, bundle.sample_mask, config.sampler.point_count,
                    instance_seed(seed, frame_index, anno.instance_id),
                    u_map=bundle.u_map, v_map=bundle.v_map,
                )
            except EmptyMaskError:
                continue
            embedding = reference_embedding(cloud, anno.category)
            samples.append(
                TrainingSample(
                    pooled=embedding.pooled,
                    translation_prior=translation_prior(cloud, frame.intrinsics),
                    scale_prior=reader.priors.get(anno.category),
                    target=PoseTarget.from_pose_scale(anno.pose, anno.scale),
                    symmetry=anno.symmetry,
                    category=anno.category,
                )
            )
    return samples


def depth_normal_reports(reader: DatasetReader, dumps_dir, config: HarnessConfig):
    """Score dumped first-stage outputs against ground truth.

    Rebuilds each dumped patch's nearest-neighbor source grid from the
    annotation bbox (the patch construction is deterministic), then compares
    the dumped completed depth and normal maps with ground truth inside the
    transparency mask. Returns (DepthMetricsReport, NormalMetricsReport)
    aggregated over every dumped instance.
    """
    from pathlib import Path

    from .camera import DepthMap as _DepthMap, NormalMap as _NormalMap
    from .dataset_io import load_depth_png, load_normals_f32
    from .features import _nearest_indices, mask_bbox
    from .metrics import depth_metrics, normal_metrics

    dumps_dir = Path(dumps_dir)
    pred_depth, gt_depth, depth_mask = [], [], []
    pred_norm, gt_norm, norm_mask = [], [], []
    for path in sorted(dumps_dir.glob("completed_*.png")):
        stem = path.stem.split("_")
        frame_index, instance_id = int(stem[1]), int(stem[2])
        frame = reader.load_frame(frame_index)
        mask = frame.instance_mask(instance_id)
        if not mask.any():
            continue
        u0, v0, u1, v1 = mask_bbox(mask)
        size = config.sampler.patch_size
        rows = v0 + _nearest_indices(v1 - v0, size)
        cols = u0 + _nearest_indices(u1 - u0, size)
        grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")

        completed = load_depth_png(path)
        pred_depth.append(completed.values)
        gt_depth.append(frame.gt_depth.values[grid_r, grid_c])
        depth_mask.append(
            frame.transparency_mask[grid_r, grid_c]
            & completed.mask
            & frame.gt_depth.mask[grid_r, grid_c]
        )

        normal_path = dumps_dir / f"normals_{stem[1]}_{stem[2]}.f32"
        if normal_path.exists():
            normals = load_normals_f32(normal_path)
            pred_norm.append(normals.vectors.reshape(-1, 3))
            gt_norm.append(frame.gt_normals.vectors[grid_r, grid_c].reshape(-1, 3))
            norm_mask.append(
                (frame.transparency_mask[grid_r, grid_c] & normals.mask
                 & frame.gt_normals.mask[grid_r, grid_c]).reshape(-1)
            )

    if not pred_depth:
        raise SchemaMismatchError(f"no completed_*.png dumps under {dumps_dir}")
    depth_report = depth_metrics(
        _DepthMap(np.vstack(pred_depth), np.vstack(depth_mask)),
        _DepthMap(np.vstack(gt_depth), np.vstack(depth_mask)),
        np.vstack(depth_mask),
    )
    normal_report = None
    if pred_norm:
        stack = lambda rows: np.vstack(rows)[None, :, :]  # noqa: E731 - (1, N, 3) maps
        flat_mask = np.concatenate(norm_mask)[None, :]
        normal_report = normal_metrics(
            _NormalMap(stack(pred_norm), flat_mask),
            _NormalMap(stack(gt_norm), flat_mask),
            flat_mask,
        )
    return depth_report, normal_report


def evaluate_records(reader: DatasetReader, records,
                     symmetry_aware: bool = True) -> PoseMetricsReport:
    """Score a prediction file against a dataset's annotations.

    Every annotated instance is scored; instances without a prediction count
    as failures at all thresholds.
    """
    by_key = {(r.frame_index, r.instance_id): r for r in records}
    predictions = []
    ground_truth = []
    for frame_index in range(len(reader)):
        frame = reader.load_frame(frame_index)
        for anno in frame.annotations:
            ground_truth.append(
                PoseInstance(anno.category, anno.pose, anno.scale, anno.symmetry)
            )
            record = by_key.get((frame_index, anno.instance_id))
            if record is None:
                predictions.append(None)
            else:
                predictions.append(PoseInstance(anno.category, record.pose, record.scale))
    return pose_metrics(predictions, ground_truth, symmetry_aware=symmetry_aware)
