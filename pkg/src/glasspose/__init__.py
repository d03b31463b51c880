"""Category-level transparent-object pose estimation toolkit.

The package covers the non-neural core of a two-stage pose pipeline for
transparent objects: generalized point cloud construction, pose and scale
decoding, the training loss suite with analytic gradients, symmetry-aware
evaluation metrics, and a deterministic synthetic RGB-D scene generator with
pluggable oracle / noisy / trainable estimators in place of the networks.
"""

from .camera import DepthMap, Intrinsics, NormalMap, backproject, normals_from_depth, ray_direction, ray_map
from .config import HarnessConfig
from .errors import *  # noqa: F401,F403 -- small, curated exception module
from .estimators import (
    Embedding,
    LinearDecoderModel,
    TrainConfig,
    decode,
    noisy_depth_completer,
    noisy_normal_estimator,
    oracle_depth_completer,
    oracle_normal_estimator,
    reference_embedding,
    train_reference,
)
from .features import GeneralizedPointCloud, PatchBundle, assemble_features, sample_points
from .losses import (
    LossConfig,
    LossReport,
    PosePrediction,
    PoseTarget,
    angular_loss,
    axis_loss,
    confidence_loss,
    depth_completion_loss,
    normal_loss,
    scale_loss,
    total_pose_loss,
    translation_loss,
)
from .metrics import (
    OrientedBox,
    PoseInstance,
    depth_metrics,
    normal_metrics,
    oriented_iou,
    pose_metrics,
    rotation_error,
)
from .pose_core import (
    CATEGORY_NAMES,
    CategoryLabel,
    Pose,
    SymmetryClass,
    box_corners,
    rotation_from_axes,
    symmetry_candidates,
)
from .recovery import (
    AxisPrediction,
    CategoryPriors,
    apply_scale_residual,
    apply_translation_residual,
    orthogonalize_axes,
    translation_prior,
    umeyama_fit,
)
from .synth import CorruptionModel, ObjectTemplate, SceneConfig, SceneFrame, corrupt_depth, generate_scene

__version__ = "0.1.0"
