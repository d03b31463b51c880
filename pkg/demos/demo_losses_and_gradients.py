"""The training loss suite and its finite-difference verification."""

import numpy as np

from glasspose.gradcheck import run_gradcheck
from glasspose.losses import (
    LossConfig,
    PosePrediction,
    PoseTarget,
    total_pose_loss,
)
from glasspose.pose_core import Pose, SymmetryClass, rotation_z

config = LossConfig()
pose = Pose(rotation_z(0.4), np.array([0.05, -0.02, 1.1]))
target = PoseTarget.from_pose_scale(pose, np.array([0.08, 0.08, 0.22]))

# A deliberately imperfect prediction.
pred = PosePrediction(
    translation=target.translation + np.array([0.01, -0.02, 0.03]),
    axis_x=np.array([0.9, 0.1, 0.0]) / np.linalg.norm([0.9, 0.1, 0.0]),
    conf_x=0.8,
    axis_z=np.array([0.05, 0.02, 1.0]) / np.linalg.norm([0.05, 0.02, 1.0]),
    conf_z=0.9,
    scale=target.scale + np.array([0.01, 0.0, -0.02]),
)

for symmetry in (SymmetryClass.none(), SymmetryClass.axial(), SymmetryClass.planar()):
    report = total_pose_loss(pred, target, symmetry, config)
    print(f"{symmetry.kind:>6}: total {report.total:.6f}  "
          f"(x-axis term {report.axis_x_term:.4f}, z-axis term {report.axis_z_term:.4f}, "
          f"translation {report.translation_term:.4f})")
print("axial symmetry zeroes the x-axis terms; planar takes the candidate minimum\n")

print("finite-difference verification of every analytic gradient (20 trials each):")
for name, worst, ok in run_gradcheck(seed=0, trials=20):
    print(f"  {'PASS' if ok else 'FAIL'} {name:<24} worst relative error {worst:.2e}")
