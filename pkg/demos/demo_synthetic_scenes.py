"""Walk through the synthetic transparent-scene generator.

Renders one frame, prints what the ground truth contains, applies the sensor
corruption model, and saves the images next to this script.
"""

from pathlib import Path

import numpy as np

from glasspose.config import HarnessConfig
from glasspose.dataset_io import save_depth_png, save_mask_png, save_rgb_png
from glasspose.metrics import depth_metrics
from glasspose.synth import frame_seed, generate_scene

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

config = HarnessConfig.default()
frame = generate_scene(config.scene_config(), frame_seed(2024, 0))

print(f"rendered a {frame.rgb.shape[1]}x{frame.rgb.shape[0]} frame "
      f"with {len(frame.annotations)} transparent instances")
for anno in frame.annotations:
    u0, v0, u1, v1 = anno.bbox
    print(f"  instance {anno.instance_id}: {anno.category.name} "
          f"({anno.symmetry.kind} symmetry), extents {np.round(anno.scale, 3)} m, "
          f"bbox {u1 - u0}x{v1 - v0} px")

# The corruption model only touches pixels under the transparency mask.
mask = frame.transparency_mask
print(f"\ntransparency mask covers {mask.mean():.1%} of the image")
print(f"corrupted-depth validity inside the mask: "
      f"{frame.corrupted_depth.mask[mask].mean():.1%} (dropout!)")

report = depth_metrics(frame.corrupted_depth, frame.gt_depth, mask)
print(f"raw sensor vs truth inside the mask: "
      f"RMSE {report.rmse:.3f} m, MAE {report.mae:.3f} m, "
      f"delta_1.05 {report.delta_1_05:.1f}%")

save_rgb_png(out_dir / "scene_rgb.png", frame.rgb)
save_depth_png(out_dir / "scene_depth_gt.png", frame.gt_depth)
save_depth_png(out_dir / "scene_depth_corrupted.png", frame.corrupted_depth)
save_mask_png(out_dir / "scene_mask.png", frame.instance_ids)
print(f"\nwrote scene_rgb/depth_gt/depth_corrupted/mask PNGs to {out_dir}")
