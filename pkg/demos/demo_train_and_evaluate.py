"""End-to-end miniature run: generate a dataset, overfit the reference
decoder on it with oracle first-stage inputs, and evaluate.

Equivalent CLI session:

    glasspose --seed 7 generate ds --count 8
    glasspose --seed 7 train-ref ds decoder.ckpt
    glasspose --seed 7 predict ds pred.jsonl   # with checkpoint configured
    glasspose --seed 7 evaluate ds pred.jsonl report
"""

import dataclasses
import tempfile
from pathlib import Path

from glasspose.config import HarnessConfig, SceneSettings
from glasspose.dataset_io import load_dataset, write_dataset
from glasspose.estimators import LinearDecoderModel, train_reference
from glasspose.pipeline import build_training_samples, evaluate_records, predict_frame
from glasspose.synth import frame_seed, generate_scene

config = dataclasses.replace(
    HarnessConfig.default(),
    scene=SceneSettings(min_instances=1, max_instances=2, orientation="upright"),
)
scene_config = config.scene_config()

work = Path(tempfile.mkdtemp(prefix="glasspose_demo_"))
frames = [generate_scene(scene_config, frame_seed(7, i)) for i in range(8)]
write_dataset(frames, work, scene_config.templates, master_seed=7)
reader = load_dataset(work)
print(f"wrote {len(reader)} frames to {work}")

samples = build_training_samples(reader, config, seed=7)
print(f"training the linear decoder on {len(samples)} instances...")
model, history = train_reference(LinearDecoderModel.zeros(), samples, config.training, config.loss)
print(f"loss {history[0].total:.2e} -> {history[-1].total:.2e} "
      f"over {len(history)} epochs")

records = []
for index in range(len(reader)):
    frame = reader.load_frame(index)
    frame_records, skipped = predict_frame(
        frame, index, model, reader.priors, config, seed=7
    )
    records.extend(frame_records)

report = evaluate_records(reader, records)
print("\nmean metrics after overfitting (oracle depth and normals):")
for column in ("3d_25", "3d_50", "5deg5cm", "10deg5cm", "2cm", "5cm"):
    print(f"  {column:>8}: {report.mean[column]:6.1f}")
