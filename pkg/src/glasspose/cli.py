"""Command-line harness.

Subcommands: ``generate``, ``predict``, ``evaluate``, ``gradcheck``,
``train-ref``. Exit codes: 0 success, 1 usage, 2 I/O, 3 check failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import HarnessConfig
from .dataset_io import load_dataset, write_dataset
from .errors import (
    DivergedLossError,
    IoFailureError,
    PlacementFailureError,
    SchemaMismatchError,
)
from .estimators import LinearDecoderModel, train_reference
from .gradcheck import run_gradcheck
from .metrics import METRIC_COLUMNS
from .pipeline import (
    build_training_samples,
    evaluate_records,
    predict_frame,
    read_predictions,
    write_predictions,
)
from .synth import frame_seed, generate_scene

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_CHECK = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _load_config(args) -> HarnessConfig:
    if args.config:
        return HarnessConfig.load(args.config)
    return HarnessConfig.default()


def _load_model(config: HarnessConfig) -> LinearDecoderModel:
    if config.estimators.checkpoint:
        return LinearDecoderModel.load(config.estimators.checkpoint)
    return LinearDecoderModel.zeros()


def cmd_generate(args) -> int:
    config = _load_config(args)
    scene_config = config.scene_config()
    frames = (
        generate_scene(scene_config, frame_seed(args.seed, i)) for i in range(args.count)
    )
    manifest = write_dataset(
        frames, args.out_dir, scene_config.templates,
        master_seed=args.seed, intrinsics=config.intrinsics,
    )
    print(manifest)
    return EXIT_OK


def _predict_one_frame(payload):
    directory, index, config_json, checkpoint, seed, dump = payload
    config = HarnessConfig.from_json(config_json)
    reader = load_dataset(directory)
    model = LinearDecoderModel.load(checkpoint) if checkpoint else LinearDecoderModel.zeros()
    frame = reader.load_frame(index)
    dump_dir = Path(dump) if dump else None
    records, skipped = predict_frame(
        frame, index, model, reader.priors, config, seed, dump_dir=dump_dir
    )
    return records, skipped


def cmd_predict(args) -> int:
    config = _load_config(args)
    reader = load_dataset(args.dataset_dir)
    model = _load_model(config)
    dump_dir = None
    if args.dump_intermediate:
        dump_dir = Path(args.dataset_dir) / "dumps"
        dump_dir.mkdir(exist_ok=True)

    all_records = []
    all_skipped = []
    if args.jobs > 1:
        payloads = [
            (
                str(args.dataset_dir), index, config.to_json(),
                config.estimators.checkpoint, args.seed,
                str(dump_dir) if dump_dir else "",
            )
            for index in range(len(reader))
        ]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for records, skipped in pool.map(_predict_one_frame, payloads):
                all_records.extend(records)
                all_skipped.extend(skipped)
    else:
        for index in range(len(reader)):
            frame = reader.load_frame(index)
            records, skipped = predict_frame(
                frame, index, model, reader.priors, config, args.seed, dump_dir=dump_dir
            )
            all_records.extend(records)
            all_skipped.extend(skipped)

    write_predictions(all_records, args.out_file)
    for frame_index, instance_id in all_skipped:
        print(
            f"warning: skipped frame {frame_index} instance {instance_id} (empty mask)",
            file=sys.stderr,
        )
    print(args.out_file)
    return EXIT_OK


def _write_reports(report, path_base: Path, formats):
    if "csv" in formats:
        report.to_csv(path_base.with_suffix(".csv"))
    if "markdown" in formats:
        path_base.with_suffix(".md").write_text(report.to_markdown())


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    reader = load_dataset(args.dataset_dir)
    base = Path(args.report_path)
    base.parent.mkdir(parents=True, exist_ok=True)

    if args.condition_grid:
        return _condition_grid(args, config, base)

    records = read_predictions(args.predictions)
    if not records:
        print("warning: no prediction records; all metrics are 0", file=sys.stderr)
    report = evaluate_records(reader, records, config.symmetry_aware_metrics)
    _write_reports(report, base, ("csv", "markdown"))
    if args.dumps:
        from .pipeline import depth_normal_reports

        depth_report, normal_report = depth_normal_reports(reader, args.dumps, config)
        stem = base.with_suffix("")
        _write_reports(depth_report, Path(f"{stem}_depth"), ("csv", "markdown"))
        if normal_report is not None:
            _write_reports(normal_report, Path(f"{stem}_normals"), ("csv", "markdown"))
    print(base.with_suffix(".csv"))
    return EXIT_OK


def _condition_grid(args, config: HarnessConfig, base: Path) -> int:
    """Depth/normal quality grid: one decoder trained on oracle inputs, then
    evaluated under every input-quality condition.

    Holding the decoder fixed isolates the pipeline's sensitivity to
    first-stage quality; retraining per condition would let the decoder
    re-weight away from the degraded modality.
    """
    import dataclasses

    conditions = [
        ("GT/GT", "oracle", "oracle"),
        ("GT/EST", "oracle", "noisy"),
        ("EST/GT", "noisy", "oracle"),
        ("EST/EST", "noisy", "noisy"),
    ]
    reader = load_dataset(args.dataset_dir)
    clean = dataclasses.replace(
        config,
        estimators=dataclasses.replace(
            config.estimators, depth="oracle", normals="oracle", checkpoint=""
        ),
    )
    samples = build_training_samples(reader, clean, args.seed)
    model, _ = train_reference(LinearDecoderModel.zeros(), samples, clean.training, clean.loss)

    rows = []
    for label, depth_mode, normal_mode in conditions:
        cond = dataclasses.replace(
            clean,
            estimators=dataclasses.replace(
                clean.estimators, depth=depth_mode, normals=normal_mode
            ),
        )
        records = []
        for index in range(len(reader)):
            frame = reader.load_frame(index)
            frame_records, _ = predict_frame(
                frame, index, model, reader.priors, cond, args.seed
            )
            records.extend(frame_records)
        report = evaluate_records(reader, records, cond.symmetry_aware_metrics)
        rows.append((label, report.mean))
        print(f"{label}: 5deg5cm={report.mean['5deg5cm']:.1f} 2cm={report.mean['2cm']:.1f}")

    grid_csv = base.with_suffix(".grid.csv")
    with open(grid_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition"] + list(METRIC_COLUMNS))
        for label, mean in rows:
            writer.writerow([label] + [f"{mean[c]:.4f}" for c in METRIC_COLUMNS])
    lines = ["| condition | " + " | ".join(METRIC_COLUMNS) + " |",
             "|---" * (len(METRIC_COLUMNS) + 1) + "|"]
    for label, mean in rows:
        lines.append("| " + label + " | " + " | ".join(f"{mean[c]:.2f}" for c in METRIC_COLUMNS) + " |")
    base.with_suffix(".grid.md").write_text("\n".join(lines) + "\n")
    print(grid_csv)
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    start = time.perf_counter()
    results = run_gradcheck(seed=args.seed, trials=args.trials)
    all_ok = True
    for name, worst, ok in results:
        all_ok &= ok
        print(f"{'PASS' if ok else 'FAIL'} {name}: max relative error {worst:.3e}")
    print(f"gradcheck finished in {time.perf_counter() - start:.2f}s")
    return EXIT_OK if all_ok else EXIT_CHECK


def cmd_train_ref(args) -> int:
    config = _load_config(args)
    reader = load_dataset(args.dataset_dir)
    samples = build_training_samples(reader, config, args.seed)
    model, history = train_reference(
        LinearDecoderModel.zeros(), samples, config.training, config.loss
    )
    model.save(args.out_checkpoint, seed=config.training.seed, config_digest=config.digest())

    curve_path = Path(args.out_checkpoint).with_suffix(".losses.csv")
    with open(curve_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["epoch", "total", "translation", "axis_x", "axis_z",
             "angular", "conf_x", "conf_z", "scale"]
        )
        for epoch, report in enumerate(history):
            writer.writerow(
                [epoch] + [
                    f"{value:.8e}" for value in (
                        report.total, report.translation_term, report.axis_x_term,
                        report.axis_z_term, report.angular_term, report.conf_x_term,
                        report.conf_z_term, report.scale_term,
                    )
                ]
            )
    print(args.out_checkpoint)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="glasspose", description=__doc__)
    parser.add_argument("--config", default="", help="JSON config file")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel frame workers")
    parser.add_argument("--dump-intermediate", action="store_true",
                        help="write completed depth, normals, and sampled clouds")
    parser.add_argument("--print-config", action="store_true",
                        help="print the full default configuration and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("out_dir")
    p.add_argument("--count", type=int, default=10)

    p = sub.add_parser("predict", help="run the pipeline over a dataset")
    p.add_argument("dataset_dir")
    p.add_argument("out_file")

    p = sub.add_parser("evaluate", help="score predictions against annotations")
    p.add_argument("dataset_dir")
    p.add_argument("predictions", nargs="?", default="")
    p.add_argument("report_path")
    p.add_argument("--condition-grid", action="store_true",
                   help="emit the depth/normal quality grid instead")
    p.add_argument("--dumps", default="",
                   help="dump directory from predict --dump-intermediate; "
                        "adds depth/normal accuracy reports")

    p = sub.add_parser("gradcheck", help="finite-difference checks of all loss gradients")
    p.add_argument("--trials", type=int, default=100)

    p = sub.add_parser("train-ref", help="train the reference decoder")
    p.add_argument("dataset_dir")
    p.add_argument("out_checkpoint")
    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
    "gradcheck": cmd_gradcheck,
    "train-ref": cmd_train_ref,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if args.print_config:
        print(HarnessConfig.default().dumps(), end="")
        return EXIT_OK
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except (IoFailureError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SchemaMismatchError, PlacementFailureError, DivergedLossError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
