"""On-disk dataset layout and file codecs.

Per dataset directory: ``intrinsics.json``, ``priors.json``, ``manifest.json``
and per frame ``rgb_%06d.png``, ``depth_%06d.png`` (corrupted),
``depth_gt_%06d.png``, ``normal_%06d.f32`` (+ ``normal_%06d.json`` sidecar),
``mask_%06d.png`` (instance id per pixel, 0 = background) and
``anno_%06d.json``.

Depth PNGs are 16-bit grayscale, value = millimeters, 0 = invalid. Normal
files are raw little-endian float32, H * W * 3 values, row-major and
channel-interleaved; invalid pixels are stored as zero vectors.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .camera import DepthMap, Intrinsics, NormalMap
from .errors import IoFailureError, SchemaMismatchError
from .recovery import CategoryPriors
from .synth import InstanceAnnotation, SceneFrame

DEPTH_UNIT = 0.001  # meters per stored integer


def save_depth_png(path, depth: DepthMap):
    mm = np.zeros(depth.shape, dtype=np.uint16)
    mm[depth.mask] = np.clip(np.round(depth.values[depth.mask] / DEPTH_UNIT), 1, 65535)
    try:
        Image.fromarray(mm).save(path)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def load_depth_png(path) -> DepthMap:
    try:
        mm = np.asarray(Image.open(path), dtype=np.uint16)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    return DepthMap(mm.astype(np.float64) * DEPTH_UNIT, mm > 0)


def save_rgb_png(path, rgb: np.ndarray):
    data = np.clip(np.round(np.asarray(rgb) * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(data).save(path)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def load_rgb_png(path) -> np.ndarray:
    try:
        return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def save_mask_png(path, ids: np.ndarray):
    try:
        Image.fromarray(np.asarray(ids, dtype=np.uint8)).save(path)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def load_mask_png(path) -> np.ndarray:
    try:
        return np.asarray(Image.open(path), dtype=np.int32)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def save_normals_f32(path, normals: NormalMap):
    data = np.where(normals.mask[..., None], normals.vectors, 0.0).astype("<f4")
    sidecar = {
        "height": int(normals.shape[0]),
        "width": int(normals.shape[1]),
        "channels": 3,
        "dtype": "float32",
        "layout": "row-major, channel-interleaved, little-endian",
    }
    try:
        data.tofile(path)
        with open(str(path).rsplit(".", 1)[0] + ".json", "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc


def load_normals_f32(path) -> NormalMap:
    sidecar_path = str(path).rsplit(".", 1)[0] + ".json"
    try:
        with open(sidecar_path) as fh:
            sidecar = json.load(fh)
        data = np.fromfile(path, dtype="<f4")
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    h, w = sidecar["height"], sidecar["width"]
    vectors = data.reshape(h, w, 3).astype(np.float64)
    mask = np.any(vectors != 0.0, axis=2)
    return NormalMap(vectors, mask)


def _frame_paths(directory, index: int) -> dict:
    return {
        "rgb": os.path.join(directory, f"rgb_{index:06d}.png"),
        "depth": os.path.join(directory, f"depth_{index:06d}.png"),
        "depth_gt": os.path.join(directory, f"depth_gt_{index:06d}.png"),
        "normal": os.path.join(directory, f"normal_{index:06d}.f32"),
        "mask": os.path.join(directory, f"mask_{index:06d}.png"),
        "anno": os.path.join(directory, f"anno_{index:06d}.json"),
    }


def compute_priors(templates) -> CategoryPriors:
    """Per-category mean of the template library's nominal extents."""
    sums = {}
    for template in templates:
        acc = sums.setdefault(template.category, [])
        acc.append(np.asarray(template.nominal_extents, dtype=np.float64))
    return CategoryPriors({name: np.mean(rows, axis=0) for name, rows in sums.items()})


def write_dataset(frames, directory, templates, master_seed: int = 0,
                  intrinsics: Intrinsics = None) -> str:
    """Write frames plus intrinsics/priors/manifest; returns the manifest path.

    ``intrinsics`` is only consulted for empty datasets; otherwise the frames
    carry it.
    """
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc

    manifest = {"frame_count": 0, "master_seed": int(master_seed), "frames": []}
    for index, frame in enumerate(frames):
        intrinsics = frame.intrinsics
        paths = _frame_paths(directory, index)
        save_rgb_png(paths["rgb"], frame.rgb)
        save_depth_png(paths["depth"], frame.corrupted_depth)
        save_depth_png(paths["depth_gt"], frame.gt_depth)
        save_normals_f32(paths["normal"], frame.gt_normals)
        save_mask_png(paths["mask"], frame.instance_ids)
        anno = {
            "seed": int(frame.seed),
            "instances": [a.to_json() for a in frame.annotations],
        }
        try:
            with open(paths["anno"], "w") as fh:
                json.dump(anno, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoFailureError(str(exc)) from exc
        manifest["frames"].append({"index": index, "seed": int(frame.seed)})
        manifest["frame_count"] += 1

    if intrinsics is not None:
        with open(os.path.join(directory, "intrinsics.json"), "w") as fh:
            json.dump(intrinsics.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    compute_priors(templates).save(os.path.join(directory, "priors.json"))

    manifest_path = os.path.join(directory, "manifest.json")
    try:
        with open(manifest_path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    return manifest_path


@dataclass
class DatasetReader:
    """Lazy access to a written dataset."""

    directory: str
    manifest: dict
    intrinsics: Intrinsics
    priors: CategoryPriors

    def __len__(self) -> int:
        return self.manifest["frame_count"]

    def load_frame(self, index: int) -> SceneFrame:
        paths = _frame_paths(self.directory, index)
        try:
            with open(paths["anno"]) as fh:
                anno = json.load(fh)
        except OSError as exc:
            raise IoFailureError(str(exc)) from exc
        if "instances" not in anno:
            raise SchemaMismatchError(f"{paths['anno']} lacks an instances list")
        return SceneFrame(
            rgb=load_rgb_png(paths["rgb"]),
            gt_depth=load_depth_png(paths["depth_gt"]),
            corrupted_depth=load_depth_png(paths["depth"]),
            gt_normals=load_normals_f32(paths["normal"]),
            instance_ids=load_mask_png(paths["mask"]),
            annotations=[InstanceAnnotation.from_json(a) for a in anno["instances"]],
            intrinsics=self.intrinsics,
            seed=int(anno.get("seed", 0)),
        )

    def frames(self):
        for index in range(len(self)):
            yield index, self.load_frame(index)


def load_dataset(directory) -> DatasetReader:
    try:
        with open(os.path.join(directory, "manifest.json")) as fh:
            manifest = json.load(fh)
        with open(os.path.join(directory, "intrinsics.json")) as fh:
            intrinsics = Intrinsics.from_json(json.load(fh))
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    priors = CategoryPriors.load(os.path.join(directory, "priors.json"))
    return DatasetReader(str(directory), manifest, intrinsics, priors)
