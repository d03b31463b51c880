"""Deterministic synthetic transparent-scene generator.

Scenes are analytic: every object is a parameterized solid (elliptic
cylinder, bowl shell, box, or stemmed cup) ray-cast per pixel against a
tilted background plane, so ground-truth depth, normals, masks, poses, and
scales are exact. A corruption model then emulates the failure of consumer
depth sensors on transparency: dropout, offset noise, a smooth warp, and
background bleed at the silhouette, all confined to the transparency mask.

Determinism contract: everything derives from numpy PCG64 streams seeded
from (master seed, frame index) via SeedSequence, so a frame is a pure
function of (config, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .camera import DepthMap, Intrinsics, NormalMap, pixel_directions
from .errors import PlacementFailureError
from .pose_core import (
    CategoryLabel,
    DEFAULT_CATEGORY_SYMMETRY,
    Pose,
    SymmetryClass,
    check_scale,
)

_HIT_EPS = 1e-9
_NO_HIT = np.inf

PRIMITIVE_SYMMETRY = {
    "cylinder": SymmetryClass.axial(),
    "bowl": SymmetryClass.axial(),
    "stemmed": SymmetryClass.axial(),
    "box": SymmetryClass.planar(),
}


@dataclass(frozen=True)
class ObjectTemplate:
    """A parameterized stand-in for one CAD model."""

    name: str
    category: str
    primitive: str          # cylinder | bowl | box | stemmed
    nominal_extents: tuple  # full extents (x, y, z), meters
    jitter: float = 0.10    # relative uniform extent jitter, per axis

    def __post_init__(self):
        if self.primitive not in PRIMITIVE_SYMMETRY:
            raise ValueError(f"unknown primitive {self.primitive!r}")
        check_scale(np.asarray(self.nominal_extents))
        if not 0 <= self.jitter < 1:
            raise ValueError("jitter must be a fraction in [0, 1)")

    @property
    def symmetry(self) -> SymmetryClass:
        return PRIMITIVE_SYMMETRY[self.primitive]


def default_template_library() -> list:
    """Two size variants per category; symmetry follows the primitive."""
    specs = [
        ("bottle_small", "bottle", "cylinder", (0.065, 0.065, 0.22)),
        ("bottle_large", "bottle", "cylinder", (0.085, 0.085, 0.30)),
        ("bowl_small", "bowl", "bowl", (0.15, 0.15, 0.065)),
        ("bowl_large", "bowl", "bowl", (0.20, 0.20, 0.085)),
        ("container_small", "container", "box", (0.15, 0.11, 0.09)),
        ("container_large", "container", "box", (0.21, 0.15, 0.12)),
        ("plate", "tableware", "box", (0.21, 0.21, 0.03)),
        ("tray", "tableware", "box", (0.26, 0.17, 0.035)),
        ("water_cup_small", "water cup", "cylinder", (0.075, 0.075, 0.10)),
        ("water_cup_large", "water cup", "cylinder", (0.09, 0.09, 0.13)),
        ("wine_cup_tall", "wine cup", "stemmed", (0.075, 0.075, 0.19)),
        ("wine_cup_short", "wine cup", "stemmed", (0.085, 0.085, 0.16)),
    ]
    return [ObjectTemplate(*spec) for spec in specs]


@dataclass(frozen=True)
class CorruptionModel:
    """Depth-failure model applied inside the transparency mask."""

    dropout: float = 0.35
    offset_sigma: float = 0.02        # meters
    warp_amplitude: float = 0.015     # meters
    warp_wavelength: float = 90.0     # pixels
    bleed_radius: int = 2             # pixels

    def __post_init__(self):
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must be a probability")
        if self.offset_sigma < 0 or self.warp_amplitude < 0 or self.bleed_radius < 0:
            raise ValueError("noise magnitudes must be non-negative")


@dataclass(frozen=True)
class SceneConfig:
    """Everything generate_scene needs besides the seed.

    ``orientation`` is either "random" (uniform over rotations) or "upright"
    (object z-axis within ``max_tilt`` radians of the camera up direction
    with a uniform spin, the tabletop situation).
    """

    intrinsics: Intrinsics
    min_instances: int = 1
    max_instances: int = 4
    depth_range: tuple = (0.7, 1.5)
    background_depth: float = 2.0       # plane depth along the optical axis
    background_tilt: float = 0.12       # plane normal xy components
    margin: int = 24                    # pixels kept clear of the image border
    max_attempts: int = 200
    orientation: str = "random"
    max_tilt: float = 0.6               # radians, upright mode only
    templates: tuple = field(default_factory=lambda: tuple(default_template_library()))
    corruption: CorruptionModel = field(default_factory=CorruptionModel)

    def __post_init__(self):
        if not 0 <= self.min_instances <= self.max_instances:
            raise ValueError("need 0 <= min_instances <= max_instances")
        if self.max_instances > 8:
            raise ValueError("at most 8 instances per frame")
        if self.orientation not in ("random", "upright"):
            raise ValueError(f"orientation must be random|upright, got {self.orientation!r}")


@dataclass
class InstanceAnnotation:
    instance_id: int
    category: CategoryLabel
    symmetry: SymmetryClass
    pose: Pose
    scale: np.ndarray
    bbox: tuple          # (u0, v0, u1, v1)
    template: str = ""

    def to_json(self) -> dict:
        return {
            "id": self.instance_id,
            "category": self.category.name,
            "symmetry": self.symmetry.to_json(),
            "pose": self.pose.matrix().tolist(),
            "scale": [float(x) for x in self.scale],
            "bbox": [int(x) for x in self.bbox],
            "template": self.template,
        }

    @classmethod
    def from_json(cls, data: dict) -> "InstanceAnnotation":
        return cls(
            instance_id=int(data["id"]),
            category=CategoryLabel.from_name(data["category"]),
            symmetry=SymmetryClass.from_json(data["symmetry"]),
            pose=Pose.from_matrix(np.asarray(data["pose"])),
            scale=np.asarray(data["scale"], dtype=np.float64),
            bbox=tuple(data["bbox"]),
            template=data.get("template", ""),
        )


@dataclass
class SceneFrame:
    """One synthetic RGB-D frame with full ground truth."""

    rgb: np.ndarray                 # (H, W, 3) float in [0, 1]
    gt_depth: DepthMap
    corrupted_depth: DepthMap
    gt_normals: NormalMap
    instance_ids: np.ndarray        # (H, W) int, 0 = background
    annotations: list
    intrinsics: Intrinsics
    seed: int

    @property
    def transparency_mask(self) -> np.ndarray:
        return self.instance_ids > 0

    def instance_mask(self, instance_id: int) -> np.ndarray:
        return self.instance_ids == instance_id


# ---------------------------------------------------------------------------
# Analytic primitives. Each intersector works in the object frame and returns
# (t, normal): the z-depth parameter of the first hit along each unnormalized
# ray direction (inf where missed) and the outward surface normal there.
# ---------------------------------------------------------------------------


def _first_hit(candidates):
    """Select, per ray, the nearest among candidate (t, normal, valid) hits."""
    best_t = None
    best_n = None
    for t, normal, valid in candidates:
        t = np.where(valid & (t > _HIT_EPS), t, _NO_HIT)
        if best_t is None:
            best_t = t
            best_n = normal.copy()
        else:
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            best_n[closer] = normal[closer]
    return best_t, best_n


def _cylinder_hits(origin, dirs, extents, radius_scale=1.0, z_range=(-0.5, 0.5)):
    """Hit candidates for an elliptic cylinder spanning z_range * extents_z."""
    ax, ay = extents[0] / 2.0 * radius_scale, extents[1] / 2.0 * radius_scale
    z0, z1 = z_range[0] * extents[2], z_range[1] * extents[2]
    ox, oy, oz = origin
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]

    sx, sy = ox / ax, oy / ay
    vx, vy = dx / ax, dy / ay
    a = vx**2 + vy**2
    b = 2.0 * (sx * vx + sy * vy)
    c = sx**2 + sy**2 - 1.0
    disc = b**2 - 4.0 * a * c
    has_root = (disc >= 0.0) & (a > 0.0)
    sq = np.sqrt(np.where(has_root, disc, 0.0))
    safe_a = np.where(a > 0.0, a, 1.0)

    out = []
    for sign in (-1.0, 1.0):
        t = (-b + sign * sq) / (2.0 * safe_a)
        z = oz + t * dz
        valid = has_root & (z >= z0) & (z <= z1)
        hit_x = ox + t * dx
        hit_y = oy + t * dy
        normal = np.zeros_like(dirs)
        normal[:, 0] = hit_x / ax**2
        normal[:, 1] = hit_y / ay**2
        norms = np.linalg.norm(normal, axis=1)
        normal /= np.where(norms > 0, norms, 1.0)[:, None]
        out.append((t, normal, valid))

    for z_plane, nz in ((z0, -1.0), (z1, 1.0)):
        safe_dz = np.where(dz != 0.0, dz, 1.0)
        t = (z_plane - oz) / safe_dz
        hx = (ox + t * dx) / ax
        hy = (oy + t * dy) / ay
        valid = (dz != 0.0) & (hx**2 + hy**2 <= 1.0)
        normal = np.zeros_like(dirs)
        normal[:, 2] = nz
        out.append((t, normal, valid))
    return out


def _ellipsoid_roots(origin, dirs, center, semiaxes):
    rel = (origin - center) / semiaxes
    v = dirs / semiaxes
    a = np.einsum("ij,ij->i", v, v)
    b = 2.0 * v @ rel
    c = float(rel @ rel) - 1.0
    disc = b**2 - 4.0 * a * c
    has_root = disc >= 0.0
    sq = np.sqrt(np.where(has_root, disc, 0.0))
    t_near = (-b - sq) / (2.0 * a)
    t_far = (-b + sq) / (2.0 * a)
    return t_near, t_far, has_root


def _ellipsoid_normal(origin, dirs, t, center, semiaxes, outward=True):
    hit = origin[None, :] + t[:, None] * dirs
    normal = (hit - center) / semiaxes**2
    norms = np.linalg.norm(normal, axis=1)
    normal /= np.where(norms > 0, norms, 1.0)[:, None]
    return normal if outward else -normal


def _inside_ellipsoid(origin, dirs, t, center, semiaxes):
    hit = origin[None, :] + t[:, None] * dirs
    rel = (hit - center) / semiaxes
    return np.einsum("ij,ij->i", rel, rel)


_BOWL_SHELL_RATIO = 0.8  # inner/outer semiaxis ratio of the shell


def _bowl_hits(origin, dirs, extents):
    """Bowl: half-ellipsoid shell opening toward +z with a flat rim annulus.

    The outer surface is the lower half of an ellipsoid centered at the rim
    plane z = extents_z / 2 with semiaxes (sx/2, sy/2, sz); the inner surface
    is the same shape shrunk by the shell ratio.
    """
    center = np.array([0.0, 0.0, extents[2] / 2.0])
    outer = np.array([extents[0] / 2.0, extents[1] / 2.0, extents[2]])
    inner = outer * _BOWL_SHELL_RATIO
    rim_z = center[2]
    oz, dz = origin[2], dirs[:, 2]

    out = []
    t_near_o, t_far_o, ok_o = _ellipsoid_roots(origin, dirs, center, outer)
    t_near_i, t_far_i, ok_i = _ellipsoid_roots(origin, dirs, center, inner)

    for t in (t_near_o, t_far_o):
        z = oz + t * dz
        q_in = _inside_ellipsoid(origin, dirs, t, center, inner)
        valid = ok_o & (z <= rim_z) & (q_in >= 1.0)
        out.append((t, _ellipsoid_normal(origin, dirs, t, center, outer), valid))
    for t in (t_near_i, t_far_i):
        z = oz + t * dz
        q_out = _inside_ellipsoid(origin, dirs, t, center, outer)
        valid = ok_i & (z <= rim_z) & (q_out <= 1.0)
        out.append((t, _ellipsoid_normal(origin, dirs, t, center, inner, outward=False), valid))

    safe_dz = np.where(dz != 0.0, dz, 1.0)
    t = (rim_z - oz) / safe_dz
    q_out = _inside_ellipsoid(origin, dirs, t, center, outer)
    q_in = _inside_ellipsoid(origin, dirs, t, center, inner)
    valid = (dz != 0.0) & (q_out <= 1.0) & (q_in >= 1.0)
    normal = np.zeros_like(dirs)
    normal[:, 2] = 1.0
    out.append((t, normal, valid))
    return out


def _box_hits(origin, dirs, extents):
    half = np.asarray(extents) / 2.0
    out = []
    for axis in range(3):
        o, d = origin[axis], dirs[:, axis]
        others = [k for k in range(3) if k != axis]
        safe_d = np.where(d != 0.0, d, 1.0)
        for sign in (-1.0, 1.0):
            t = (sign * half[axis] - o) / safe_d
            inside = d != 0.0
            for k in others:
                coord = origin[k] + t * dirs[:, k]
                inside = inside & (np.abs(coord) <= half[k])
            normal = np.zeros_like(dirs)
            normal[:, axis] = sign
            out.append((t, normal, inside))
    return out


# Stemmed cup: coaxial base disk, stem, and cup body; fractions of extents.
_STEM_PARTS = (
    (0.62, (-0.50, -0.44)),  # base disk
    (0.14, (-0.44, 0.00)),   # stem
    (1.00, (0.00, 0.50)),    # cup body
)


def _stemmed_hits(origin, dirs, extents):
    out = []
    for radius_scale, z_range in _STEM_PARTS:
        out.extend(_cylinder_hits(origin, dirs, extents, radius_scale, z_range))
    return out


_PRIMITIVE_INTERSECTORS = {
    "cylinder": _cylinder_hits,
    "bowl": _bowl_hits,
    "box": _box_hits,
    "stemmed": _stemmed_hits,
}


def intersect_primitive(primitive: str, pose: Pose, scale, dirs: np.ndarray):
    """First-hit z-depth and camera-frame normals for rays K^-1 p (z = 1).

    Because ray directions keep z = 1, the ray parameter of a hit is its
    z-depth directly. Returns (t, normals) with t = inf where the ray misses.
    """
    origin = pose.rotation.T @ (-pose.translation)
    dirs_obj = dirs @ pose.rotation
    candidates = _PRIMITIVE_INTERSECTORS[primitive](origin, dirs_obj, np.asarray(scale))
    t, normal_obj = _first_hit(candidates)
    return t, normal_obj @ pose.rotation.T


def _random_rotation(rng) -> np.ndarray:
    quat = rng.normal(size=4)
    quat /= np.linalg.norm(quat)
    w, x, y, z = quat
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


_CAMERA_UP = np.array([0.0, -1.0, 0.0])  # image v points down, so up is -y


def _upright_rotation(rng, max_tilt: float) -> np.ndarray:
    """Object z uniform on the spherical cap of half-angle max_tilt around up."""
    cos_t = rng.uniform(math.cos(max_tilt), 1.0)
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t**2))
    azimuth = rng.uniform(0.0, 2.0 * math.pi)
    # cap sample around +z, then re-seat around the camera up direction
    local = np.array([sin_t * math.cos(azimuth), sin_t * math.sin(azimuth), cos_t])
    seat = np.column_stack(
        [np.array([1.0, 0.0, 0.0]), np.cross(_CAMERA_UP, [1.0, 0.0, 0.0]), _CAMERA_UP]
    )
    a_z = seat @ local
    spin = rng.uniform(0.0, 2.0 * math.pi)
    reference = np.array([0.0, 0.0, 1.0]) if abs(a_z[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    a_x = np.cross(reference, a_z)
    a_x /= np.linalg.norm(a_x)
    a_y = np.cross(a_z, a_x)
    base = np.column_stack([a_x, a_y, a_z])
    c, s = math.cos(spin), math.sin(spin)
    return base @ np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _sample_rotation(rng, config) -> np.ndarray:
    if config.orientation == "upright":
        return _upright_rotation(rng, config.max_tilt)
    return _random_rotation(rng)


def _background_plane(config: SceneConfig):
    normal = np.array([config.background_tilt, config.background_tilt / 2.0, -1.0])
    normal /= np.linalg.norm(normal)
    point = np.array([0.0, 0.0, config.background_depth])
    return normal, point


def smooth_field(shape, amplitude: float, wavelength: float, rng) -> np.ndarray:
    """Deterministic low-frequency field: a sum of three random-phase waves."""
    h, w = shape
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.zeros(shape)
    for _ in range(3):
        angle = rng.uniform(0, 2 * math.pi)
        lam = wavelength * rng.uniform(0.6, 1.6)
        phase = rng.uniform(0, 2 * math.pi)
        out += np.sin(2 * math.pi * (u * math.cos(angle) + v * math.sin(angle)) / lam + phase)
    return amplitude * out / 3.0


def _place_instances(config: SceneConfig, rng):
    intr = config.intrinsics
    count = int(rng.integers(config.min_instances, config.max_instances + 1))
    placed = []
    attempts = 0
    while len(placed) < count:
        if attempts >= config.max_attempts:
            raise PlacementFailureError(
                f"placed {len(placed)}/{count} instances in {config.max_attempts} attempts"
            )
        attempts += 1
        template = config.templates[rng.integers(len(config.templates))]
        extents = np.asarray(template.nominal_extents) * (
            1.0 + rng.uniform(-template.jitter, template.jitter, size=3)
        )
        rotation = _sample_rotation(rng, config)
        z = rng.uniform(*config.depth_range)
        radius = float(np.linalg.norm(extents)) / 2.0
        pix_radius = max(intr.fx, intr.fy) * radius / z
        lo_u = config.margin + pix_radius
        hi_u = intr.width - config.margin - pix_radius
        lo_v = config.margin + pix_radius
        hi_v = intr.height - config.margin - pix_radius
        if lo_u >= hi_u or lo_v >= hi_v:
            continue
        u = rng.uniform(lo_u, hi_u)
        v = rng.uniform(lo_v, hi_v)
        translation = np.array(
            [(u - intr.cx) / intr.fx * z, (v - intr.cy) / intr.fy * z, z]
        )

        plane_normal, plane_point = _background_plane(config)
        if float(plane_normal @ (translation - plane_point)) < radius:
            continue
        ok = True
        for other in placed:
            if np.linalg.norm(translation - other["translation"]) < 1.05 * (radius + other["radius"]):
                ok = False
                break
            du, dv = u - other["u"], v - other["v"]
            if math.hypot(du, dv) < 1.05 * (pix_radius + other["pix_radius"]):
                ok = False
                break
        if not ok:
            continue
        placed.append(
            {
                "template": template,
                "extents": extents,
                "pose": Pose(rotation, translation),
                "radius": radius,
                "pix_radius": pix_radius,
                "translation": translation,
                "u": u,
                "v": v,
            }
        )
    return placed


def render_instances(config: SceneConfig, placements):
    """Depth-buffer the placed solids against the background plane.

    Returns (depth values, normals, instance ids); analytic everywhere.
    """
    intr = config.intrinsics
    h, w = intr.height, intr.width
    dirs = pixel_directions(intr).reshape(-1, 3)

    plane_normal, plane_point = _background_plane(config)
    denom = dirs @ plane_normal
    depth = np.full(h * w, float(plane_normal @ plane_point)) / denom
    normals = np.tile(plane_normal, (h * w, 1))
    ids = np.zeros(h * w, dtype=np.int32)

    for index, item in enumerate(placements, start=1):
        center_u = int(round(item["u"]))
        center_v = int(round(item["v"]))
        reach = int(math.ceil(item["pix_radius"])) + 2
        u0, u1 = max(0, center_u - reach), min(w, center_u + reach + 1)
        v0, v1 = max(0, center_v - reach), min(h, center_v + reach + 1)
        window = (
            np.arange(v0, v1)[:, None] * w + np.arange(u0, u1)[None, :]
        ).ravel()
        t, n = intersect_primitive(
            item["template"].primitive, item["pose"], item["extents"], dirs[window]
        )
        closer = t < depth[window]
        sub = window[closer]
        depth[sub] = t[closer]
        normals[sub] = n[closer]
        ids[sub] = index

    return depth.reshape(h, w), normals.reshape(h, w, 3), ids.reshape(h, w)


def corrupt_depth(frame: SceneFrame, model: CorruptionModel, seed: int) -> DepthMap:
    """Sensor-failure simulation inside the transparency mask.

    Order of operations: background bleed at the silhouette band, smooth
    low-frequency warp, per-pixel Gaussian offsets, then dropout to invalid.
    Pixels outside the mask are untouched. Deterministic per seed.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0xC0DE])))
    mask = frame.transparency_mask
    values = frame.gt_depth.values.copy()
    valid = frame.gt_depth.mask.copy()
    if not mask.any():
        return DepthMap(values, valid)

    if model.bleed_radius > 0:
        dist, (near_r, near_c) = ndimage.distance_transform_edt(mask, return_indices=True)
        band = mask & (dist <= model.bleed_radius)
        values[band] = frame.gt_depth.values[near_r[band], near_c[band]]

    if model.warp_amplitude > 0:
        warp = smooth_field(mask.shape, model.warp_amplitude, model.warp_wavelength, rng)
        values[mask] += warp[mask]

    if model.offset_sigma > 0:
        noise = rng.normal(0.0, model.offset_sigma, size=int(mask.sum()))
        values[mask] += noise

    if model.dropout > 0:
        drop = rng.random(int(mask.sum())) < model.dropout
        rows, cols = np.nonzero(mask)
        valid[rows[drop], cols[drop]] = False
        values[rows[drop], cols[drop]] = 0.0

    values[mask] = np.where(valid[mask], np.maximum(values[mask], 1e-3), values[mask])
    return DepthMap(values, valid)


def _shade_rgb(config: SceneConfig, ids: np.ndarray, rng) -> np.ndarray:
    h, w = ids.shape
    top = rng.uniform(0.25, 0.55, size=3)
    bottom = rng.uniform(0.45, 0.75, size=3)
    ramp = np.linspace(0.0, 1.0, h)[:, None, None]
    rgb = top[None, None, :] * (1 - ramp) + bottom[None, None, :] * ramp
    rgb = np.broadcast_to(rgb, (h, w, 3)).copy()
    for index in range(1, ids.max() + 1):
        albedo = rng.uniform(0.2, 0.95, size=3)
        rgb[ids == index] = albedo
    return rgb


def generate_scene(config: SceneConfig, seed: int) -> SceneFrame:
    """Render one deterministic frame: place, ray-cast, shade, corrupt."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    placements = _place_instances(config, rng)
    depth_values, normal_values, ids = render_instances(config, placements)

    annotations = []
    kept_ids = np.zeros_like(ids)
    next_id = 0
    for index, item in enumerate(placements, start=1):
        pixels = ids == index
        if not pixels.any():
            continue
        next_id += 1
        kept_ids[pixels] = next_id
        rows = np.any(pixels, axis=1)
        cols = np.any(pixels, axis=0)
        v0, v1 = np.flatnonzero(rows)[[0, -1]]
        u0, u1 = np.flatnonzero(cols)[[0, -1]]
        template = item["template"]
        annotations.append(
            InstanceAnnotation(
                instance_id=next_id,
                category=CategoryLabel.from_name(template.category),
                symmetry=template.symmetry,
                pose=item["pose"],
                scale=item["extents"],
                bbox=(int(u0), int(v0), int(u1) + 1, int(v1) + 1),
                template=template.name,
            )
        )

    gt_depth = DepthMap(depth_values, np.ones_like(kept_ids, dtype=bool))
    gt_normals = NormalMap(normal_values, np.ones_like(kept_ids, dtype=bool))
    rgb = _shade_rgb(config, kept_ids, rng)

    frame = SceneFrame(
        rgb=rgb,
        gt_depth=gt_depth,
        corrupted_depth=gt_depth.copy(),
        gt_normals=gt_normals,
        instance_ids=kept_ids,
        annotations=annotations,
        intrinsics=config.intrinsics,
        seed=seed,
    )
    frame.corrupted_depth = corrupt_depth(frame, config.corruption, seed)
    return frame


def frame_seed(master_seed: int, frame_index: int) -> int:
    """Stable per-frame seed derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, frame_index]).generate_state(1)[0])
