"""Finite-difference verification of every analytic gradient.

Each check draws random configurations (resampling away from L1 tie points
and candidate-switching boundaries), compares the analytic gradient against
central differences with step 1e-6, and reports the worst relative error.
Used by the test suite and the ``gradcheck`` subcommand.
"""

from __future__ import annotations

import numpy as np

from .camera import DepthMap, Intrinsics, NormalMap
from .losses import (
    LossConfig,
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
from .pose_core import SymmetryClass

FD_STEP = 1e-6
TIE_MARGIN = 1e-3
TOLERANCE = 1e-5


def central_difference(func, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Componentwise central finite differences of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        orig = xf[i]
        xf[i] = orig + step
        hi = func(x)
        xf[i] = orig - step
        lo = func(x)
        xf[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, fd: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    scale = max(np.abs(analytic).max(initial=0.0), np.abs(fd).max(initial=0.0), 1e-8)
    return float(np.abs(analytic - fd).max(initial=0.0) / scale)


def _unit(rng, n=3):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def _separated_pair(rng):
    """Two unit vectors whose componentwise differences avoid L1 ties."""
    while True:
        a, b = _unit(rng), _unit(rng)
        if np.all(np.abs(a - b) > TIE_MARGIN) and abs(a @ b) < 0.95:
            return a, b


def _check_translation(rng):
    t_star = rng.normal(size=3)
    t_hat = t_star + rng.choice([-1, 1], size=3) * rng.uniform(TIE_MARGIN, 0.5, size=3)
    _, grad = translation_loss(t_hat, t_star)
    fd = central_difference(lambda x: translation_loss(x, t_star)[0], t_hat)
    return relative_error(grad, fd)


def _check_axis(rng):
    a_hat, a_star = _separated_pair(rng)
    _, grad = axis_loss(a_hat, a_star)
    fd = central_difference(lambda x: axis_loss(x, a_star)[0], a_hat)
    return relative_error(grad, fd)


def _check_angular(rng):
    a_x, a_z = _unit(rng), _unit(rng)
    _, grad_x, grad_z = angular_loss(a_x, a_z)
    fd_x = central_difference(lambda x: angular_loss(x, a_z)[0], a_x)
    fd_z = central_difference(lambda x: angular_loss(a_x, x)[0], a_z)
    return max(relative_error(grad_x, fd_x), relative_error(grad_z, fd_z))


def _check_confidence(rng, alpha=-5.0):
    while True:
        a_hat, a_star = _separated_pair(rng)
        conf = rng.uniform(0.0, 1.2)
        value, grad_c, grad_axis = confidence_loss(conf, a_hat, a_star, alpha)
        if value > TIE_MARGIN:
            break
    fd_c = central_difference(
        lambda c: confidence_loss(float(c[0]), a_hat, a_star, alpha)[0], np.array([conf])
    )
    fd_axis = central_difference(
        lambda x: confidence_loss(conf, x, a_star, alpha)[0], a_hat
    )
    return max(relative_error(np.array([grad_c]), fd_c), relative_error(grad_axis, fd_axis))


def _check_scale(rng):
    s_star = rng.uniform(0.05, 0.4, size=3)
    s_hat = s_star + rng.choice([-1, 1], size=3) * rng.uniform(TIE_MARGIN, 0.05, size=3)
    _, grad = scale_loss(s_hat, s_star)
    fd = central_difference(lambda x: scale_loss(x, s_star)[0], s_hat)
    return relative_error(grad, fd)


def _random_normal_map(rng, h, w):
    vectors = rng.normal(size=(h, w, 3))
    vectors /= np.linalg.norm(vectors, axis=2, keepdims=True)
    return NormalMap(vectors, np.ones((h, w), dtype=bool))


def _check_normal(rng):
    h = w = 5
    pred = _random_normal_map(rng, h, w)
    gt = _random_normal_map(rng, h, w)
    region = rng.random((h, w)) < 0.6
    region[2, 2] = True
    _, grad = normal_loss(pred, gt, region)

    def f(vecs):
        return normal_loss(NormalMap(vecs, pred.mask), gt, region)[0]

    fd = central_difference(f, pred.vectors.copy())
    return relative_error(grad, fd)


def _smooth_depth(rng, h, w):
    v, u = np.mgrid[0:h, 0:w].astype(np.float64)
    un = 2.0 * u / (w - 1) - 1.0
    vn = 2.0 * v / (h - 1) - 1.0
    coeffs = rng.uniform(-0.1, 0.1, size=5)
    values = rng.uniform(1.2, 2.0) + (
        coeffs[0] * un + coeffs[1] * vn + coeffs[2] * un * vn
        + coeffs[3] * un**2 + coeffs[4] * vn**2
    )
    return DepthMap(values, np.ones((h, w), dtype=bool))


def _check_depth_completion(rng):
    h = w = 6
    intr = Intrinsics(fx=100.0, fy=100.0, cx=w / 2, cy=h / 2, width=w, height=h)
    pred = _smooth_depth(rng, h, w)
    gt = _smooth_depth(rng, h, w)
    mask = rng.random((h, w)) < 0.7
    mask[2:4, 2:4] = True
    result = depth_completion_loss(pred, gt, mask, intr, lambda_smooth=0.05)

    def f(values):
        return depth_completion_loss(DepthMap(values, pred.mask), gt, mask, intr, 0.05).total

    fd = central_difference(f, pred.values.copy())
    return relative_error(result.grad, fd)


def _random_pose_case(rng, symmetry: SymmetryClass):
    while True:
        target = PoseTarget(
            translation=rng.normal(size=3),
            axis_x=_unit(rng),
            axis_z=_unit(rng),
            scale=rng.uniform(0.05, 0.4, size=3),
        )
        pred = PosePrediction(
            translation=target.translation + rng.choice([-1, 1], 3) * rng.uniform(TIE_MARGIN, 0.3, 3),
            axis_x=_unit(rng),
            conf_x=rng.uniform(0.05, 1.2),
            axis_z=_unit(rng),
            conf_z=rng.uniform(0.05, 1.2),
            scale=target.scale + rng.choice([-1, 1], 3) * rng.uniform(TIE_MARGIN, 0.05, 3),
        )
        if np.any(np.abs(pred.axis_z - target.axis_z) < TIE_MARGIN):
            continue
        if symmetry.kind == "none" and np.any(np.abs(pred.axis_x - target.axis_x) < TIE_MARGIN):
            continue
        if symmetry.kind == "planar":
            from .pose_core import rotation_about_axis

            losses = [
                axis_loss(pred.axis_x, rotation_about_axis(target.axis_z, ang) @ target.axis_x)[0]
                for ang in symmetry.angles
            ]
            ordered = sorted(losses)
            if ordered[1] - ordered[0] < 10 * TIE_MARGIN:
                continue
            best = rotation_about_axis(
                target.axis_z, symmetry.angles[int(np.argmin(losses))]
            ) @ target.axis_x
            if np.any(np.abs(pred.axis_x - best) < TIE_MARGIN):
                continue
        config = LossConfig()
        report = total_pose_loss(pred, target, symmetry, config)
        if report.conf_x_term > TIE_MARGIN or symmetry.kind == "axial":
            if report.conf_z_term > TIE_MARGIN:
                return pred, target, config


def _check_total_pose(rng):
    kinds = [SymmetryClass.none(), SymmetryClass.axial(), SymmetryClass.planar()]
    symmetry = kinds[int(rng.integers(len(kinds)))]
    pred, target, config = _random_pose_case(rng, symmetry)
    report = total_pose_loss(pred, target, symmetry, config)

    def loss_with(**overrides):
        fields = {
            "translation": pred.translation, "axis_x": pred.axis_x, "conf_x": pred.conf_x,
            "axis_z": pred.axis_z, "conf_z": pred.conf_z, "scale": pred.scale,
        }
        fields.update(overrides)
        return total_pose_loss(PosePrediction(**fields), target, symmetry, config).total

    worst = 0.0
    for key in ("translation", "axis_x", "axis_z", "scale"):
        fd = central_difference(lambda x, k=key: loss_with(**{k: x}), np.array(getattr(pred, key)))
        worst = max(worst, relative_error(report.gradients[key], fd))
    for key in ("conf_x", "conf_z"):
        fd = central_difference(
            lambda c, k=key: loss_with(**{k: float(c[0])}), np.array([getattr(pred, key)])
        )
        worst = max(worst, relative_error(np.array([report.gradients[key]]), fd))
    return worst


CHECKS = (  # index doubles as the per-check RNG stream key
    ("translation_loss", _check_translation),
    ("axis_loss", _check_axis),
    ("angular_loss", _check_angular),
    ("confidence_loss", _check_confidence),
    ("scale_loss", _check_scale),
    ("normal_loss", _check_normal),
    ("depth_completion_loss", _check_depth_completion),
    ("total_pose_loss", _check_total_pose),
)


def run_gradcheck(seed: int = 0, trials: int = 100):
    """Run every check ``trials`` times; returns [(name, worst_rel_err, ok)]."""
    results = []
    for index, (name, check) in enumerate(CHECKS):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
        worst = 0.0
        for _ in range(trials):
            worst = max(worst, check(rng))
        results.append((name, worst, worst < TOLERANCE))
    return results
