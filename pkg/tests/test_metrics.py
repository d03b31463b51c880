import math

import numpy as np
import pytest

from glasspose.camera import DepthMap, NormalMap
from glasspose.errors import EmptyMaskError, LengthMismatchError
from glasspose.metrics import (
    PoseInstance,
    depth_metrics,
    intersection_volume,
    normal_metrics,
    oriented_iou,
    pose_metrics,
    rotation_error,
)
from glasspose.pose_core import (
    CategoryLabel,
    OrientedBox,
    Pose,
    SymmetryClass,
    box_corners,
    rotation_z,
)
from glasspose.synth import _random_rotation


def random_box(rng, spread=0.3):
    return OrientedBox(
        Pose(_random_rotation(rng), rng.uniform(-spread, spread, 3)),
        rng.uniform(0.2, 0.9, 3),
    )


def monte_carlo_iou(a, b, rng, samples=1_000_000):
    pts = np.vstack([box_corners(a), box_corners(b)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    draw = rng.uniform(lo, hi, size=(samples, 3))

    def inside(box):
        local = (draw - box.pose.translation) @ box.pose.rotation
        return np.all(np.abs(local) <= box.scale / 2.0, axis=1)

    in_a, in_b = inside(a), inside(b)
    union = (in_a | in_b).sum()
    return (in_a & in_b).sum() / union if union else 0.0


class TestOrientedIou:
    def test_identical(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            box = random_box(rng)
            assert oriented_iou(box, box) == pytest.approx(1.0, abs=1e-9)

    def test_offset_unit_cubes(self):
        a = OrientedBox(Pose.identity(), np.ones(3))
        b = OrientedBox(Pose(np.eye(3), np.array([0.5, 0, 0])), np.ones(3))
        assert oriented_iou(a, b) == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_disjoint(self):
        a = OrientedBox(Pose.identity(), np.ones(3))
        b = OrientedBox(Pose(np.eye(3), np.array([3.0, 0, 0])), np.ones(3))
        assert oriented_iou(a, b) == 0.0

    def test_contained_box(self):
        outer = OrientedBox(Pose.identity(), np.array([2.0, 2.0, 2.0]))
        inner = OrientedBox(Pose(rotation_z(0.4), np.zeros(3)), np.array([0.5, 0.5, 0.5]))
        assert oriented_iou(outer, inner) == pytest.approx(0.5**3 / 2.0**3, abs=1e-9)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            a, b = random_box(rng), random_box(rng)
            assert oriented_iou(a, b) == pytest.approx(oriented_iou(b, a), abs=1e-9)

    def test_rigid_invariance(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b = random_box(rng), random_box(rng)
            rot = _random_rotation(rng)
            shift = rng.normal(size=3)
            moved_a = OrientedBox(
                Pose(rot @ a.pose.rotation, rot @ a.pose.translation + shift), a.scale
            )
            moved_b = OrientedBox(
                Pose(rot @ b.pose.rotation, rot @ b.pose.translation + shift), b.scale
            )
            assert oriented_iou(moved_a, moved_b) == pytest.approx(
                oriented_iou(a, b), abs=1e-9
            )

    def test_monte_carlo_agreement_small(self):
        rng = np.random.default_rng(3)
        for _ in range(8):
            a, b = random_box(rng), random_box(rng)
            exact = oriented_iou(a, b)
            estimate = monte_carlo_iou(a, b, rng, samples=200_000)
            assert exact == pytest.approx(estimate, abs=0.01)

    def test_intersection_volume_identity(self):
        box = OrientedBox(Pose.identity(), np.array([0.4, 0.6, 0.8]))
        assert intersection_volume(box, box) == pytest.approx(box.volume, rel=1e-12)


class TestRotationError:
    def test_zero_for_equal(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            rot = _random_rotation(rng)
            assert rotation_error(rot, rot) == pytest.approx(0.0, abs=1e-6)

    def test_known_angle(self):
        assert rotation_error(rotation_z(math.radians(30)), np.eye(3)) == pytest.approx(
            30.0, abs=1e-9
        )

    def test_planar_flip_is_zero(self):
        rot = _random_rotation(np.random.default_rng(5))
        flipped = rot @ rotation_z(math.pi)
        assert rotation_error(flipped, rot, SymmetryClass.planar()) == pytest.approx(
            0.0, abs=1e-6
        )

    def test_axial_ignores_spin(self):
        assert rotation_error(
            rotation_z(math.radians(30)), np.eye(3), SymmetryClass.axial()
        ) == pytest.approx(0.0, abs=1e-9)

    def test_symmetric_metric_properties(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            a, b, c = (_random_rotation(rng) for _ in range(3))
            ab = rotation_error(a, b)
            assert ab == pytest.approx(rotation_error(b, a), abs=1e-9)
            assert ab <= rotation_error(a, c) + rotation_error(c, b) + 1e-9


def make_instance(rot, trans, scale=(0.2, 0.2, 0.2), category="bottle", symmetry=None):
    return PoseInstance(
        CategoryLabel.from_name(category),
        Pose(rot, np.asarray(trans, dtype=float)),
        np.asarray(scale, dtype=float),
        symmetry or SymmetryClass.none(),
    )


class TestPoseMetrics:
    def test_perfect_predictions(self):
        rng = np.random.default_rng(7)
        truth = [
            make_instance(_random_rotation(rng), rng.normal(size=3), category=cat)
            for cat in ("bottle", "bowl", "container")
        ]
        report = pose_metrics(list(truth), truth)
        assert all(v == 100.0 for v in report.mean.values())

    def test_four_degree_one_cm_counts(self):
        truth = [make_instance(np.eye(3), [0, 0, 1.0])]
        pred = [make_instance(rotation_z(math.radians(4)), [0.01, 0, 1.0])]
        report = pose_metrics(pred, truth)
        assert report.mean["5deg2cm"] == 100.0

    def test_seven_degree_fails_five(self):
        truth = [make_instance(np.eye(3), [0, 0, 1.0])]
        pred = [make_instance(rotation_z(math.radians(7)), [0, 0, 1.0])]
        report = pose_metrics(pred, truth)
        assert report.mean["5deg"] == 0.0
        assert report.mean["10deg"] == 100.0

    def test_missing_prediction_scores_zero(self):
        truth = [make_instance(np.eye(3), [0, 0, 1.0]) for _ in range(2)]
        report = pose_metrics([truth[0], None], truth)
        assert report.mean["10deg10cm"] == 50.0

    def test_length_mismatch(self):
        truth = [make_instance(np.eye(3), [0, 0, 1.0])]
        with pytest.raises(LengthMismatchError):
            pose_metrics([], truth)

    def test_mean_over_categories(self):
        truth = [
            make_instance(np.eye(3), [0, 0, 1.0], category="bottle"),
            make_instance(np.eye(3), [0, 0, 1.0], category="bottle"),
            make_instance(np.eye(3), [0, 0, 1.0], category="bowl"),
        ]
        preds = [truth[0], None, truth[2]]
        report = pose_metrics(preds, truth)
        assert report.per_category["bottle"]["10deg10cm"] == 50.0
        assert report.per_category["bowl"]["10deg10cm"] == 100.0
        assert report.mean["10deg10cm"] == 75.0  # category-balanced mean

    def test_report_serialization(self, tmp_path):
        truth = [make_instance(np.eye(3), [0, 0, 1.0])]
        report = pose_metrics(list(truth), truth)
        report.to_csv(tmp_path / "pose.csv")
        text = (tmp_path / "pose.csv").read_text()
        assert "3d_25" in text and "bottle" in text
        markdown = report.to_markdown()
        assert markdown.startswith("| category |")


class TestDepthMetrics:
    def grid(self, values):
        values = np.asarray(values, dtype=float)
        return DepthMap(values, np.ones_like(values, dtype=bool))

    def test_perfect(self):
        depth = self.grid([[1.0, 2.0], [3.0, 4.0]])
        report = depth_metrics(depth, depth.copy(), np.ones((2, 2), bool))
        assert report.rmse == report.mae == report.rel == 0.0
        assert report.delta_1_05 == report.delta_1_10 == report.delta_1_25 == 100.0

    def test_ratio_thresholds(self):
        pred = self.grid([[1.0, 1.0]])
        gt = self.grid([[1.04, 1.30]])
        report = depth_metrics(pred, gt, np.ones((1, 2), bool))
        assert report.delta_1_05 == 50.0

    def test_strict_inequality_at_exact_ratio(self):
        pred = self.grid([[2.0]])
        gt = self.grid([[2.2]])
        report = depth_metrics(pred, gt, np.ones((1, 1), bool))
        assert report.mae == pytest.approx(0.2)
        assert report.rel == pytest.approx(0.2 / 2.2)
        assert report.delta_1_10 == 0.0  # ratio 1.1 is not < 1.1
        assert report.delta_1_25 == 100.0

    def test_empty_mask(self):
        depth = self.grid([[1.0]])
        with pytest.raises(EmptyMaskError):
            depth_metrics(depth, depth, np.zeros((1, 1), bool))


class TestNormalMetrics:
    def rotated_map(self, degrees, shape=(4, 4)):
        base = np.zeros(shape + (3,))
        base[..., 2] = 1.0
        tilted = np.zeros_like(base)
        tilted[..., 0] = math.sin(math.radians(degrees))
        tilted[..., 2] = math.cos(math.radians(degrees))
        mask = np.ones(shape, bool)
        return NormalMap(base, mask), NormalMap(tilted, mask)

    def test_perfect(self):
        pred, _ = self.rotated_map(0.0)
        report = normal_metrics(pred, pred.copy(), np.ones((4, 4), bool))
        assert report.mae == report.rmse == 0.0
        assert report.pct_11_25 == report.pct_22_5 == report.pct_30 == 100.0

    def test_twenty_degrees(self):
        pred, gt = self.rotated_map(20.0)
        report = normal_metrics(pred, gt, np.ones((4, 4), bool))
        assert report.mae == pytest.approx(math.radians(20.0), abs=1e-9)
        assert report.pct_11_25 == 0.0
        assert report.pct_22_5 == 100.0

    def test_half_and_half(self):
        base, five = self.rotated_map(5.0, shape=(2, 2))
        _, twenty_five = self.rotated_map(25.0, shape=(2, 2))
        pred = NormalMap(
            np.vstack([five.vectors, twenty_five.vectors]), np.ones((4, 2), bool)
        )
        gt = NormalMap(np.vstack([base.vectors, base.vectors]), np.ones((4, 2), bool))
        report = normal_metrics(pred, gt, np.ones((4, 2), bool))
        assert report.pct_11_25 == 50.0
        assert report.pct_30 == 100.0
