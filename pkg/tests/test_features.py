import numpy as np
import pytest

from glasspose.camera import DepthMap, NormalMap
from glasspose.errors import EmptyMaskError, ShapeMismatchError
from glasspose.features import (
    DEPTH_COLUMN,
    GeneralizedPointCloud,
    NORMAL_COLUMNS,
    PatchBundle,
    assemble_features,
    mask_bbox,
    sample_points,
)
from glasspose.pose_core import CategoryLabel


def toy_bundle(h=16, w=16, normal_shape=None):
    rng = np.random.default_rng(0)
    nh, nw = normal_shape or (h, w)
    normals = rng.normal(size=(nh, nw, 3))
    normals /= np.linalg.norm(normals, axis=2, keepdims=True)
    grid_v, grid_u = np.mgrid[0:h, 0:w]
    return PatchBundle(
        bbox=(0, 0, w, h),
        rgb=rng.random((h, w, 3)),
        raw_depth=DepthMap(np.full((h, w), 1.5), np.ones((h, w), bool)),
        completed_depth=DepthMap(1.0 + rng.random((h, w)), np.ones((h, w), bool)),
        normals=NormalMap(normals, np.ones((nh, nw), bool)),
        rays=rng.normal(size=(h, w, 3)),
        instance_mask=np.ones((h, w), bool),
        transparency_mask=np.ones((h, w), bool),
        category=CategoryLabel.from_name("bottle"),
        u_map=grid_u,
        v_map=grid_v,
    )


class TestAssembleFeatures:
    def test_output_shape(self):
        patch = assemble_features(toy_bundle(256, 256))
        assert patch.shape == (256, 256, 10)

    def test_normal_channels_identical(self):
        bundle = toy_bundle()
        patch = assemble_features(bundle)
        np.testing.assert_array_equal(patch[..., NORMAL_COLUMNS], bundle.normals.vectors)

    def test_channel_order(self):
        bundle = toy_bundle()
        patch = assemble_features(bundle)
        np.testing.assert_array_equal(patch[..., 0:3], bundle.rgb)
        np.testing.assert_array_equal(patch[..., DEPTH_COLUMN], bundle.completed_depth.values)
        np.testing.assert_array_equal(patch[..., 7:10], bundle.rays)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            assemble_features(toy_bundle(16, 16, normal_shape=(8, 16)))


class TestSamplePoints:
    def test_large_mask_distinct_pixels(self):
        rng = np.random.default_rng(1)
        patch = rng.random((80, 80, 10))
        mask = np.zeros((80, 80), bool)
        mask.reshape(-1)[:5000] = True
        cloud = sample_points(patch, mask, 1024, seed=7)
        assert len(cloud) == 1024
        assert len({tuple(p) for p in cloud.pixels}) == 1024  # without replacement

    def test_tiny_mask_with_replacement(self):
        rng = np.random.default_rng(2)
        patch = rng.random((8, 8, 10))
        mask = np.zeros((8, 8), bool)
        mask.reshape(-1)[:10] = True
        cloud = sample_points(patch, mask, 1024, seed=7)
        assert len(cloud) == 1024
        seen = {tuple(p) for p in cloud.pixels}
        assert seen <= {(float(u), float(v)) for v in range(8) for u in range(8)}
        # 1024 draws over 10 pixels: each appears with overwhelming probability
        assert len(seen) == 10

    def test_empty_mask(self):
        with pytest.raises(EmptyMaskError):
            sample_points(np.zeros((4, 4, 10)), np.zeros((4, 4), bool), 8, seed=0)

    def test_rows_lie_in_mask(self):
        rng = np.random.default_rng(3)
        patch = rng.random((30, 30, 10))
        mask = rng.random((30, 30)) < 0.2
        mask[0, 0] = True
        cloud = sample_points(patch, mask, 256, seed=5)
        for u, v in cloud.pixels:
            assert mask[int(v), int(u)]

    def test_seed_determinism(self):
        rng = np.random.default_rng(4)
        patch = rng.random((30, 30, 10))
        mask = np.ones((30, 30), bool)
        a = sample_points(patch, mask, 100, seed=99)
        b = sample_points(patch, mask, 100, seed=99)
        np.testing.assert_array_equal(a.pixels, b.pixels)
        np.testing.assert_array_equal(a.features, b.features)
        c = sample_points(patch, mask, 100, seed=100)
        assert not np.array_equal(a.pixels, c.pixels)

    def test_sampling_uniformity(self):
        # counts over many seeds stay within 3 sigma of the multinomial law
        patch = np.zeros((5, 4, 10))
        mask = np.ones((5, 4), bool)
        draws_per_seed = 5
        seeds = 2000
        counts = np.zeros(20)
        for seed in range(seeds):
            cloud = sample_points(patch, mask, draws_per_seed, seed=seed)
            for u, v in cloud.pixels:
                counts[int(v) * 4 + int(u)] += 1
        total = seeds * draws_per_seed
        expected = total / 20
        sigma = np.sqrt(total * (1 / 20) * (19 / 20))
        assert np.abs(counts - expected).max() < 3 * sigma

    def test_source_coordinate_maps(self):
        patch = np.zeros((4, 4, 10))
        mask = np.ones((4, 4), bool)
        u_map = 100 + np.arange(16).reshape(4, 4)
        v_map = 200 + np.arange(16).reshape(4, 4)
        cloud = sample_points(patch, mask, 8, seed=1, u_map=u_map, v_map=v_map)
        assert cloud.pixels[:, 0].min() >= 100
        assert cloud.pixels[:, 1].min() >= 200


class TestCloudHelpers:
    def test_points_3d_uses_depth_over_ray_z(self):
        features = np.zeros((2, 10))
        features[:, DEPTH_COLUMN] = [2.0, 3.0]
        features[0, 7:10] = [0.0, 0.0, 1.0]
        features[1, 7:10] = [0.6, 0.0, 0.8]
        cloud = GeneralizedPointCloud(features, np.zeros((2, 2)))
        points = cloud.points_3d()
        np.testing.assert_allclose(points[0], [0, 0, 2.0])
        np.testing.assert_allclose(points[1], [2.25, 0, 3.0])

    def test_csv_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        cloud = GeneralizedPointCloud(rng.random((40, 10)), rng.integers(0, 100, (40, 2)))
        path = tmp_path / "cloud.csv"
        cloud.to_csv(path)
        again = GeneralizedPointCloud.from_csv(path)
        np.testing.assert_array_equal(again.features, cloud.features)
        np.testing.assert_array_equal(again.pixels, cloud.pixels)

    def test_mask_bbox(self):
        mask = np.zeros((10, 12), bool)
        mask[3:6, 4:9] = True
        assert mask_bbox(mask) == (4, 3, 9, 6)
        with pytest.raises(EmptyMaskError):
            mask_bbox(np.zeros((4, 4), bool))
