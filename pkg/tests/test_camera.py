import numpy as np
import pytest

from glasspose.camera import (
    DepthMap,
    Intrinsics,
    backproject,
    normals_from_depth,
    normals_from_depth_vjp,
    pixel_directions,
    ray_direction,
    ray_map,
)
from glasspose.errors import NonPositiveDepthError, OutOfBoundsError

# Wide sensor so the classic fx=fy=500, cx=320, cy=240 examples stay in bounds.
K = Intrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=1000, height=1000)


class TestRayDirection:
    def test_principal_point(self):
        np.testing.assert_allclose(ray_direction(K, 320, 240), [0, 0, 1], atol=1e-15)

    def test_offset_pixel(self):
        # K^-1 p = (1, 0, 1), normalized by hand to (0.70711, 0, 0.70711)
        np.testing.assert_allclose(
            ray_direction(K, 820, 240), [0.7071067811865475, 0, 0.7071067811865475], atol=1e-12
        )

    def test_symmetric_pixel(self):
        np.testing.assert_allclose(
            ray_direction(K, 320, 740), [0, 0.7071067811865475, 0.7071067811865475], atol=1e-12
        )

    def test_out_of_bounds(self):
        with pytest.raises(OutOfBoundsError):
            ray_direction(K, 1000, 240)

    def test_unit_norm_and_positive_z(self):
        rays = ray_map(K)
        np.testing.assert_allclose(np.linalg.norm(rays, axis=2), 1.0, atol=1e-9)
        assert np.all(rays[..., 2] > 0)

    def test_squared_norm_exponent(self):
        rays = ray_map(K, norm_exponent=2.0)
        dirs = pixel_directions(K)
        np.testing.assert_allclose(
            rays, dirs / (np.linalg.norm(dirs, axis=2, keepdims=True) ** 2), atol=1e-12
        )


class TestBackproject:
    def test_principal_point(self):
        np.testing.assert_allclose(backproject(K, 320, 240, 2.0), [0, 0, 2.0], atol=1e-15)

    def test_offset_pixel(self):
        np.testing.assert_allclose(backproject(K, 820, 240, 2.0), [2.0, 0, 2.0], atol=1e-12)

    def test_zero_depth_rejected(self):
        with pytest.raises(NonPositiveDepthError):
            backproject(K, 320, 240, 0.0)

    def test_consistency_with_ray(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            u = rng.uniform(0, K.width - 1)
            v = rng.uniform(0, K.height - 1)
            depth = rng.uniform(0.2, 5.0)
            ray = ray_direction(K, u, v)
            np.testing.assert_allclose(
                backproject(K, u, v, depth), ray * (depth / ray[2]), atol=1e-12
            )


def plane_depth(intr, normal, offset):
    """z-depth of the plane {x : <normal, x> = offset} at every pixel."""
    dirs = pixel_directions(intr)
    return offset / np.einsum("ijk,k->ij", dirs, normal)


SMALL = Intrinsics(fx=120.0, fy=120.0, cx=16.0, cy=12.0, width=32, height=24)


class TestNormalsFromDepth:
    def test_constant_plane_faces_camera(self):
        depth = DepthMap(np.full((24, 32), 2.0), np.ones((24, 32), bool))
        normals = normals_from_depth(SMALL, depth)
        assert normals.mask[1:-1, 1:-1].all()
        np.testing.assert_allclose(
            normals.vectors[5:-5, 5:-5], np.broadcast_to([0, 0, -1.0], (14, 22, 3)), atol=1e-9
        )

    def test_tilted_plane_normal(self):
        # plane z + y = 2  =>  inward normal (0, -1, -1)/sqrt(2)
        normal = np.array([0.0, 1.0, 1.0]) / np.sqrt(2)
        depth = DepthMap(plane_depth(SMALL, normal, 2.0 / np.sqrt(2)), np.ones((24, 32), bool))
        result = normals_from_depth(SMALL, depth)
        interior = result.vectors[2:-2, 2:-2]
        np.testing.assert_allclose(
            interior, np.broadcast_to(-normal, interior.shape), atol=1e-3
        )

    def test_random_planes_recovered(self):
        rng = np.random.default_rng(9)
        for _ in range(25):
            tilt = rng.uniform(-0.5, 0.5, size=2)
            normal = np.array([tilt[0], tilt[1], 1.0])
            normal /= np.linalg.norm(normal)
            offset = rng.uniform(1.0, 3.0)
            depth = DepthMap(plane_depth(SMALL, normal, offset), np.ones((24, 32), bool))
            result = normals_from_depth(SMALL, depth)
            interior = result.vectors[2:-2, 2:-2]
            np.testing.assert_allclose(
                interior, np.broadcast_to(-normal, interior.shape), atol=1e-3
            )

    def test_isolated_pixel_invalid(self):
        mask = np.zeros((24, 32), bool)
        mask[10, 10] = True
        depth = DepthMap(np.where(mask, 2.0, 0.0), mask)
        result = normals_from_depth(SMALL, depth)
        assert not result.mask.any()

    def test_camera_facing_invariant(self):
        rng = np.random.default_rng(4)
        values = 2.0 + 0.3 * rng.random((24, 32))
        depth = DepthMap(values, np.ones((24, 32), bool))
        result = normals_from_depth(SMALL, depth)
        dirs = pixel_directions(SMALL)
        facing = np.einsum("ijk,ijk->ij", result.vectors, dirs)[result.mask]
        assert np.all(facing <= 0)

    def test_vjp_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        h, w = 8, 8
        intr = Intrinsics(fx=100.0, fy=100.0, cx=4.0, cy=4.0, width=8, height=8)
        values = 1.5 + 0.1 * rng.random((h, w))
        depth = DepthMap(values, np.ones((h, w), bool))
        cotangent = rng.normal(size=(h, w, 3))

        def objective(vals):
            nm = normals_from_depth(intr, DepthMap(vals, depth.mask))
            return float(np.sum(nm.vectors[nm.mask] * cotangent[nm.mask]))

        analytic = normals_from_depth_vjp(intr, depth, cotangent)
        step = 1e-6
        fd = np.zeros_like(values)
        for r in range(h):
            for c in range(w):
                bumped = values.copy()
                bumped[r, c] += step
                hi = objective(bumped)
                bumped[r, c] -= 2 * step
                lo = objective(bumped)
                fd[r, c] = (hi - lo) / (2 * step)
        np.testing.assert_allclose(analytic, fd, atol=1e-5 * max(1.0, np.abs(fd).max()))


class TestIntrinsicsValidation:
    def test_principal_point_bounds(self):
        with pytest.raises(ValueError):
            Intrinsics(fx=500.0, fy=500.0, cx=700.0, cy=240.0, width=640, height=480)

    def test_focal_positive(self):
        with pytest.raises(ValueError):
            Intrinsics(fx=-1.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)
