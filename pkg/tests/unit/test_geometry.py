import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from snowpath.colmap import CameraIntrinsics, CameraModel, Pose
from snowpath.exceptions import (
    DegenerateConfigurationError,
    DegenerateInputError,
    InsufficientCorrespondencesError,
    InsufficientPointsError,
    NonUnitQuaternionError,
    PointAtInfinityError,
)
from snowpath.geometry import (
    Homography,
    PlaneModel,
    RigidTransform,
    apply_homography,
    apply_homography_many,
    camera_center,
    estimate_homography,
    fit_plane_ransac,
    project_to_image,
    quaternion_from_rotation,
    reorientation_for_plane,
    rotation_from_quaternion,
)
from snowpath.synthetic import LEVEL_CAMERA, sparse_scene, true_homography
from tests import small_spec

IDENTITY_POSE = Pose(qvec=(1.0, 0.0, 0.0, 0.0), tvec=(0.0, 0.0, 0.0))
HD_CAMERA = CameraIntrinsics(1, CameraModel.PINHOLE, 1920, 1080, (1000.0, 1000.0, 960.0, 540.0))


def quaternion_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def plane(normal: tuple[float, float, float], offset: float) -> PlaneModel:
    return PlaneModel(normal=normal, offset=offset, inlier_ids=frozenset(), inlier_threshold=0.1)


def test_rotation_from_identity_quaternion() -> None:
    assert rotation_from_quaternion((1.0, 0.0, 0.0, 0.0)) == pytest.approx(np.eye(3))


def test_rotation_from_quaternion_about_x() -> None:
    half = math.sqrt(0.5)
    rotation = rotation_from_quaternion((half, half, 0.0, 0.0))
    assert rotation @ np.array([0.0, 1.0, 0.0]) == pytest.approx([0.0, 0.0, 1.0], abs=1e-12)


def test_rotation_from_quaternion_matches_sandwich_product() -> None:
    rng = np.random.default_rng(7)
    qvec = rng.normal(size=4)
    qvec /= np.linalg.norm(qvec)
    rotation = rotation_from_quaternion(qvec)
    conjugate = qvec * np.array([1.0, -1.0, -1.0, -1.0])
    for vector in rng.normal(size=(100, 3)):
        rotated = quaternion_product(quaternion_product(qvec, np.array([0.0, *vector])), conjugate)
        assert rotation @ vector == pytest.approx(rotated[1:], abs=1e-12)


def test_rotation_from_non_unit_quaternion() -> None:
    with pytest.raises(NonUnitQuaternionError):
        rotation_from_quaternion((2.0, 0.0, 0.0, 0.0))


def test_quaternion_from_rotation() -> None:
    rotation = Rotation.from_euler("xyz", [10.0, -20.0, 30.0], degrees=True).as_matrix()
    qvec = quaternion_from_rotation(rotation)
    assert qvec[0] >= 0
    assert rotation_from_quaternion(qvec) == pytest.approx(rotation, abs=1e-12)


def test_camera_center() -> None:
    pose = Pose(qvec=(1.0, 0.0, 0.0, 0.0), tvec=(1.0, -2.0, 3.0))
    assert camera_center(pose) == pytest.approx([-1.0, 2.0, -3.0])


def test_project_to_image_on_optical_axis() -> None:
    assert project_to_image(HD_CAMERA, IDENTITY_POSE, (0.0, 0.0, 5.0)) == (960.0, 540.0)


def test_project_to_image() -> None:
    assert project_to_image(HD_CAMERA, IDENTITY_POSE, (1.0, 0.0, 5.0)) == pytest.approx(
        (1160.0, 540.0)
    )


def test_project_to_image_behind_camera() -> None:
    assert project_to_image(HD_CAMERA, IDENTITY_POSE, (0.0, 0.0, -1.0)) is None


def test_project_to_image_with_radial_distortion() -> None:
    camera = CameraIntrinsics(1, CameraModel.SIMPLE_RADIAL, 1920, 1080, (1000.0, 960.0, 540.0, 0.1))
    assert project_to_image(camera, IDENTITY_POSE, (1.0, 0.0, 5.0)) == pytest.approx(
        (1160.8, 540.0)
    )


def test_fit_plane_ransac_with_outliers() -> None:
    rng = np.random.default_rng(1)
    inliers = [(i, (*rng.uniform(-10, 10, 2), 2.0)) for i in range(100)]
    outliers = [(100 + i, (*rng.uniform(-10, 10, 2), 50.0)) for i in range(10)]
    fitted = fit_plane_ransac(inliers + outliers, threshold=0.01, iterations=200, seed=7)
    assert fitted.normal == pytest.approx((0.0, 0.0, 1.0), abs=1e-9)
    assert fitted.offset == pytest.approx(2.0, abs=1e-9)
    assert fitted.inlier_ids == frozenset(range(100))


def test_fit_plane_ransac_with_minimal_points() -> None:
    points = [(1, (0.0, 0.0, 0.0)), (2, (1.0, 0.0, 0.0)), (3, (0.0, 1.0, 0.0))]
    fitted = fit_plane_ransac(points, threshold=0.01, iterations=10, seed=7)
    assert fitted.normal == pytest.approx((0.0, 0.0, 1.0), abs=1e-12)
    assert fitted.offset == pytest.approx(0.0, abs=1e-12)
    assert len(fitted.inlier_ids) == 3


def test_fit_plane_ransac_with_too_few_points() -> None:
    with pytest.raises(InsufficientPointsError):
        fit_plane_ransac([(1, (0.0, 0.0, 0.0)), (2, (1.0, 0.0, 0.0))], 0.01, 10, 7)


def test_fit_plane_ransac_with_collinear_points() -> None:
    points = [(i, (float(i), 2.0 * i, 0.0)) for i in range(10)]
    with pytest.raises(DegenerateInputError):
        fit_plane_ransac(points, threshold=0.01, iterations=10, seed=7)


def test_fit_plane_ransac_is_deterministic() -> None:
    rng = np.random.default_rng(2)
    points = [(i, tuple(rng.uniform(-5, 5, 3))) for i in range(50)]
    first = fit_plane_ransac(points, threshold=0.5, iterations=100, seed=11)
    assert fit_plane_ransac(points, threshold=0.5, iterations=100, seed=11) == first


def test_fit_plane_ransac_on_synthetic_scene() -> None:
    spec = small_spec(plane_normal=[0.1, -0.05, 1.0], plane_offset=1.5, queries=[])
    sparse, _ = sparse_scene(spec)
    points = [(point.point3d_id, point.xyz) for point in sparse.points.values()]
    fitted = fit_plane_ransac(points, threshold=0.05, iterations=5000, seed=7)

    truth = np.array(spec.plane_normal) / np.linalg.norm(spec.plane_normal)
    angle = math.degrees(math.acos(min(1.0, abs(float(np.dot(fitted.normal, truth))))))
    assert angle < 0.5
    assert fitted.offset == pytest.approx(1.5 / np.linalg.norm(spec.plane_normal), abs=0.05)


def test_reorientation_for_horizontal_plane() -> None:
    transform = reorientation_for_plane(plane((0.0, 0.0, 1.0), 0.0))
    assert transform == RigidTransform.identity()


def test_reorientation_for_vertical_plane() -> None:
    transform = reorientation_for_plane(plane((1.0, 0.0, 0.0), 3.0))
    rng = np.random.default_rng(3)
    points = np.column_stack([np.full(20, 3.0), rng.uniform(-10, 10, (20, 2))])
    assert transform.apply(points)[:, 2] == pytest.approx(np.zeros(20), abs=1e-12)


def test_reorientation_for_antiparallel_plane() -> None:
    transform = reorientation_for_plane(plane((0.0, 0.0, -1.0), 2.0))
    assert transform.matrix == pytest.approx(np.diag([1.0, -1.0, -1.0]))
    points = np.array([[1.0, 2.0, -2.0], [-4.0, 0.5, -2.0]])
    assert transform.apply(points)[:, 2] == pytest.approx([0.0, 0.0], abs=1e-12)


def test_reorientation_inverse() -> None:
    transform = reorientation_for_plane(plane((0.0, 0.6, 0.8), 2.0))
    points = np.random.default_rng(5).uniform(-10, 10, (20, 3))
    inverse = transform.inverse()
    assert inverse.apply(transform.apply(points)) == pytest.approx(points, abs=1e-12)
    assert inverse.apply(points) == pytest.approx(transform.inverse_apply(points), abs=1e-12)


@pytest.mark.parametrize("seed", range(10))
def test_reorientation_for_random_plane(seed: int) -> None:
    rng = np.random.default_rng(seed)
    normal = rng.normal(size=3)
    normal /= np.linalg.norm(normal)
    offset = float(rng.uniform(-5, 5))
    transform = reorientation_for_plane(plane(tuple(normal), offset))  # type: ignore[arg-type]

    rotation = transform.matrix
    assert rotation @ rotation.T == pytest.approx(np.eye(3), abs=1e-12)
    assert np.linalg.det(rotation) == pytest.approx(1.0)
    assert rotation @ normal == pytest.approx([0.0, 0.0, 1.0], abs=1e-9)

    basis = np.linalg.svd(normal[None, :])[2][1:]
    points = offset * normal + rng.uniform(-10, 10, (50, 2)) @ basis
    assert np.abs(transform.apply(points)[:, 2]).max() <= 1e-9
    assert transform.inverse_apply(transform.apply(points)) == pytest.approx(points, abs=1e-9)


def square_correspondences(scale: float) -> list:
    corners = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    return [(corner, (scale * corner[0], scale * corner[1])) for corner in corners]


def test_estimate_homography_identity() -> None:
    homography, inliers = estimate_homography(square_correspondences(1.0), 0.01, 10, 7)
    assert homography.matrix == pytest.approx(np.eye(3), abs=1e-9)
    assert inliers == 4


def test_estimate_homography_scale() -> None:
    homography, _ = estimate_homography(square_correspondences(2.0), 0.01, 10, 7)
    assert homography.matrix == pytest.approx(np.diag([2.0, 2.0, 1.0]), abs=1e-9)


def test_estimate_homography_with_too_few_correspondences() -> None:
    with pytest.raises(InsufficientCorrespondencesError):
        estimate_homography(square_correspondences(1.0)[:3], 0.01, 10, 7)


def test_estimate_homography_with_collinear_correspondences() -> None:
    correspondences = [((float(i), float(i)), (2.0 * i, 2.0 * i)) for i in range(6)]
    with pytest.raises(DegenerateConfigurationError):
        estimate_homography(correspondences, 0.01, 50, 7)


def road_camera() -> tuple[Homography, np.random.Generator]:
    """Exact pixel to ground homography of a camera 2.5 above the ground, pitched by 10."""
    rotation = Rotation.from_euler("x", 10.0, degrees=True).as_matrix() @ LEVEL_CAMERA
    tvec = -rotation @ np.array([0.0, 0.0, 2.5])
    pose = Pose(qvec=quaternion_from_rotation(rotation), tvec=tuple(tvec))  # type: ignore[arg-type]
    return true_homography(HD_CAMERA, pose, RigidTransform.identity()), np.random.default_rng(7)


def test_estimate_homography_with_noise_and_outliers() -> None:
    truth, rng = road_camera()
    pixels = np.column_stack([rng.uniform(0, 1920, 200), rng.uniform(600, 1080, 200)])
    ground, _ = apply_homography_many(truth, pixels)
    noisy = pixels + rng.normal(0.0, 0.5, pixels.shape)
    outliers = rng.choice(200, size=40, replace=False)
    ground[outliers] = rng.uniform([-10.0, 0.0], [10.0, 30.0], (40, 2))
    correspondences = [(tuple(src), tuple(dst)) for src, dst in zip(noisy, ground)]

    homography, inliers = estimate_homography(correspondences, 3.0, 2000, 7)
    assert 100 <= inliers <= 200

    held_out = np.column_stack([rng.uniform(0, 1920, 100), rng.uniform(600, 1080, 100)])
    held_out_ground, _ = apply_homography_many(truth, held_out)
    reprojected, _ = apply_homography_many(homography.inverse(), held_out_ground)
    assert np.linalg.norm(reprojected - held_out, axis=1).max() <= 1.5


def test_estimate_homography_is_similarity_invariant() -> None:
    truth = Homography.from_matrix(
        np.array([[1.2, 0.1, 5.0], [0.05, 0.9, -3.0], [1e-3, 2e-3, 1.0]])
    )
    grid = np.array([(x, y) for x in np.linspace(0, 100, 5) for y in np.linspace(0, 100, 5)])
    mapped, _ = apply_homography_many(truth, grid)

    def src_similarity(points: np.ndarray) -> np.ndarray:
        return 3.0 * points + np.array([10.0, -20.0])

    def dst_similarity(points: np.ndarray) -> np.ndarray:
        return 0.5 * points + np.array([7.0, 7.0])

    plain, _ = estimate_homography(list(zip(map(tuple, grid), map(tuple, mapped))), 1.0, 100, 7)
    moved, _ = estimate_homography(
        list(zip(map(tuple, src_similarity(grid)), map(tuple, dst_similarity(mapped)))),
        1.0,
        100,
        7,
    )
    samples = np.array([[12.5, 80.0], [55.0, 5.0], [99.0, 42.0]])
    expected = dst_similarity(apply_homography_many(plain, samples)[0])
    actual, _ = apply_homography_many(moved, src_similarity(samples))
    assert actual == pytest.approx(expected, abs=1e-8)


def test_apply_homography() -> None:
    assert apply_homography(Homography.from_matrix(np.eye(3)), (3.0, 4.0)) == (3.0, 4.0)
    scale = Homography.from_matrix(np.diag([2.0, 2.0, 1.0]))
    assert apply_homography(scale, (3.0, 4.0)) == (6.0, 8.0)


def test_apply_homography_at_infinity() -> None:
    matrix = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    homography = Homography.from_matrix(matrix)
    with pytest.raises(PointAtInfinityError):
        apply_homography(homography, (0.0, 5.0))


def test_apply_homography_inverse_composition() -> None:
    rng = np.random.default_rng(7)
    homography = Homography.from_matrix(np.eye(3) + 0.1 * rng.normal(size=(3, 3)))
    points = rng.uniform(-1, 1, (100, 2))
    mapped, _ = apply_homography_many(homography, points)
    back, _ = apply_homography_many(homography.inverse(), mapped)
    assert back == pytest.approx(points, abs=1e-9)
