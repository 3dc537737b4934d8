#
# Copyright Elasticsearch B.V. and/or licensed to Elasticsearch B.V. under one
# or more contributor license agreements. See the NOTICE file distributed with
# this work for additional information regarding copyright
# ownership. Elasticsearch B.V. licenses this file to you under
# the Apache License, Version 2.0 (the "License"); you may
# not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# 	http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing,
# software distributed under the License is distributed on an
# "AS IS" BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, either express or implied.  See the License for the
# specific language governing permissions and limitations
# under the License.
#
import math
from dataclasses import dataclass
from typing import Final, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from .colmap import CameraIntrinsics, CameraModel, Pose, Quaternion, Vec2, Vec3
from .exceptions import (
    DegenerateConfigurationError,
    DegenerateInputError,
    InsufficientCorrespondencesError,
    InsufficientPointsError,
    NonUnitQuaternionError,
    PointAtInfinityError,
)

Matrix3 = tuple[Vec3, Vec3, Vec3]

QUATERNION_TOLERANCE: Final[float] = 1e-6
MIN_DEPTH: Final[float] = 1e-9
COLLINEAR_TOLERANCE: Final[float] = 1e-9
W_TOLERANCE: Final[float] = 1e-12
PLANE_THRESHOLD_RATIO: Final[float] = 0.01
RANSAC_CONFIDENCE: Final[float] = 0.999
RANSAC_BATCH: Final[int] = 256


def _as_matrix3(matrix: np.ndarray) -> Matrix3:
    rows = [tuple(float(value) for value in row) for row in matrix]
    return rows[0], rows[1], rows[2]  # type: ignore[return-value]


def rotation_from_quaternion(qvec: Quaternion | Sequence[float]) -> np.ndarray:
    """
    Build the rotation matrix of a unit quaternion (w, x, y, z).

    Raises:
        NonUnitQuaternionError: if the quaternion isn't unit.
    """
    w, x, y, z = (float(value) for value in qvec)
    norm = math.sqrt(w * w + x * x + y * y + z * z)
    if abs(norm - 1.0) > QUATERNION_TOLERANCE:
        raise NonUnitQuaternionError(norm)
    return np.array(
        [
            [1 - 2 * y * y - 2 * z * z, 2 * x * y - 2 * w * z, 2 * z * x + 2 * w * y],
            [2 * x * y + 2 * w * z, 1 - 2 * x * x - 2 * z * z, 2 * y * z - 2 * w * x],
            [2 * z * x - 2 * w * y, 2 * y * z + 2 * w * x, 1 - 2 * x * x - 2 * y * y],
        ]
    )


def quaternion_from_rotation(rotation: np.ndarray) -> Quaternion:
    """
    Returns:
        the unit quaternion (w, x, y, z) of a rotation, with w >= 0.
    """
    x, y, z, w = Rotation.from_matrix(rotation).as_quat()
    qvec = np.array([w, x, y, z])
    if qvec[0] < 0:
        qvec = -qvec
    qvec /= np.linalg.norm(qvec)
    return float(qvec[0]), float(qvec[1]), float(qvec[2]), float(qvec[3])


def camera_center(pose: Pose) -> np.ndarray:
    """
    Returns:
        camera center in world coordinates.
    """
    rotation = rotation_from_quaternion(pose.qvec)
    return -rotation.T @ np.asarray(pose.tvec, dtype=float)


def project_points(
    intrinsics: CameraIntrinsics, pose: Pose, xyz: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Project world points into an image.

    Args:
        intrinsics: camera calibration.
        pose: world to camera transform.
        xyz: (N, 3) world points.
    Returns:
        (N, 2) pixels and a (N,) mask of points in front of the camera.
        Pixels of points behind the camera are NaN.
    """
    points = np.atleast_2d(np.asarray(xyz, dtype=float))
    rotation = rotation_from_quaternion(pose.qvec)
    cam = points @ rotation.T + np.asarray(pose.tvec, dtype=float)
    in_front = cam[:, 2] > MIN_DEPTH
    pixels = np.full((len(points), 2), np.nan)
    if not np.any(in_front):
        return pixels, in_front

    normalized = cam[in_front, :2] / cam[in_front, 2:3]
    if intrinsics.model == CameraModel.SIMPLE_RADIAL:
        r2 = np.sum(normalized**2, axis=1, keepdims=True)
        normalized = normalized * (1.0 + intrinsics.radial * r2)
    fx, fy = intrinsics.focal
    cx, cy = intrinsics.principal_point
    pixels[in_front, 0] = fx * normalized[:, 0] + cx
    pixels[in_front, 1] = fy * normalized[:, 1] + cy
    return pixels, in_front


def project_to_image(intrinsics: CameraIntrinsics, pose: Pose, xyz: Vec3) -> Vec2 | None:
    """
    Project a world point into an image.

    Returns:
        the pixel, or None when the point is behind the camera.
    """
    pixels, in_front = project_points(intrinsics, pose, np.asarray([xyz], dtype=float))
    if not in_front[0]:
        return None
    return float(pixels[0, 0]), float(pixels[0, 1])


@dataclass(frozen=True)
class PlaneModel:
    """Represents a plane {x : normal . x = offset} with its supporting points."""

    normal: Vec3
    offset: float
    inlier_ids: frozenset[int]
    inlier_threshold: float

    def distances(self, xyz: np.ndarray) -> np.ndarray:
        """
        Returns:
            signed distances of points to the plane.
        """
        return np.atleast_2d(xyz) @ np.asarray(self.normal) - self.offset

    def flipped(self) -> "PlaneModel":
        """
        Returns:
            the same plane with opposite orientation.
        """
        nx, ny, nz = self.normal
        return PlaneModel(
            normal=(-nx, -ny, -nz),
            offset=-self.offset,
            inlier_ids=self.inlier_ids,
            inlier_threshold=self.inlier_threshold,
        )

    def facing(self, viewpoints: np.ndarray) -> "PlaneModel":
        """
        Orient the normal so the majority of viewpoints lie on its positive side.

        Args:
            viewpoints: (N, 3) camera centers.
        """
        sides = np.sign(self.distances(viewpoints))
        return self.flipped() if np.sum(sides) < 0 else self


@dataclass(frozen=True)
class RigidTransform:
    """Represents x -> rotation . x + translation."""

    rotation: Matrix3
    translation: Vec3

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(_as_matrix3(np.eye(3)), (0.0, 0.0, 0.0))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.rotation, dtype=float)

    def apply(self, xyz: np.ndarray) -> np.ndarray:
        """Transform (N, 3) points."""
        return np.atleast_2d(xyz) @ self.matrix.T + np.asarray(self.translation)

    def inverse_apply(self, xyz: np.ndarray) -> np.ndarray:
        """Transform (N, 3) points back."""
        return (np.atleast_2d(xyz) - np.asarray(self.translation)) @ self.matrix

    def inverse(self) -> "RigidTransform":
        rotation = self.matrix.T
        translation = -rotation @ np.asarray(self.translation)
        x, y, z = (float(value) for value in translation)
        return RigidTransform(_as_matrix3(rotation), (x, y, z))


@dataclass(frozen=True)
class Homography:
    """Represents a 3x3 projective map."""

    h: Matrix3

    @staticmethod
    def from_matrix(matrix: np.ndarray) -> "Homography":
        """
        Build a homography normalized so that h[2][2] = 1 when possible.
        """
        matrix = np.asarray(matrix, dtype=float)
        if abs(matrix[2, 2]) > W_TOLERANCE:
            matrix = matrix / matrix[2, 2]
        return Homography(_as_matrix3(matrix))

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.h, dtype=float)

    def inverse(self) -> "Homography":
        return Homography.from_matrix(np.linalg.inv(self.matrix))


def default_plane_threshold(xyz: np.ndarray) -> float:
    """
    Returns:
        inlier threshold relative to the bounding box diagonal, SfM scale being arbitrary.
    """
    points = np.atleast_2d(xyz)
    return PLANE_THRESHOLD_RATIO * float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)))


def _refine_plane(xyz: np.ndarray) -> tuple[np.ndarray, float]:
    """Total least squares plane through points."""
    centroid = xyz.mean(axis=0)
    _, _, vt = np.linalg.svd(xyz - centroid, full_matrices=False)
    normal = vt[-1] / np.linalg.norm(vt[-1])
    return normal, float(normal @ centroid)


def _canonical_sign(normal: np.ndarray, offset: float) -> tuple[np.ndarray, float]:
    """Make the largest normal component positive."""
    if normal[np.argmax(np.abs(normal))] < 0:
        return -normal, -offset
    return normal, offset


def fit_plane_ransac(
    points: Sequence[tuple[int, Vec3]],
    threshold: float,
    iterations: int,
    seed: int,
) -> PlaneModel:
    """
    Fit a plane with RANSAC then refine it by total least squares on the inliers.

    Args:
        points: identified 3D points.
        threshold: inlier distance, in the unit of the points.
        iterations: number of sampled hypotheses.
        seed: random seed, the fit is deterministic for a fixed seed.
    Raises:
        InsufficientPointsError: if fewer than 3 points are given.
        DegenerateInputError: if all points are collinear.
    """
    if len(points) < 3:
        raise InsufficientPointsError(len(points))
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if iterations < 1:
        raise ValueError("iterations must be at least 1")

    ids = np.array([point_id for point_id, _ in points], dtype=np.int64)
    xyz = np.array([coords for _, coords in points], dtype=float)
    singular_values = np.linalg.svd(xyz - xyz.mean(axis=0), compute_uv=False)
    if singular_values[1] <= COLLINEAR_TOLERANCE:
        raise DegenerateInputError()

    rng = np.random.default_rng(seed)
    samples = np.array([rng.choice(len(xyz), size=3, replace=False) for _ in range(iterations)])

    best_count = 0
    best_plane: tuple[np.ndarray, float] | None = None
    for start in range(0, iterations, RANSAC_BATCH):
        batch = samples[start : start + RANSAC_BATCH]
        p0, p1, p2 = xyz[batch[:, 0]], xyz[batch[:, 1]], xyz[batch[:, 2]]
        normals = np.cross(p1 - p0, p2 - p0)
        norms = np.linalg.norm(normals, axis=1)
        valid = norms > COLLINEAR_TOLERANCE
        if not np.any(valid):
            continue
        normals = normals[valid] / norms[valid, None]
        offsets = np.sum(normals * p0[valid], axis=1)
        counts = np.sum(np.abs(normals @ xyz.T - offsets[:, None]) <= threshold, axis=1)
        winner = int(np.argmax(counts))
        if counts[winner] > best_count:
            best_count = int(counts[winner])
            best_plane = normals[winner], float(offsets[winner])
    if best_plane is None:
        raise DegenerateInputError()

    normal, offset = best_plane
    inliers = np.abs(xyz @ normal - offset) <= threshold
    if np.count_nonzero(inliers) >= 3:
        refined_normal, refined_offset = _refine_plane(xyz[inliers])
        refined_inliers = np.abs(xyz @ refined_normal - refined_offset) <= threshold
        if np.count_nonzero(refined_inliers) >= 3:
            normal, offset, inliers = refined_normal, refined_offset, refined_inliers

    normal, offset = _canonical_sign(normal, offset)
    return PlaneModel(
        normal=(float(normal[0]), float(normal[1]), float(normal[2])),
        offset=offset,
        inlier_ids=frozenset(int(point_id) for point_id in ids[inliers]),
        inlier_threshold=float(threshold),
    )


def reorientation_for_plane(plane: PlaneModel) -> RigidTransform:
    """
    Build the rigid transform placing the plane on z = 0 with its normal along +z.
    The rotation is the minimal-angle one; the antiparallel case rotates by pi about x.
    """
    normal = np.asarray(plane.normal, dtype=float)
    normal /= np.linalg.norm(normal)
    up = np.array([0.0, 0.0, 1.0])
    cosine = float(np.clip(normal @ up, -1.0, 1.0))
    axis = np.cross(normal, up)
    sine = float(np.linalg.norm(axis))
    if sine <= W_TOLERANCE and cosine > 0:
        rotation = np.eye(3)
    elif sine <= W_TOLERANCE:
        rotation = np.diag([1.0, -1.0, -1.0])
    else:
        angle = math.atan2(sine, cosine)
        rotation = Rotation.from_rotvec(axis / sine * angle).as_matrix()
    return RigidTransform(_as_matrix3(rotation), (0.0, 0.0, -float(plane.offset)))


def _hartley(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_distance = float(np.mean(np.linalg.norm(points - centroid, axis=1)))
    scale = math.sqrt(2) / mean_distance if mean_distance > W_TOLERANCE else 1.0
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def _to_homogeneous(points: np.ndarray) -> np.ndarray:
    return np.hstack([points, np.ones((len(points), 1))])


def _transform(matrix: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Apply a homography to (N, 2) points, returning points and their w."""
    mapped = _to_homogeneous(points) @ matrix.T
    w = mapped[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        return mapped[:, :2] / w[:, None], w


def _normalized_dlt(src: np.ndarray, dst: np.ndarray) -> np.ndarray | None:
    """Direct linear transform with Hartley normalization of both sides."""
    t_src, t_dst = _hartley(src), _hartley(dst)
    s, _ = _transform(t_src, src)
    d, _ = _transform(t_dst, dst)
    rows = []
    for (x, y), (u, v) in zip(s, d):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    normalized = vt[-1].reshape(3, 3)
    matrix = np.linalg.inv(t_dst) @ normalized @ t_src
    if abs(np.linalg.det(matrix)) <= W_TOLERANCE * np.linalg.norm(matrix) ** 3:
        return None
    if abs(matrix[2, 2]) > W_TOLERANCE:
        matrix = matrix / matrix[2, 2]
    return matrix


def _has_collinear_triplet(points: np.ndarray) -> bool:
    extent = float(np.max(np.ptp(points, axis=0)))
    tolerance = COLLINEAR_TOLERANCE * max(extent, W_TOLERANCE) ** 2
    for i, j, k in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        a, b = points[j] - points[i], points[k] - points[i]
        if abs(a[0] * b[1] - a[1] * b[0]) <= tolerance:
            return True
    return False


def _symmetric_transfer_errors(
    matrix: np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    t_src: np.ndarray,
    t_dst: np.ndarray,
) -> np.ndarray:
    """
    Symmetric transfer error measured in normalized coordinates of each side and
    expressed in source units.
    """
    try:
        inverse = np.linalg.inv(matrix)
    except np.linalg.LinAlgError:
        return np.full(len(src), np.inf)
    forward, _ = _transform(matrix, src)
    backward, _ = _transform(inverse, dst)
    scale_src, scale_dst = t_src[0, 0], t_dst[0, 0]
    forward_error = np.sum((forward - dst) ** 2, axis=1) * scale_dst**2
    backward_error = np.sum((backward - src) ** 2, axis=1) * scale_src**2
    errors = np.sqrt(forward_error + backward_error) / scale_src
    return np.where(np.isfinite(errors), errors, np.inf)


def _adaptive_iterations(inlier_ratio: float, sample_size: int = 4) -> float:
    if inlier_ratio >= 1.0:
        return 0.0
    if inlier_ratio <= 0.0:
        return math.inf
    outlier_free = inlier_ratio**sample_size
    if outlier_free <= 0.0:
        return math.inf
    return math.log(1 - RANSAC_CONFIDENCE) / math.log(1 - outlier_free)


def estimate_homography(
    correspondences: Sequence[tuple[Vec2, Vec2]],
    ransac_threshold: float,
    iterations: int,
    seed: int,
) -> tuple[Homography, int]:
    """
    Estimate the homography mapping sources to destinations with RANSAC.

    Each hypothesis comes from a normalized DLT on 4 correspondences; the final
    homography is re-estimated over all inliers of the best hypothesis.

    Args:
        correspondences: (src, dst) pairs.
        ransac_threshold: symmetric transfer error bound, in source units.
        iterations: maximal number of sampled hypotheses.
        seed: random seed, the estimation is deterministic for a fixed seed.
    Returns:
        the homography and its inlier count.
    Raises:
        InsufficientCorrespondencesError: if fewer than 4 correspondences are given.
        DegenerateConfigurationError: if no usable sample is found.
    """
    if len(correspondences) < 4:
        raise InsufficientCorrespondencesError(len(correspondences))
    src = np.array([pair[0] for pair in correspondences], dtype=float)
    dst = np.array([pair[1] for pair in correspondences], dtype=float)
    t_src, t_dst = _hartley(src), _hartley(dst)

    rng = np.random.default_rng(seed)
    best_inliers: np.ndarray | None = None
    best_count = 0
    budget = float(iterations)
    iteration = 0
    while iteration < min(iterations, budget):
        iteration += 1
        sample = rng.choice(len(src), size=4, replace=False)
        if _has_collinear_triplet(src[sample]) or _has_collinear_triplet(dst[sample]):
            continue
        matrix = _normalized_dlt(src[sample], dst[sample])
        if matrix is None:
            continue
        inliers = _symmetric_transfer_errors(matrix, src, dst, t_src, t_dst) <= ransac_threshold
        count = int(np.count_nonzero(inliers))
        if count > best_count:
            best_count, best_inliers = count, inliers
            budget = _adaptive_iterations(count / len(src))
    if best_inliers is None or best_count < 4:
        raise DegenerateConfigurationError(iterations)

    matrix = _normalized_dlt(src[best_inliers], dst[best_inliers])
    if matrix is None:
        raise DegenerateConfigurationError(iterations)
    return Homography.from_matrix(matrix), best_count


def apply_homography_many(h: Homography, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Apply a homography to (N, 2) points.

    Returns:
        mapped points and their homogeneous weights; points with |w| <= 1e-12 are NaN.
    """
    mapped, w = _transform(h.matrix, np.atleast_2d(np.asarray(points, dtype=float)))
    at_infinity = np.abs(w) <= W_TOLERANCE
    mapped[at_infinity] = np.nan
    return mapped, w


def apply_homography(h: Homography, p: Vec2) -> Vec2:
    """
    Apply a homography to a point.

    Raises:
        PointAtInfinityError: if the point maps to infinity.
    """
    mapped, w = apply_homography_many(h, np.asarray([p], dtype=float))
    if abs(w[0]) <= W_TOLERANCE:
        raise PointAtInfinityError((float(p[0]), float(p[1])))
    return float(mapped[0, 0]), float(mapped[0, 1])
