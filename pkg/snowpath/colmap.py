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
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Final, Iterator

from .exceptions import (
    DanglingReferenceError,
    DegenerateModelError,
    IoFailureError,
    MalformedLineError,
    MissingFileError,
    UnknownImageError,
    UnsupportedCameraModelError,
)
from .utils import Constants

Vec2 = tuple[float, float]
Vec3 = tuple[float, float, float]
Quaternion = tuple[float, float, float, float]

CAMERAS_FILE_NAME: Final[str] = "cameras.txt"
IMAGES_FILE_NAME: Final[str] = "images.txt"
POINTS_FILE_NAME: Final[str] = "points3D.txt"

# Minimal model size for any downstream use
MIN_IMAGES: Final[int] = 2
MIN_POINTS: Final[int] = 10

# Quaternions read from text carry rounded digits
QUATERNION_TOLERANCE: Final[float] = 1e-3
QUATERNION_EXACT: Final[float] = 1e-12


class CameraModel(StrEnum):
    """Represents the supported camera models."""

    SIMPLE_PINHOLE = "SIMPLE_PINHOLE"
    PINHOLE = "PINHOLE"
    SIMPLE_RADIAL = "SIMPLE_RADIAL"

    @property
    def param_count(self) -> int:
        """
        Returns:
            number of parameters expected for the model.
        """
        return 3 if self == CameraModel.SIMPLE_PINHOLE else 4


@dataclass(frozen=True)
class CameraIntrinsics:
    """Represents a calibrated camera."""

    camera_id: int
    model: CameraModel
    width: int
    height: int
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid size {self.width}x{self.height}")
        if len(self.params) != self.model.param_count:
            raise ValueError(
                f"{self.model} expects {self.model.param_count} params, got {len(self.params)}"
            )
        if min(self.focal) <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def focal(self) -> tuple[float, float]:
        """
        Returns:
            focal lengths along x and y.
        """
        if self.model == CameraModel.PINHOLE:
            return self.params[0], self.params[1]
        return self.params[0], self.params[0]

    @property
    def principal_point(self) -> tuple[float, float]:
        """
        Returns:
            principal point.
        """
        if self.model == CameraModel.PINHOLE:
            return self.params[2], self.params[3]
        return self.params[1], self.params[2]

    @property
    def radial(self) -> float:
        """
        Returns:
            radial distortion coefficient, zero for undistorted models.
        """
        return self.params[3] if self.model == CameraModel.SIMPLE_RADIAL else 0.0


@dataclass(frozen=True)
class Pose:
    """Represents a world to camera transform."""

    qvec: Quaternion
    tvec: Vec3


@dataclass(frozen=True)
class Observation:
    """Represents a 2D keypoint, optionally linked to a 3D point."""

    x: float
    y: float
    point3d_id: int | None = None

    @property
    def pixel(self) -> Vec2:
        return self.x, self.y


@dataclass(frozen=True)
class ImageRecord:
    """Represents a posed image."""

    image_id: int
    name: str
    qvec: Quaternion
    tvec: Vec3
    camera_id: int
    observations: tuple[Observation, ...] = ()

    @property
    def pose(self) -> Pose:
        return Pose(qvec=self.qvec, tvec=self.tvec)


@dataclass(frozen=True)
class TrackElement:
    """Represents one observation of a 3D point."""

    image_id: int
    point2d_idx: int


@dataclass(frozen=True)
class ScenePoint:
    """Represents a triangulated 3D point."""

    point3d_id: int
    xyz: Vec3
    color: tuple[int, int, int]
    error: float
    track: tuple[TrackElement, ...]


@dataclass(frozen=True)
class SparseModel:
    """Represents a sparse reconstruction."""

    cameras: dict[int, CameraIntrinsics] = field(default_factory=dict)
    images: dict[int, ImageRecord] = field(default_factory=dict)
    points: dict[int, ScenePoint] = field(default_factory=dict)

    def image_by_name(self, name: str) -> ImageRecord:
        """
        Find an image by name.

        Raises:
            UnknownImageError: if no image has this name.
        """
        for image in self.images.values():
            if image.name == name:
                return image
        raise UnknownImageError(name)

    def camera_of(self, image: ImageRecord) -> CameraIntrinsics:
        return self.cameras[image.camera_id]

    def validate(self) -> None:
        """
        Check referential integrity and minimal size.

        Raises:
            DanglingReferenceError: if a reference doesn't resolve.
            DegenerateModelError: if the model is too small.
        """
        for image in self.images.values():
            if image.camera_id not in self.cameras:
                raise DanglingReferenceError("camera", image.camera_id)
            for idx, observation in enumerate(image.observations):
                if observation.point3d_id is None:
                    continue
                point = self.points.get(observation.point3d_id)
                if point is None or TrackElement(image.image_id, idx) not in point.track:
                    raise DanglingReferenceError("point3D", observation.point3d_id)
        for point in self.points.values():
            for element in point.track:
                image = self.images.get(element.image_id)
                if image is None:
                    raise DanglingReferenceError("image", element.image_id)
                if not 0 <= element.point2d_idx < len(image.observations):
                    raise DanglingReferenceError("point2D", element.point2d_idx)
                if image.observations[element.point2d_idx].point3d_id != point.point3d_id:
                    raise DanglingReferenceError("point3D", point.point3d_id)
        if len(self.images) < MIN_IMAGES or len(self.points) < MIN_POINTS:
            raise DegenerateModelError(len(self.images), len(self.points))


def _data_lines(path: Path) -> Iterator[tuple[int, str]]:
    """Yield numbered lines that aren't comments, keeping blank lines."""
    if not path.is_file():
        raise MissingFileError(path.name)
    try:
        content = path.read_text(Constants.ENCODING_UTF_8)
    except OSError as err:
        raise IoFailureError(path, "read") from err
    for number, line in enumerate(content.splitlines(), start=1):
        if line.startswith("#"):
            continue
        yield number, line.strip()


def _numbers(file: str, number: int, tokens: list[str], kind: type) -> list:
    try:
        return [kind(token) for token in tokens]
    except ValueError as err:
        raise MalformedLineError(file, number, f"expected {kind.__name__} values") from err


def _normalize_quaternion(file: str, number: int, qvec: list[float]) -> Quaternion:
    norm = math.sqrt(sum(value * value for value in qvec))
    deviation = abs(norm - 1.0)
    if deviation > QUATERNION_TOLERANCE:
        raise MalformedLineError(file, number, f"quaternion norm {norm!r} isn't unit")
    if deviation > QUATERNION_EXACT:
        qvec = [value / norm for value in qvec]
    return qvec[0], qvec[1], qvec[2], qvec[3]


def parse_cameras(path: Path) -> dict[int, CameraIntrinsics]:
    """
    Parse `cameras.txt`.

    Raises:
        MissingFileError: if the file doesn't exist.
        MalformedLineError: if a line can't be parsed.
        UnsupportedCameraModelError: if a camera model isn't supported.
    """
    cameras: dict[int, CameraIntrinsics] = {}
    for number, line in _data_lines(path):
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 4:
            raise MalformedLineError(
                path.name, number, "expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]"
            )
        camera_id, width, height = _numbers(
            path.name, number, [tokens[0], tokens[2], tokens[3]], int
        )
        try:
            model = CameraModel(tokens[1])
        except ValueError as err:
            raise UnsupportedCameraModelError(tokens[1]) from err
        params = tuple(_numbers(path.name, number, tokens[4:], float))
        if camera_id in cameras:
            raise MalformedLineError(path.name, number, f"duplicated camera {camera_id}")
        try:
            cameras[camera_id] = CameraIntrinsics(camera_id, model, width, height, params)
        except ValueError as err:
            raise MalformedLineError(path.name, number, str(err)) from err
    return cameras


def parse_images(path: Path) -> dict[int, ImageRecord]:
    """
    Parse `images.txt`, two lines per image.

    Raises:
        MissingFileError: if the file doesn't exist.
        MalformedLineError: if a line can't be parsed.
    """
    images: dict[int, ImageRecord] = {}
    lines = _data_lines(path)
    for number, line in lines:
        # Blank lines between records are tolerated
        if not line:
            continue
        tokens = line.split(maxsplit=9)
        if len(tokens) < 10:
            raise MalformedLineError(
                path.name, number, "expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME"
            )
        image_id, camera_id = _numbers(path.name, number, [tokens[0], tokens[8]], int)
        qvec = _normalize_quaternion(
            path.name, number, _numbers(path.name, number, tokens[1:5], float)
        )
        tx, ty, tz = _numbers(path.name, number, tokens[5:8], float)

        # The observation line may be empty or missing at the end of the file
        points_number, points_line = next(lines, (number + 1, ""))
        values = points_line.split()
        if len(values) % 3 != 0:
            raise MalformedLineError(path.name, points_number, "expected X Y POINT3D_ID triples")
        observations = []
        for offset in range(0, len(values), 3):
            x, y = _numbers(path.name, points_number, values[offset : offset + 2], float)
            (point3d_id,) = _numbers(path.name, points_number, [values[offset + 2]], int)
            observations.append(Observation(x, y, None if point3d_id == -1 else point3d_id))

        if image_id in images:
            raise MalformedLineError(path.name, number, f"duplicated image {image_id}")
        images[image_id] = ImageRecord(
            image_id=image_id,
            name=tokens[9],
            qvec=qvec,
            tvec=(tx, ty, tz),
            camera_id=camera_id,
            observations=tuple(observations),
        )
    return images


def parse_points(path: Path) -> dict[int, ScenePoint]:
    """
    Parse `points3D.txt`.

    Raises:
        MissingFileError: if the file doesn't exist.
        MalformedLineError: if a line can't be parsed.
    """
    points: dict[int, ScenePoint] = {}
    for number, line in _data_lines(path):
        if not line:
            continue
        tokens = line.split()
        if len(tokens) < 8 or (len(tokens) - 8) % 2 != 0:
            raise MalformedLineError(
                path.name, number, "expected POINT3D_ID X Y Z R G B ERROR TRACK[]"
            )
        (point3d_id,) = _numbers(path.name, number, tokens[:1], int)
        x, y, z, error = _numbers(path.name, number, [*tokens[1:4], tokens[7]], float)
        r, g, b = _numbers(path.name, number, tokens[4:7], int)
        if error < 0:
            raise MalformedLineError(path.name, number, "negative reprojection error")
        track_values = _numbers(path.name, number, tokens[8:], int)
        if not track_values:
            raise MalformedLineError(path.name, number, "empty track")
        track = tuple(
            TrackElement(track_values[i], track_values[i + 1])
            for i in range(0, len(track_values), 2)
        )
        if point3d_id in points:
            raise MalformedLineError(path.name, number, f"duplicated point {point3d_id}")
        points[point3d_id] = ScenePoint(point3d_id, (x, y, z), (r, g, b), error, track)
    return points


def parse_sparse_model(model_dir: Path) -> SparseModel:
    """
    Parse a sparse reconstruction exported as text.

    Args:
        model_dir: directory holding cameras.txt, images.txt and points3D.txt.
    Returns:
        a referentially consistent model.
    Raises:
        SparseModelError: if a file is missing, malformed or inconsistent.
    """
    model = SparseModel(
        cameras=parse_cameras(model_dir / CAMERAS_FILE_NAME),
        images=parse_images(model_dir / IMAGES_FILE_NAME),
        points=parse_points(model_dir / POINTS_FILE_NAME),
    )
    model.validate()
    return model


def pixel_point_pairs(model: SparseModel, image_id: int) -> list[tuple[Vec2, Vec3]]:
    """
    List the 2D-3D correspondences of an image, in observation order.

    Raises:
        UnknownImageError: if the image isn't part of the model.
    """
    image = model.images.get(image_id)
    if image is None:
        raise UnknownImageError(image_id)
    return [
        (observation.pixel, model.points[observation.point3d_id].xyz)
        for observation in image.observations
        if observation.point3d_id is not None
    ]
