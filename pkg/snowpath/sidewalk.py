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
import json
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Final, Mapping, Sequence

import numpy as np
from dataclasses_json import dataclass_json

from .colmap import SparseModel, Vec2
from .exceptions import (
    ChecksumMismatchError,
    DimensionMismatchError,
    GeometryError,
    HomographyFailedError,
    IoFailureError,
    MalformedModelFileError,
    MissingRasterError,
    ModelEmptyError,
    NoCorrespondencesError,
    PlaneFitFailedError,
    VersionMismatchError,
)
from .geo import GeoPoint
from .geometry import (
    PlaneModel,
    RigidTransform,
    apply_homography_many,
    camera_center,
    default_plane_threshold,
    estimate_homography,
    fit_plane_ransac,
    reorientation_for_plane,
)
from .masks import (
    Category,
    KeepSide,
    LabelRaster,
    PixelSet,
    category_pixels,
    nearest_cluster_filter,
    right_side_filter,
)
from .utils import Constants, Log

MODEL_MAGIC: Final[str] = "snowpath-sidewalk-model"
MODEL_VERSION: Final[str] = "1"
CHECKSUM_KEY: Final[str] = "crc32"
MIN_CORRESPONDENCES: Final[int] = 4


@dataclass_json
@dataclass(frozen=True)
class SceneDescriptor:
    """Represents the GPS envelope of a scene and its reference images."""

    scene_id: str
    centroid: GeoPoint
    radius_m: float
    references: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.radius_m <= 0:
            raise ValueError(f"radius must be positive, got {self.radius_m}")


@dataclass(frozen=True)
class BuildParams:
    """Parameters of a sidewalk model build."""

    seed: int = Constants.DEFAULT_SEED
    plane_threshold: float | None = None
    plane_iterations: int = 2000
    homography_threshold: float = 3.0
    homography_iterations: int = 2000
    stride: int = 2
    keep_side: KeepSide = KeepSide.RIGHT
    nearest_cluster: bool = False
    target: Category = Category.SIDEWALK
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.stride < 1:
            raise ValueError("stride must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        if self.target not in (Category.SIDEWALK, Category.ROAD):
            raise ValueError(f"unsupported target {self.target!r}")


@dataclass(frozen=True, eq=False)
class SidewalkModel:
    """Represents the expected sidewalk locations of a scene, in the ground frame."""

    scene: SceneDescriptor
    plane: PlaneModel
    reorient: RigidTransform
    points: np.ndarray
    counts: dict[str, int]

    def __post_init__(self) -> None:
        points = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        if not np.all(np.isfinite(points)):
            raise ValueError("sidewalk points must be finite")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SidewalkModel):
            return NotImplemented
        return (
            self.scene == other.scene
            and self.plane == other.plane
            and self.reorient == other.reorient
            and self.counts == other.counts
            and self.points.shape == other.points.shape
            and self.points.tobytes() == other.points.tobytes()
        )

    def world_points(self) -> np.ndarray:
        """
        Returns:
            (N, 3) sidewalk points lifted back into the reconstruction frame.
        """
        lifted = np.hstack([self.points, np.zeros((len(self.points), 1))])
        return self.reorient.inverse_apply(lifted)


def _pixel_index(pixel: Vec2, width: int, height: int) -> tuple[int, int] | None:
    x, y = int(np.floor(pixel[0])), int(np.floor(pixel[1]))
    if 0 <= x < width and 0 <= y < height:
        return x, y
    return None


def road_points(model: SparseModel, image_id: int, road: PixelSet) -> set[int]:
    """
    Returns:
        identifiers of 3D points observed in road pixels of the image.
    """
    ids = set()
    for observation in model.images[image_id].observations:
        if observation.point3d_id is None:
            continue
        index = _pixel_index(observation.pixel, road.width, road.height)
        if index is not None and index in road:
            ids.add(observation.point3d_id)
    return ids


def ground_correspondences(
    model: SparseModel,
    image_id: int,
    road: PixelSet,
    plane: PlaneModel,
    reorient: RigidTransform,
) -> list[tuple[Vec2, Vec2]]:
    """
    Pair road pixels of an image with ground plane coordinates of their 3D points.

    Raises:
        NoCorrespondencesError: if fewer than 4 pairs are found.
    """
    image = model.images[image_id]
    pixels, xyz = [], []
    for observation in image.observations:
        point_id = observation.point3d_id
        if point_id is None or point_id not in plane.inlier_ids:
            continue
        index = _pixel_index(observation.pixel, road.width, road.height)
        if index is None or index not in road:
            continue
        pixels.append(observation.pixel)
        xyz.append(model.points[point_id].xyz)
    if len(pixels) < MIN_CORRESPONDENCES:
        raise NoCorrespondencesError(image.name, len(pixels))
    ground = reorient.apply(np.asarray(xyz, dtype=float))
    return [
        (pixel, (float(x), float(y))) for pixel, (x, y, _) in zip(pixels, ground)
    ]


def _target_pixels(raster: LabelRaster, params: BuildParams) -> PixelSet:
    pixels = right_side_filter(category_pixels(raster, params.target), params.keep_side)
    if params.nearest_cluster:
        pixels = nearest_cluster_filter(pixels)
    return pixels


def _stride_centers(pixels: PixelSet, stride: int) -> np.ndarray:
    """Centers of the member pixels lying on the stride grid."""
    grid = np.zeros_like(pixels.members)
    grid[::stride, ::stride] = True
    ys, xs = np.nonzero(pixels.members & grid)
    return np.column_stack([xs + 0.5, ys + 0.5]).astype(float)


def _fit_ground_plane(
    model: SparseModel,
    image_ids: Sequence[int],
    roads: Mapping[int, PixelSet],
    params: BuildParams,
) -> PlaneModel:
    candidates = sorted(set().union(*(road_points(model, i, roads[i]) for i in image_ids)))
    if len(candidates) < 3:
        raise PlaneFitFailedError(f"only {len(candidates)} points are observed on the road")
    points = [(point_id, model.points[point_id].xyz) for point_id in candidates]
    threshold = params.plane_threshold
    if threshold is None:
        threshold = default_plane_threshold(np.asarray([xyz for _, xyz in points]))
    try:
        plane = fit_plane_ransac(points, threshold, params.plane_iterations, params.seed)
    except (GeometryError, ValueError) as err:
        reason = err.cause if isinstance(err, GeometryError) else str(err)
        raise PlaneFitFailedError(reason) from err
    Log.detail(
        f"ground plane fitted on {len(plane.inlier_ids)}/{len(points)} road points "
        f"(threshold {threshold:.4g})"
    )

    centers = np.asarray([camera_center(model.images[i].pose) for i in image_ids])
    return plane.facing(centers)


def _project_image(
    model: SparseModel,
    image_id: int,
    raster: LabelRaster,
    road: PixelSet,
    plane: PlaneModel,
    reorient: RigidTransform,
    params: BuildParams,
) -> np.ndarray:
    """
    Map the target pixels of a reference image onto the ground plane.

    Raises:
        NoCorrespondencesError: if the road doesn't anchor enough ground points.
        HomographyFailedError: if the homography can't be estimated.
    """
    name = model.images[image_id].name
    correspondences = ground_correspondences(model, image_id, road, plane, reorient)
    try:
        homography, inliers = estimate_homography(
            correspondences,
            params.homography_threshold,
            params.homography_iterations,
            params.seed,
        )
    except GeometryError as err:
        raise HomographyFailedError(name, err.cause) from err
    Log.detail(f"{name}: homography with {inliers}/{len(correspondences)} inliers")

    # Pixels above the horizon map behind the camera, with a flipped homogeneous weight
    _, road_w = apply_homography_many(homography, np.asarray([src for src, _ in correspondences]))
    side = np.sign(np.median(road_w))
    centers = _stride_centers(_target_pixels(raster, params), params.stride)
    if len(centers) == 0:
        return np.empty((0, 2))
    ground, w = apply_homography_many(homography, centers)
    keep = (np.sign(w) == side) & np.all(np.isfinite(ground), axis=1)
    return ground[keep]


def build_sidewalk_model(
    model: SparseModel,
    rasters: Mapping[str, LabelRaster],
    scene: SceneDescriptor,
    params: BuildParams = BuildParams(),
) -> SidewalkModel:
    """
    Build the sidewalk model of a scene from its reference images.

    Args:
        model: sparse reconstruction of the reference images.
        rasters: label raster of each reference image, by image name.
        scene: scene descriptor, its references name the images to use.
        params: build parameters.
    Returns:
        the accumulated sidewalk points, in reference image name order.
    Raises:
        MissingRasterError: if a reference image has no raster.
        PlaneFitFailedError: if the ground plane can't be estimated.
        ModelEmptyError: if no sidewalk point could be projected.
    """
    names = sorted(scene.references) if scene.references else sorted(rasters)
    image_ids = []
    roads: dict[int, PixelSet] = {}
    for name in names:
        image = model.image_by_name(name)
        raster = rasters.get(name)
        if raster is None:
            raise MissingRasterError(name)
        camera = model.camera_of(image)
        if raster.size != (camera.width, camera.height):
            raise DimensionMismatchError((camera.width, camera.height), raster.size)
        image_ids.append(image.image_id)
        roads[image.image_id] = category_pixels(raster, Category.ROAD)

    plane = _fit_ground_plane(model, image_ids, roads, params)
    reorient = reorientation_for_plane(plane)

    def project(image_id: int) -> np.ndarray:
        name = model.images[image_id].name
        try:
            return _project_image(
                model, image_id, rasters[name], roads[image_id], plane, reorient, params
            )
        except (NoCorrespondencesError, HomographyFailedError) as err:
            Log.warning(f"Skipping reference image `{name}`", err)
            return np.empty((0, 2))

    with ThreadPoolExecutor(max_workers=params.jobs) as executor:
        projected = list(executor.map(project, image_ids))

    counts = {name: len(points) for name, points in zip(names, projected)}
    if sum(counts.values()) == 0:
        raise ModelEmptyError()
    return SidewalkModel(
        scene=scene,
        plane=plane,
        reorient=reorient,
        points=np.vstack(projected),
        counts=counts,
    )


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _fmt_all(values) -> str:
    return " ".join(_fmt(value) for value in values)


def save_model(model: SidewalkModel, path: Path) -> None:
    """
    Save a sidewalk model in its versioned text format.

    Raises:
        IoFailureError: if the file can't be written.
    """
    plane = model.plane
    lines = [
        f"{MODEL_MAGIC} {MODEL_VERSION}",
        f"scene {model.scene.to_json()}",  # type: ignore[attr-defined]
        f"plane {_fmt_all(plane.normal)} {_fmt(plane.offset)} {_fmt(plane.inlier_threshold)}",
        "inliers " + " ".join(str(point_id) for point_id in sorted(plane.inlier_ids)),
        f"rotation {_fmt_all(np.ravel(model.reorient.rotation))}",
        f"translation {_fmt_all(model.reorient.translation)}",
        f"counts {json.dumps(model.counts)}",
        f"points {len(model.points)}",
    ]
    lines.extend(f"{_fmt(x)} {_fmt(y)}" for x, y in model.points)
    body = "\n".join(lines) + "\n"
    checksum = zlib.crc32(body.encode(Constants.ENCODING_UTF_8))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(f"{body}{CHECKSUM_KEY} {checksum:08x}\n", Constants.ENCODING_UTF_8)
    except OSError as err:
        raise IoFailureError(path, "write") from err


def _field(path: Path, line: str, key: str) -> str:
    prefix = f"{key} "
    if not line.startswith(prefix) and line != key:
        raise MalformedModelFileError(path, f"expected `{key}`")
    return line[len(prefix) :]


def _floats(path: Path, text: str, count: int) -> list[float]:
    values = text.split()
    if len(values) != count:
        raise MalformedModelFileError(path, f"expected {count} values, got {len(values)}")
    try:
        return [float(value) for value in values]
    except ValueError as err:
        raise MalformedModelFileError(path, "invalid number") from err


def load_model(path: Path) -> SidewalkModel:
    """
    Load a sidewalk model.

    Raises:
        IoFailureError: if the file can't be read.
        VersionMismatchError: if the file has another version.
        ChecksumMismatchError: if the content doesn't match its checksum.
        MalformedModelFileError: if the content can't be parsed.
    """
    try:
        content = path.read_text(Constants.ENCODING_UTF_8)
    except (OSError, UnicodeDecodeError) as err:
        raise IoFailureError(path, "read") from err

    header, _, _ = content.partition("\n")
    magic, _, version = header.partition(" ")
    if magic != MODEL_MAGIC:
        raise MalformedModelFileError(path, "not a sidewalk model file")
    if version != MODEL_VERSION:
        raise VersionMismatchError(path, version)

    body, _, trailer = content.rstrip("\n").rpartition("\n")
    if not trailer.startswith(f"{CHECKSUM_KEY} "):
        raise MalformedModelFileError(path, "missing checksum")
    body += "\n"
    if f"{zlib.crc32(body.encode(Constants.ENCODING_UTF_8)):08x}" != trailer.split(" ", 1)[1]:
        raise ChecksumMismatchError(path)

    lines = body.splitlines()[1:]
    if len(lines) < 7:
        raise MalformedModelFileError(path, "truncated header")
    try:
        scene = SceneDescriptor.from_json(_field(path, lines[0], "scene"))  # type: ignore[attr-defined]
        counts = json.loads(_field(path, lines[5], "counts"))
        count = int(_field(path, lines[6], "points"))
        inliers = frozenset(int(value) for value in _field(path, lines[2], "inliers").split())
    except (ValueError, KeyError, TypeError) as err:
        raise MalformedModelFileError(path, str(err)) from err
    nx, ny, nz, offset, threshold = _floats(path, _field(path, lines[1], "plane"), 5)
    rotation = _floats(path, _field(path, lines[3], "rotation"), 9)
    translation = _floats(path, _field(path, lines[4], "translation"), 3)

    rows = lines[7:]
    if len(rows) != count:
        raise MalformedModelFileError(path, f"expected {count} points, got {len(rows)}")
    points = np.array([_floats(path, row, 2) for row in rows], dtype=np.float64).reshape(-1, 2)
    try:
        return SidewalkModel(
            scene=scene,
            plane=PlaneModel(
                normal=(nx, ny, nz),
                offset=offset,
                inlier_ids=inliers,
                inlier_threshold=threshold,
            ),
            reorient=RigidTransform(
                rotation=(
                    (rotation[0], rotation[1], rotation[2]),
                    (rotation[3], rotation[4], rotation[5]),
                    (rotation[6], rotation[7], rotation[8]),
                ),
                translation=(translation[0], translation[1], translation[2]),
            ),
            points=points,
            counts={str(name): int(value) for name, value in counts.items()},
        )
    except ValueError as err:
        raise MalformedModelFileError(path, str(err)) from err

