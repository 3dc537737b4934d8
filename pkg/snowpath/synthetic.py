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
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Final, Sequence

import numpy as np
from dataclasses_json import dataclass_json
from envyaml import EnvYAML
from jsonschema.exceptions import ValidationError
from jsonschema.validators import validate
from matplotlib.path import Path as Polygon
from scipy.spatial.transform import Rotation

from .colmap import (
    CAMERAS_FILE_NAME,
    IMAGES_FILE_NAME,
    POINTS_FILE_NAME,
    CameraIntrinsics,
    CameraModel,
    ImageRecord,
    Observation,
    Pose,
    ScenePoint,
    SparseModel,
    TrackElement,
)
from .evaluation import QueryCategory
from .exceptions import InvalidSpecError, IoFailureError, UnknownQueryError
from .geo import GeoPoint, offset_geo
from .geometry import (
    Homography,
    PlaneModel,
    RigidTransform,
    project_points,
    quaternion_from_rotation,
    reorientation_for_plane,
    rotation_from_quaternion,
)
from .manifest import ImageRole, Manifest, ManifestImage, ManifestScene, load_schema
from .masks import Category, LabelRaster, write_label_raster
from .utils import Constants

GROUND_COLOR: Final[tuple[int, int, int]] = (128, 128, 128)
CLUTTER_COLOR: Final[tuple[int, int, int]] = (34, 139, 34)
CLUTTER_HEIGHT_M: Final[tuple[float, float]] = (0.5, 10.0)
CLUTTER_MARGIN_M: Final[float] = 2.0
MIN_TRACK_LENGTH: Final[int] = 2

# Ground frame to camera frame for a level camera looking along +y
LEVEL_CAMERA: Final[np.ndarray] = np.array(
    [[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]]
)


class SnowScenario(StrEnum):
    """Represents where snow lies in a query image."""

    NONE = "none"
    COVERS_SIDEWALK = "covers_sidewalk"
    BESIDE_SIDEWALK = "beside_sidewalk"


@dataclass_json
@dataclass(frozen=True)
class SnowSpec:
    """Represents a snow scenario applied to every query."""

    scenario: SnowScenario = SnowScenario.NONE
    fraction: float = 0.0


@dataclass_json
@dataclass(frozen=True)
class QuerySpec:
    """
    Represents a query image of a synthetic scene.

    The camera sits at `position` (share of the track length) and `lateral_m`, unless
    `pose_of` names a reference image whose pose is reused.
    """

    name: str
    category: QueryCategory | None = None
    scenario: SnowScenario = SnowScenario.NONE
    fraction: float = 0.0
    position: float = 0.25
    lateral_m: float = 0.0
    gps_offset_m: float = 0.0
    pose_of: str | None = None


def default_queries() -> list[QuerySpec]:
    return [
        QuerySpec(name="q_clear.jpg", category=QueryCategory.CLEAR, position=0.25),
        QuerySpec(
            name="q_snow.jpg",
            category=QueryCategory.SNOW_COVERED,
            scenario=SnowScenario.COVERS_SIDEWALK,
            fraction=0.95,
            position=0.5,
        ),
        QuerySpec(
            name="q_cleared.jpg",
            category=QueryCategory.CLEARED,
            scenario=SnowScenario.BESIDE_SIDEWALK,
            position=0.75,
        ),
    ]


@dataclass_json
@dataclass(frozen=True)
class SceneSpec:
    """
    Represents a synthetic scene, in a ground frame where x points right of the
    driving direction, y along it and z up.
    """

    seed: int = 7
    scene_id: str = "synthetic"
    plane_normal: list[float] = field(default_factory=lambda: [0.0, 0.0, 1.0])
    plane_offset: float = 0.0
    sidewalk: list[list[float]] = field(
        default_factory=lambda: [[2.5, -5.0], [4.5, -5.0], [4.5, 80.0], [2.5, 80.0]]
    )
    road: list[list[float]] = field(
        default_factory=lambda: [[-3.5, -5.0], [2.0, -5.0], [2.0, 80.0], [-3.5, 80.0]]
    )
    runs: int = 3
    images_per_run: int = 12
    spacing_m: float = 2.0
    lateral_jitter_m: float = 0.3
    yaw_jitter_deg: float = 1.0
    camera_height_m: float = 2.5
    pitch_deg: float = 8.0
    point_count: int = 5000
    outlier_fraction: float = 0.3
    pixel_noise: float = 0.0
    width: int = 1280
    height: int = 720
    camera_model: CameraModel = CameraModel.PINHOLE
    focal_ratio: float = 0.8
    origin: GeoPoint = field(default_factory=lambda: GeoPoint(lat=40.44, lon=-79.99))
    radius_m: float = 150.0
    max_range_m: float = 200.0
    snow_margin_m: float = 1.0
    beside_gap_m: float = 0.5
    beside_width_m: float = 1.5
    snow: SnowSpec | None = None
    queries: list[QuerySpec] = field(default_factory=default_queries)

    @staticmethod
    def from_file(path: Path) -> "SceneSpec":
        """
        Read a YAML scene spec, `${VAR}` references being expanded from the environment.

        Raises:
            InvalidSpecError: if the file is missing or invalid.
        """
        if not path.is_file():
            raise InvalidSpecError(f"missing file `{path.as_posix()}`")
        try:
            data = EnvYAML(path.as_posix(), include_environment=False, strict=False).export()
        except Exception as err:
            raise InvalidSpecError(f"unreadable file `{path.as_posix()}`") from err
        return SceneSpec.from_mapping(data or {})

    @staticmethod
    def from_mapping(data: dict) -> "SceneSpec":
        """
        Raises:
            InvalidSpecError: if the spec doesn't follow its schema.
        """
        version = str(data.get("version", "1.0"))
        try:
            schema = load_schema("scene_spec", version)
        except FileNotFoundError as err:
            raise InvalidSpecError(f"version `{version}` isn't supported") from err
        try:
            validate(instance=data, schema=schema)
        except ValidationError as err:
            raise InvalidSpecError(err.message) from err
        fields = {key: value for key, value in data.items() if key != "version"}
        # noinspection PyUnresolvedReferences
        return SceneSpec.from_dict(fields)  # type: ignore[attr-defined]

    @property
    def track_length_m(self) -> float:
        return (self.images_per_run - 1) * self.spacing_m

    @property
    def image_count(self) -> int:
        return self.runs * self.images_per_run

    def reference_names(self) -> list[str]:
        return [
            f"run{run + 1}_{index:03d}.jpg"
            for run in range(self.runs)
            for index in range(self.images_per_run)
        ]

    def resolved_queries(self) -> list[QuerySpec]:
        """
        Returns:
            the queries, with the scene-wide snow scenario applied when set.
        """
        if self.snow is None:
            return list(self.queries)
        return [
            QuerySpec(
                name=query.name,
                category=query.category,
                scenario=self.snow.scenario,
                fraction=self.snow.fraction,
                position=query.position,
                lateral_m=query.lateral_m,
                gps_offset_m=query.gps_offset_m,
                pose_of=query.pose_of,
            )
            for query in self.queries
        ]

    def check(self) -> None:
        """
        Raises:
            InvalidSpecError: if the spec can't be generated.
        """
        if self.camera_model == CameraModel.SIMPLE_RADIAL:
            raise InvalidSpecError("SIMPLE_RADIAL cameras can't be rendered")
        if self.runs < 1 or self.images_per_run < 1 or self.image_count < 2:
            raise InvalidSpecError("at least 2 reference images are required")
        if self.point_count < 10:
            raise InvalidSpecError("at least 10 points are required")
        if not 0.0 <= self.outlier_fraction < 1.0:
            raise InvalidSpecError("outlier fraction must be in [0, 1)")
        if self.pixel_noise < 0:
            raise InvalidSpecError("pixel noise must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidSpecError("image dimensions must be positive")
        if self.camera_height_m <= 0 or not 0.0 < self.pitch_deg < 90.0:
            raise InvalidSpecError("the camera must look down from above the ground")
        if len(self.plane_normal) != 3 or np.linalg.norm(self.plane_normal) <= 0:
            raise InvalidSpecError("plane normal must be a non zero 3-vector")
        for name, polygon in (("sidewalk", self.sidewalk), ("road", self.road)):
            vertices = np.asarray(polygon, dtype=float)
            if vertices.ndim != 2 or vertices.shape[0] < 3 or vertices.shape[1] != 2:
                raise InvalidSpecError(f"{name} must be a polygon of at least 3 vertices")
            if _area(vertices) <= 0:
                raise InvalidSpecError(f"{name} polygon is degenerate")
        if Polygon(self.sidewalk).intersects_path(Polygon(self.road), filled=True):
            raise InvalidSpecError("sidewalk and road polygons overlap")

        references = set(self.reference_names())
        names = [query.name for query in self.queries]
        if len(set(names)) != len(names) or references.intersection(names):
            raise InvalidSpecError("image names must be unique")
        for query in self.resolved_queries():
            if not 0.0 <= query.fraction <= 1.0:
                raise InvalidSpecError(f"snow fraction of `{query.name}` must be in [0, 1]")
            if query.pose_of is not None and query.pose_of not in references:
                raise InvalidSpecError(f"`{query.name}` reuses the unknown pose `{query.pose_of}`")


@dataclass_json
@dataclass(frozen=True)
class GroundTruth:
    """Represents the exact values a synthetic scene was generated from."""

    plane_normal: list[float]
    plane_offset: float
    homographies: dict[str, list[list[float]]]
    coverage: dict[str, float]


@dataclass(frozen=True)
class GroundCamera:
    """Represents a camera in the ground frame."""

    name: str
    rotation: np.ndarray
    center: np.ndarray
    pose: Pose


@dataclass(frozen=True, eq=False)
class SyntheticBundle:
    """Represents a generated scene with its ground truth."""

    spec: SceneSpec
    intrinsics: CameraIntrinsics
    reorient: RigidTransform
    sparse: SparseModel
    augmented: SparseModel
    rasters: dict[str, LabelRaster]
    manifest: Manifest
    truth: GroundTruth
    cameras: dict[str, GroundCamera]
    snow: dict[str, np.ndarray | None]


def _area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1))))


def _intrinsics(spec: SceneSpec) -> CameraIntrinsics:
    focal = spec.focal_ratio * spec.width
    cx, cy = spec.width / 2.0, spec.height / 2.0
    if spec.camera_model == CameraModel.SIMPLE_PINHOLE:
        params: tuple[float, ...] = (focal, cx, cy)
    else:
        params = (focal, focal, cx, cy)
    return CameraIntrinsics(1, spec.camera_model, spec.width, spec.height, params)


def _world_to_ground(spec: SceneSpec) -> RigidTransform:
    """Transform from the reconstruction frame to the ground frame."""
    normal = np.asarray(spec.plane_normal, dtype=float)
    scale = float(np.linalg.norm(normal))
    plane = PlaneModel(
        normal=tuple(float(value) for value in normal / scale),  # type: ignore[arg-type]
        offset=spec.plane_offset / scale,
        inlier_ids=frozenset(),
        inlier_threshold=1.0,
    )
    return reorientation_for_plane(plane)


def _camera(
    name: str,
    center: np.ndarray,
    yaw_deg: float,
    spec: SceneSpec,
    reorient: RigidTransform,
) -> GroundCamera:
    pitch = Rotation.from_euler("x", spec.pitch_deg, degrees=True).as_matrix()
    yaw = Rotation.from_euler("z", -yaw_deg, degrees=True).as_matrix()
    ground_rotation = pitch @ LEVEL_CAMERA @ yaw

    # Quaternions are what the reconstruction stores, poses are derived from them
    qvec = quaternion_from_rotation(ground_rotation @ reorient.matrix)
    rotation = rotation_from_quaternion(qvec)
    world_center = reorient.inverse_apply(center)[0]
    tvec = -rotation @ world_center
    return GroundCamera(
        name=name,
        rotation=rotation @ reorient.matrix.T,
        center=np.asarray(center, dtype=float),
        pose=Pose(qvec=qvec, tvec=(float(tvec[0]), float(tvec[1]), float(tvec[2]))),
    )


def _cameras(
    spec: SceneSpec, reorient: RigidTransform, rng: np.random.Generator
) -> tuple[list[GroundCamera], list[GroundCamera]]:
    references = []
    names = iter(spec.reference_names())
    for run in range(spec.runs):
        lateral = rng.uniform(-spec.lateral_jitter_m, spec.lateral_jitter_m)
        start = run * spec.spacing_m / spec.runs
        for index in range(spec.images_per_run):
            yaw = rng.uniform(-spec.yaw_jitter_deg, spec.yaw_jitter_deg)
            center = np.array([lateral, start + index * spec.spacing_m, spec.camera_height_m])
            references.append(_camera(next(names), center, yaw, spec, reorient))

    by_name = {camera.name: camera for camera in references}
    queries = []
    for query in spec.resolved_queries():
        if query.pose_of is not None:
            source = by_name[query.pose_of]
            queries.append(GroundCamera(query.name, source.rotation, source.center, source.pose))
            continue
        center = np.array(
            [query.lateral_m, query.position * spec.track_length_m, spec.camera_height_m]
        )
        queries.append(_camera(query.name, center, 0.0, spec, reorient))
    return references, queries


def _sample_polygon(vertices: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples inside a polygon, by rejection in its bounding box."""
    polygon = Polygon(vertices)
    low, high = vertices.min(axis=0), vertices.max(axis=0)
    samples = np.empty((0, 2))
    while len(samples) < count:
        batch = rng.uniform(low, high, size=(2 * count + 16, 2))
        samples = np.vstack([samples, batch[polygon.contains_points(batch)]])
    return samples[:count]


def _scene_points(spec: SceneSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Ground frame points on the road and sidewalk, then off-plane clutter."""
    polygons = [np.asarray(spec.road, dtype=float), np.asarray(spec.sidewalk, dtype=float)]
    inlier_count = int(round(spec.point_count * (1.0 - spec.outlier_fraction)))
    areas = np.array([_area(polygon) for polygon in polygons])
    counts = rng.multinomial(inlier_count, areas / areas.sum())
    ground = np.vstack(
        [_sample_polygon(polygon, count, rng) for polygon, count in zip(polygons, counts)]
    )
    ground = np.hstack([ground, np.zeros((len(ground), 1))])

    vertices = np.vstack(polygons)
    low = vertices.min(axis=0) - CLUTTER_MARGIN_M
    high = vertices.max(axis=0) + CLUTTER_MARGIN_M
    clutter_count = spec.point_count - inlier_count
    clutter = np.column_stack(
        [
            rng.uniform(low[0], high[0], clutter_count),
            rng.uniform(low[1], high[1], clutter_count),
            rng.uniform(*CLUTTER_HEIGHT_M, clutter_count),
        ]
    )
    colors = np.array([GROUND_COLOR] * len(ground) + [CLUTTER_COLOR] * clutter_count)
    return np.vstack([ground, clutter]), colors


def _reconstruction(
    intrinsics: CameraIntrinsics,
    cameras: Sequence[GroundCamera],
    world: np.ndarray,
    colors: np.ndarray,
    exact: np.ndarray,
    observed: np.ndarray,
    visible: np.ndarray,
) -> SparseModel:
    """
    Assemble a sparse model from the cameras and the points they see at least twice.
    Point identifiers follow the generation order.
    """
    kept = np.flatnonzero(visible.sum(axis=0) >= MIN_TRACK_LENGTH)
    point_ids = {int(index): position + 1 for position, index in enumerate(kept)}
    tracks: dict[int, list[TrackElement]] = {int(index): [] for index in kept}
    images = {}
    for camera_index, camera in enumerate(cameras):
        image_id = camera_index + 1
        observations = []
        for index in np.flatnonzero(visible[camera_index]):
            if int(index) not in point_ids:
                continue
            x, y = observed[camera_index, index]
            tracks[int(index)].append(TrackElement(image_id, len(observations)))
            observations.append(Observation(float(x), float(y), point_ids[int(index)]))
        images[image_id] = ImageRecord(
            image_id=image_id,
            name=camera.name,
            qvec=camera.pose.qvec,
            tvec=camera.pose.tvec,
            camera_id=intrinsics.camera_id,
            observations=tuple(observations),
        )

    points = {}
    for index in kept:
        index = int(index)
        residuals = [
            float(
                np.linalg.norm(
                    observed[element.image_id - 1, index] - exact[element.image_id - 1, index]
                )
            )
            for element in tracks[index]
        ]
        x, y, z = world[index]
        r, g, b = colors[index]
        points[point_ids[index]] = ScenePoint(
            point3d_id=point_ids[index],
            xyz=(float(x), float(y), float(z)),
            color=(int(r), int(g), int(b)),
            error=float(np.mean(residuals)),
            track=tuple(tracks[index]),
        )
    return SparseModel(cameras={intrinsics.camera_id: intrinsics}, images=images, points=points)


def _models(
    spec: SceneSpec, rng: np.random.Generator
) -> tuple[
    CameraIntrinsics,
    RigidTransform,
    list[GroundCamera],
    list[GroundCamera],
    SparseModel,
    SparseModel,
]:
    spec.check()
    intrinsics = _intrinsics(spec)
    reorient = _world_to_ground(spec)
    references, queries = _cameras(spec, reorient, rng)
    ground, colors = _scene_points(spec, rng)
    world = reorient.inverse_apply(ground)

    cameras = references + queries
    noise = rng.normal(0.0, spec.pixel_noise, size=(len(cameras), len(world), 2))
    exact = np.empty((len(cameras), len(world), 2))
    in_front = np.empty((len(cameras), len(world)), dtype=bool)
    for index, camera in enumerate(cameras):
        exact[index], in_front[index] = project_points(intrinsics, camera.pose, world)
    observed = exact + noise
    with np.errstate(invalid="ignore"):
        visible = (
            in_front
            & (observed[..., 0] >= 0)
            & (observed[..., 0] < spec.width)
            & (observed[..., 1] >= 0)
            & (observed[..., 1] < spec.height)
        )

    count = len(references)
    sparse = _reconstruction(
        intrinsics, references, world, colors, exact[:count], observed[:count], visible[:count]
    )
    augmented = _reconstruction(intrinsics, cameras, world, colors, exact, observed, visible)
    return intrinsics, reorient, references, queries, sparse, augmented


def sparse_scene(spec: SceneSpec) -> tuple[SparseModel, SparseModel]:
    """
    Generate only the reference and augmented sparse models of a scene.

    Raises:
        InvalidSpecError: if the spec can't be generated.
    """
    *_, sparse, augmented = _models(spec, np.random.default_rng(spec.seed))
    return sparse, augmented


def _snow_polygon(spec: SceneSpec, query: QuerySpec) -> np.ndarray | None:
    """Snow band along the outer edge of the sidewalk, away from the road."""
    if query.scenario == SnowScenario.NONE:
        return None
    sidewalk = np.asarray(spec.sidewalk, dtype=float)
    road = np.asarray(spec.road, dtype=float)
    outward = 1.0 if sidewalk[:, 0].mean() >= road[:, 0].mean() else -1.0
    outer = sidewalk[:, 0].max() if outward > 0 else sidewalk[:, 0].min()
    width = float(np.ptp(sidewalk[:, 0]))
    if query.scenario == SnowScenario.COVERS_SIDEWALK:
        start = outer - outward * query.fraction * width
        end = outer + outward * spec.snow_margin_m
    else:
        start = outer + outward * spec.beside_gap_m
        end = start + outward * spec.beside_width_m
    low, high = min(start, end), max(start, end)
    y_low, y_high = sidewalk[:, 1].min(), sidewalk[:, 1].max()
    return np.array([[low, y_low], [high, y_low], [high, y_high], [low, y_high]])


def _ground_hits(
    intrinsics: CameraIntrinsics, camera: GroundCamera, max_range: float
) -> tuple[np.ndarray, np.ndarray]:
    """
    Intersect the rays through every pixel center with the ground.

    Returns:
        (height * width, 2) ground points in row-major order and the mask of rays hitting
        the ground within range.
    """
    width, height = intrinsics.width, intrinsics.height
    fx, fy = intrinsics.focal
    cx, cy = intrinsics.principal_point
    us, vs = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    rays = np.column_stack(
        [((us - cx) / fx).ravel(), ((vs - cy) / fy).ravel(), np.ones(width * height)]
    )
    directions = rays @ camera.rotation
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = -camera.center[2] / directions[:, 2]
    hits = camera.center[:2] + scale[:, None] * directions[:, :2]
    reach = scale * np.linalg.norm(directions, axis=1)
    valid = (directions[:, 2] < 0) & (reach <= max_range)
    return hits, valid


def _inside(polygon: np.ndarray | list, hits: np.ndarray, valid: np.ndarray) -> np.ndarray:
    inside = np.zeros(len(hits), dtype=bool)
    inside[valid] = Polygon(np.asarray(polygon, dtype=float)).contains_points(hits[valid])
    return inside


def _render(
    spec: SceneSpec,
    intrinsics: CameraIntrinsics,
    camera: GroundCamera,
    snow: np.ndarray | None,
) -> LabelRaster:
    hits, valid = _ground_hits(intrinsics, camera, spec.max_range_m)
    labels = np.full(len(hits), Category.VOID, dtype=np.uint8)
    labels[_inside(spec.road, hits, valid)] = Category.ROAD
    labels[_inside(spec.sidewalk, hits, valid)] = Category.SIDEWALK
    if snow is not None:
        labels[_inside(snow, hits, valid)] = Category.SNOW
    return LabelRaster.from_grid(labels.reshape(intrinsics.height, intrinsics.width))


def _coverage(
    spec: SceneSpec, intrinsics: CameraIntrinsics, camera: GroundCamera, snow: np.ndarray | None
) -> float:
    if snow is None:
        return 0.0
    hits, valid = _ground_hits(intrinsics, camera, spec.max_range_m)
    sidewalk = _inside(spec.sidewalk, hits, valid)
    total = int(np.count_nonzero(sidewalk))
    if total == 0:
        return 0.0
    return int(np.count_nonzero(sidewalk & _inside(snow, hits, valid))) / total


def true_homography(
    intrinsics: CameraIntrinsics, pose: Pose, reorient: RigidTransform
) -> Homography:
    """
    Returns:
        the exact homography from image pixels to ground coordinates of the re-oriented frame.
    """
    fx, fy = intrinsics.focal
    cx, cy = intrinsics.principal_point
    calibration = np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])
    rotation = rotation_from_quaternion(pose.qvec)
    ground_to_camera = rotation @ reorient.matrix.T
    origin = np.asarray(pose.tvec) - ground_to_camera @ np.asarray(reorient.translation)
    projection = calibration @ np.column_stack(
        [ground_to_camera[:, 0], ground_to_camera[:, 1], origin]
    )
    return Homography.from_matrix(np.linalg.inv(projection))


def generate(spec: SceneSpec) -> SyntheticBundle:
    """
    Generate a synthetic scene: reconstructions, label rasters, manifest and ground truth.
    The bundle is deterministic for a fixed seed.

    Raises:
        InvalidSpecError: if the spec can't be generated.
    """
    rng = np.random.default_rng(spec.seed)
    intrinsics, reorient, references, queries, sparse, augmented = _models(spec, rng)

    snow = {query.name: _snow_polygon(spec, query) for query in spec.resolved_queries()}
    rasters = {
        camera.name: _render(spec, intrinsics, camera, snow.get(camera.name))
        for camera in references + queries
    }

    origin = spec.origin
    images = []
    for camera, role, query in [
        *((camera, ImageRole.REFERENCE, None) for camera in references),
        *zip(queries, [ImageRole.QUERY] * len(queries), spec.resolved_queries()),
    ]:
        north = float(camera.center[1]) + (query.gps_offset_m if query else 0.0)
        gps = offset_geo(origin, north_m=north, east_m=float(camera.center[0]))
        images.append(
            ManifestImage(
                name=camera.name,
                role=role,
                lat=gps.lat,
                lon=gps.lon,
                raster=f"{Constants.RASTERS_DIR_NAME}/{Path(camera.name).stem}.pgm",
                category=query.category if query else None,
            )
        )
    manifest = Manifest(
        scene=ManifestScene(
            scene_id=spec.scene_id,
            centroid=offset_geo(origin, north_m=spec.track_length_m / 2.0, east_m=0.0),
            radius_m=spec.radius_m,
        ),
        images=images,
    )

    normal = np.asarray(spec.plane_normal, dtype=float)
    truth = GroundTruth(
        plane_normal=[float(value) for value in normal / np.linalg.norm(normal)],
        plane_offset=float(spec.plane_offset / np.linalg.norm(normal)),
        homographies={
            camera.name: [list(row) for row in true_homography(intrinsics, camera.pose, reorient).h]
            for camera in references
        },
        coverage={
            camera.name: _coverage(spec, intrinsics, camera, snow[camera.name])
            for camera in queries
        },
    )
    return SyntheticBundle(
        spec=spec,
        intrinsics=intrinsics,
        reorient=reorient,
        sparse=sparse,
        augmented=augmented,
        rasters=rasters,
        manifest=manifest,
        truth=truth,
        cameras={camera.name: camera for camera in references + queries},
        snow=snow,
    )


def true_coverage(bundle: SyntheticBundle, name: str) -> float:
    """
    Compute the share of sidewalk pixels covered by snow in a query, from the scene
    polygons only.

    Raises:
        UnknownQueryError: if the bundle has no such query.
    """
    if name not in bundle.snow:
        raise UnknownQueryError(name)
    return _coverage(bundle.spec, bundle.intrinsics, bundle.cameras[name], bundle.snow[name])


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _write(path: Path, lines: list[str]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", Constants.ENCODING_UTF_8)
    except OSError as err:
        raise IoFailureError(path, "write") from err


def write_sparse_model(model: SparseModel, model_dir: Path) -> None:
    """
    Write a sparse model in the text layout, with numbers rendered losslessly.

    Raises:
        IoFailureError: if a file can't be written.
    """
    cameras = [
        "# Camera list with one line of data per camera:",
        "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]",
        f"# Number of cameras: {len(model.cameras)}",
    ]
    for camera_id in sorted(model.cameras):
        camera = model.cameras[camera_id]
        params = " ".join(_fmt(value) for value in camera.params)
        cameras.append(f"{camera_id} {camera.model} {camera.width} {camera.height} {params}")

    observation_count = sum(len(image.observations) for image in model.images.values())
    mean = observation_count / len(model.images) if model.images else 0.0
    images = [
        "# Image list with two lines of data per image:",
        "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
        "#   POINTS2D[] as (X, Y, POINT3D_ID)",
        f"# Number of images: {len(model.images)}, mean observations per image: {mean:.17g}",
    ]
    for image_id in sorted(model.images):
        image = model.images[image_id]
        pose = " ".join(_fmt(value) for value in (*image.qvec, *image.tvec))
        images.append(f"{image_id} {pose} {image.camera_id} {image.name}")
        images.append(
            " ".join(
                f"{_fmt(observation.x)} {_fmt(observation.y)} "
                f"{-1 if observation.point3d_id is None else observation.point3d_id}"
                for observation in image.observations
            )
        )

    track_count = sum(len(point.track) for point in model.points.values())
    mean_track = track_count / len(model.points) if model.points else 0.0
    points = [
        "# 3D point list with one line of data per point:",
        "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)",
        f"# Number of points: {len(model.points)}, mean track length: {mean_track:.17g}",
    ]
    for point_id in sorted(model.points):
        point = model.points[point_id]
        xyz = " ".join(_fmt(value) for value in point.xyz)
        rgb = " ".join(str(value) for value in point.color)
        track = " ".join(f"{element.image_id} {element.point2d_idx}" for element in point.track)
        points.append(f"{point_id} {xyz} {rgb} {_fmt(point.error)} {track}")

    _write(model_dir / CAMERAS_FILE_NAME, cameras)
    _write(model_dir / IMAGES_FILE_NAME, images)
    _write(model_dir / POINTS_FILE_NAME, points)


def write_bundle(bundle: SyntheticBundle, out_dir: Path) -> None:
    """
    Write a bundle: sparse and augmented models, rasters, manifest and ground truth.

    Raises:
        IoFailureError: if a file can't be written.
    """
    write_sparse_model(bundle.sparse, out_dir / Constants.SPARSE_DIR_NAME)
    write_sparse_model(bundle.augmented, out_dir / Constants.AUGMENTED_DIR_NAME)
    for image in bundle.manifest.images:
        write_label_raster(bundle.rasters[image.name], out_dir / image.raster)
    bundle.manifest.write(out_dir / Constants.MANIFEST_FILE_NAME)
    # noinspection PyUnresolvedReferences
    truth = json.dumps(bundle.truth.to_dict(), indent=2, sort_keys=True)  # type: ignore[attr-defined]
    _write(out_dir / Constants.TRUTH_FILE_NAME, [truth])
