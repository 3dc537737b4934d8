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
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Final

import numpy as np
from scipy import ndimage

from .colmap import CameraIntrinsics, Pose, SparseModel
from .exceptions import (
    DimensionMismatchError,
    EmptyProjectionError,
    InvalidParameterError,
    UnknownImageError,
    UnregisteredQueryError,
)
from .geo import GeoPoint, haversine_distance
from .geometry import project_points
from .masks import Category, LabelRaster, PixelSet, category_pixels, overlap_ratio, write_pgm
from .sidewalk import SceneDescriptor, SidewalkModel
from .utils import Constants

# Splat radius at the reference resolution, scaled with the image width
REFERENCE_SPLAT_RADIUS: Final[float] = 2.0
REFERENCE_WIDTH: Final[int] = 1920


class Outcome(StrEnum):
    """Represents the outcome of a query classification."""

    OUT_OF_SCENE = "OutOfScene"
    NO_SNOW = "NoSnow"
    CLEAR = "Clear"
    SNOW_COVERED = "SnowCovered"

    @property
    def reported(self) -> "Outcome":
        """
        Returns:
            the outcome shown to users, a query without snow is clear.
        """
        return Outcome.CLEAR if self == Outcome.NO_SNOW else self


@dataclass(frozen=True)
class QueryInput:
    """Represents a query image registered in the augmented reconstruction."""

    name: str
    gps: GeoPoint
    pose: Pose
    intrinsics: CameraIntrinsics
    raster: LabelRaster

    def __post_init__(self) -> None:
        expected = (self.intrinsics.width, self.intrinsics.height)
        if self.raster.size != expected:
            raise DimensionMismatchError(expected, self.raster.size)

    @staticmethod
    def from_model(
        model: SparseModel, name: str, gps: GeoPoint, raster: LabelRaster
    ) -> "QueryInput":
        """
        Extract the query pose from the augmented reconstruction.

        Raises:
            UnregisteredQueryError: if the query has no pose in the reconstruction.
        """
        try:
            image = model.image_by_name(name)
        except UnknownImageError as err:
            raise UnregisteredQueryError(name) from err
        return QueryInput(
            name=name,
            gps=gps,
            pose=image.pose,
            intrinsics=model.camera_of(image),
            raster=raster,
        )


@dataclass(frozen=True)
class ClassifyParams:
    """Parameters of a query classification."""

    splat_radius: float | None = None
    min_snow_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.splat_radius is not None and self.splat_radius < 0:
            raise InvalidParameterError("splat_radius", self.splat_radius, "greater or equal to 0")
        if not 0.0 <= self.min_snow_fraction < 1.0:
            raise InvalidParameterError("min_snow_fraction", self.min_snow_fraction, "in [0, 1)")

    def radius_for(self, width: int) -> float:
        """
        Returns:
            the splat radius used for an image width.
        """
        if self.splat_radius is not None:
            return self.splat_radius
        return REFERENCE_SPLAT_RADIUS * width / REFERENCE_WIDTH


@dataclass(frozen=True)
class Measurement:
    """Represents the threshold independent part of a classification."""

    name: str
    outcome: Outcome | None
    coverage: float | None = None
    projected: PixelSet | None = None
    snow: PixelSet | None = None

    @property
    def projected_count(self) -> int:
        return 0 if self.projected is None else len(self.projected)


@dataclass(frozen=True)
class Verdict:
    """Represents the classification of a query at a threshold."""

    name: str
    outcome: Outcome
    coverage: float | None
    threshold: float
    projected_count: int
    overlay: Path | None = None

    def __post_init__(self) -> None:
        measured = self.outcome in (Outcome.CLEAR, Outcome.SNOW_COVERED)
        if measured != (self.coverage is not None):
            raise ValueError(f"coverage must be present iff outcome is measured: {self}")

    @property
    def is_alert(self) -> bool:
        return self.outcome == Outcome.SNOW_COVERED

    def line(self) -> str:
        """
        Returns:
            the result line `NAME outcome coverage threshold`.
        """
        coverage = "-" if self.coverage is None else f"{self.coverage:.2f}"
        return f"{self.name} {self.outcome.reported} {coverage} {self.threshold:.2f}"


def gps_gate(gps: GeoPoint, scene: SceneDescriptor) -> bool:
    """
    Returns:
        true if the position lies within the scene radius, boundary included.
    """
    return haversine_distance(gps, scene.centroid) <= scene.radius_m


def snow_present(raster: LabelRaster, min_fraction: float = 0.0) -> bool:
    """
    Returns:
        true if the share of snow pixels exceeds the minimal fraction.
    """
    if not 0.0 <= min_fraction < 1.0:
        raise InvalidParameterError("min_fraction", min_fraction, "in [0, 1)")
    snow = int(np.count_nonzero(raster.grid == Category.SNOW))
    return snow / (raster.width * raster.height) > min_fraction


def _disc(radius: float) -> np.ndarray:
    extent = int(np.floor(radius))
    offsets = np.arange(-extent, extent + 1)
    return offsets[None, :] ** 2 + offsets[:, None] ** 2 <= radius * radius


def project_sidewalk(model: SidewalkModel, query: QueryInput, splat_radius: float) -> PixelSet:
    """
    Project the sidewalk model into a query image.

    Args:
        model: sidewalk model of the scene.
        query: query image.
        splat_radius: radius of the disc drawn around each projected point, in pixels.
    Raises:
        EmptyProjectionError: if no point lands in the image.
    """
    if splat_radius < 0:
        raise InvalidParameterError("splat_radius", splat_radius, "greater or equal to 0")
    width, height = query.intrinsics.width, query.intrinsics.height
    pixels, in_front = project_points(query.intrinsics, query.pose, model.world_points())
    pixels = pixels[in_front]
    inside = (
        (pixels[:, 0] >= 0) & (pixels[:, 0] < width) & (pixels[:, 1] >= 0) & (pixels[:, 1] < height)
    )
    if not np.any(inside):
        raise EmptyProjectionError(query.name)

    indices = np.floor(pixels[inside]).astype(np.int64)
    members = np.zeros((height, width), dtype=bool)
    members[indices[:, 1], indices[:, 0]] = True
    if splat_radius >= 1.0:
        members = ndimage.binary_dilation(members, structure=_disc(splat_radius))
    return PixelSet(width, height, members)


def measure(
    model: SidewalkModel, query: QueryInput, params: ClassifyParams = ClassifyParams()
) -> Measurement:
    """
    Run the gates and compute the snow coverage of the projected sidewalk.

    Raises:
        EmptyProjectionError: if the sidewalk model isn't visible from the query.
    """
    if not gps_gate(query.gps, model.scene):
        return Measurement(query.name, Outcome.OUT_OF_SCENE)
    snow = category_pixels(query.raster, Category.SNOW)
    if not snow_present(query.raster, params.min_snow_fraction):
        return Measurement(query.name, Outcome.NO_SNOW, snow=snow)
    projected = project_sidewalk(model, query, params.radius_for(query.intrinsics.width))
    return Measurement(
        query.name,
        outcome=None,
        coverage=overlap_ratio(projected, snow),
        projected=projected,
        snow=snow,
    )


def _check_threshold(threshold: float) -> None:
    if not 0.0 <= threshold <= 1.0:
        raise InvalidParameterError("threshold", threshold, "in [0, 1]")


def verdict_for(
    measurement: Measurement, threshold: float, overlay: Path | None = None
) -> Verdict:
    """
    Compare a measurement with an alert threshold, ties being clear.
    """
    _check_threshold(threshold)
    outcome = measurement.outcome
    if outcome is None:
        assert measurement.coverage is not None
        outcome = Outcome.SNOW_COVERED if measurement.coverage > threshold else Outcome.CLEAR
    return Verdict(
        name=measurement.name,
        outcome=outcome,
        coverage=measurement.coverage,
        threshold=threshold,
        projected_count=measurement.projected_count,
        overlay=overlay,
    )


def write_overlay(measurement: Measurement, width: int, height: int, path: Path) -> None:
    """
    Write the diagnostics overlay: 1 projected sidewalk, 2 snow, 3 both.
    """
    codes = np.zeros((height, width), dtype=np.uint8)
    if measurement.projected is not None:
        codes[measurement.projected.members] += 1
    if measurement.snow is not None:
        codes[measurement.snow.members] += 2
    write_pgm(path, codes)


def classify(
    model: SidewalkModel,
    query: QueryInput,
    threshold: float = Constants.DEFAULT_THRESHOLD,
    params: ClassifyParams = ClassifyParams(),
    overlay: Path | None = None,
) -> Verdict:
    """
    Classify a query image as snow covered or clear.

    Args:
        model: sidewalk model of the scene.
        query: query image.
        threshold: alert threshold, coverages above it are snow covered.
        params: classification parameters.
        overlay: optional path of the diagnostics overlay.
    Raises:
        InvalidParameterError: if the threshold isn't in [0, 1].
        EmptyProjectionError: if the sidewalk model isn't visible from the query.
    """
    _check_threshold(threshold)
    measurement = measure(model, query, params)
    if overlay is not None:
        write_overlay(measurement, query.intrinsics.width, query.intrinsics.height, overlay)
    return verdict_for(measurement, threshold, overlay)
