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
from enum import IntEnum
from pathlib import Path


class ExitCode(IntEnum):
    """Process exit codes of the command line."""

    OK = 0
    USAGE = 1
    FAILURE = 2
    IO = 3
    UNREGISTERED = 4


class ExplainedError(Exception):
    """
    Represents an explained error.
    The error should contain the cause and a possible resolution.
    """

    exit_code: ExitCode = ExitCode.FAILURE

    def __init__(self, cause: str, resolution: str | None = None) -> None:
        """Init explained error."""
        super().__init__(cause)
        self.__cause = cause
        self.__resolution = resolution

    @property
    def cause(self) -> str:
        """
        Returns:
            cause of the error.
        """
        return self.__cause

    @property
    def resolution(self) -> str | None:
        """
        Returns:
            possible resolution of the error.
        """
        return self.__resolution


class InvalidParameterError(ExplainedError):
    """Represents an out of domain parameter."""

    exit_code = ExitCode.USAGE

    def __init__(self, name: str, value: object, expected: str) -> None:
        """Init invalid parameter error."""
        super().__init__(
            cause=f"The parameter `{name}` has an invalid value `{value}`",
            resolution=f"Use a value {expected}.",
        )
        self.name = name
        self.value = value


class IoFailureError(ExplainedError):
    """Represents a failure to read or write an artifact."""

    exit_code = ExitCode.IO

    def __init__(self, path: Path, action: str) -> None:
        """Init io failure error."""
        super().__init__(
            cause=f"Unable to {action} `{path.as_posix()}`",
            resolution="Check the path exists and permissions are correct.",
        )
        self.path = path


class SparseModelError(ExplainedError):
    """Represents an invalid sparse reconstruction."""

    exit_code = ExitCode.IO


class MissingFileError(SparseModelError):
    """Represents a missing sparse model file."""

    def __init__(self, name: str) -> None:
        """Init missing file error."""
        super().__init__(
            cause=f"Missing `{name}` in the sparse model directory",
            resolution="Export the reconstruction as text (cameras.txt, images.txt, points3D.txt).",
        )
        self.name = name


class MalformedLineError(SparseModelError):
    """Represents a line that doesn't follow the sparse text layout."""

    def __init__(self, file: str, line: int, reason: str) -> None:
        """Init malformed line error."""
        super().__init__(
            cause=f"Malformed line {line} in `{file}`: {reason}",
            resolution="Re-export the reconstruction or fix the line by hand.",
        )
        self.file = file
        self.line = line
        self.reason = reason


class DanglingReferenceError(SparseModelError):
    """Represents a cross reference that doesn't resolve."""

    def __init__(self, kind: str, identifier: int) -> None:
        """Init dangling reference error."""
        super().__init__(
            cause=f"The {kind} `{identifier}` is referenced but not consistent with the model",
            resolution="Ensure the three model files come from the same reconstruction.",
        )
        self.kind = kind
        self.identifier = identifier


class UnsupportedCameraModelError(SparseModelError):
    """Represents a camera model that can't be projected."""

    def __init__(self, name: str) -> None:
        """Init unsupported camera model error."""
        super().__init__(
            cause=f"The camera model `{name}` isn't supported",
            resolution="Use SIMPLE_PINHOLE, PINHOLE or SIMPLE_RADIAL when reconstructing.",
        )
        self.name = name


class DegenerateModelError(SparseModelError):
    """Represents a model too small to be used."""

    def __init__(self, images: int, points: int) -> None:
        """Init degenerate model error."""
        super().__init__(
            cause=f"The sparse model only has {images} images and {points} points",
            resolution="A usable model needs at least 2 images and 10 points.",
        )
        self.images = images
        self.points = points


class UnknownImageError(SparseModelError):
    """Represents an image missing from the model."""

    def __init__(self, identifier: int | str) -> None:
        """Init unknown image error."""
        super().__init__(
            cause=f"The image `{identifier}` isn't part of the sparse model",
            resolution="Check the image identifier or name.",
        )
        self.identifier = identifier


class GeometryError(ExplainedError):
    """Represents a failure of a geometric estimation."""


class NonUnitQuaternionError(GeometryError):
    """Represents a quaternion that isn't normalized."""

    def __init__(self, norm: float) -> None:
        """Init non unit quaternion error."""
        super().__init__(
            cause=f"The quaternion norm is {norm!r}, expected 1",
            resolution="Normalize the quaternion before building a rotation.",
        )
        self.norm = norm


class InsufficientPointsError(GeometryError):
    """Represents too few points to fit a plane."""

    def __init__(self, count: int) -> None:
        """Init insufficient points error."""
        super().__init__(
            cause=f"Only {count} points are available to fit a plane",
            resolution="At least 3 non collinear points are required.",
        )
        self.count = count


class DegenerateInputError(GeometryError):
    """Represents a collinear point set."""

    def __init__(self) -> None:
        """Init degenerate input error."""
        super().__init__(
            cause="All candidate points are collinear",
            resolution="Provide points spanning a surface.",
        )


class InsufficientCorrespondencesError(GeometryError):
    """Represents too few correspondences to estimate a homography."""

    def __init__(self, count: int) -> None:
        """Init insufficient correspondences error."""
        super().__init__(
            cause=f"Only {count} correspondences are available",
            resolution="At least 4 correspondences are required.",
        )
        self.count = count


class DegenerateConfigurationError(GeometryError):
    """Represents a correspondence set without a usable sample."""

    def __init__(self, iterations: int) -> None:
        """Init degenerate configuration error."""
        super().__init__(
            cause=f"No non degenerate sample was found in {iterations} iterations",
            resolution="Check the correspondences aren't collinear.",
        )
        self.iterations = iterations


class PointAtInfinityError(GeometryError):
    """Represents a point mapped to infinity by a homography."""

    def __init__(self, point: tuple[float, float]) -> None:
        """Init point at infinity error."""
        super().__init__(cause=f"The point `{point}` maps to infinity")
        self.point = point


class RasterError(ExplainedError):
    """Represents an unreadable label raster."""

    exit_code = ExitCode.IO


class MalformedPgmError(RasterError):
    """Represents a file that isn't a binary PGM."""

    def __init__(self, path: Path, reason: str) -> None:
        """Init malformed pgm error."""
        super().__init__(
            cause=f"Invalid PGM file at `{path.as_posix()}`: {reason}",
            resolution="Export labels as binary PGM (P5) with maxval 255.",
        )
        self.path = path
        self.reason = reason


class IllegalLabelValueError(RasterError):
    """Represents a label outside the category contract."""

    def __init__(self, value: int, index: int) -> None:
        """Init illegal label value error."""
        super().__init__(
            cause=f"Illegal label `{value}` at index {index}",
            resolution="Map categories to 0=void, 1=road, 2=sidewalk, 3=snow.",
        )
        self.value = value
        self.index = index


class MaskError(ExplainedError):
    """Represents an invalid pixel set operation."""


class EmptySubjectError(MaskError):
    """Represents an overlap computed on an empty subject."""

    def __init__(self) -> None:
        """Init empty subject error."""
        super().__init__(cause="The subject pixel set is empty")


class DimensionMismatchError(MaskError):
    """Represents rasters or pixel sets of different sizes."""

    def __init__(self, expected: tuple[int, int], actual: tuple[int, int]) -> None:
        """Init dimension mismatch error."""
        super().__init__(
            cause=f"Expected dimensions {expected[0]}x{expected[1]}, got {actual[0]}x{actual[1]}",
            resolution="Ensure rasters match the camera resolution.",
        )
        self.expected = expected
        self.actual = actual


class SidewalkModelError(ExplainedError):
    """Represents a failure to build a sidewalk model."""


class MissingRasterError(SidewalkModelError):
    """Represents a reference image without label raster."""

    def __init__(self, name: str) -> None:
        """Init missing raster error."""
        super().__init__(
            cause=f"The reference image `{name}` has no label raster",
            resolution="Add the raster path to the manifest.",
        )
        self.name = name


class NoCorrespondencesError(SidewalkModelError):
    """Represents an image with too few road correspondences."""

    def __init__(self, image: str, count: int) -> None:
        """Init no correspondences error."""
        super().__init__(
            cause=f"The image `{image}` only has {count} road correspondences on the ground plane",
            resolution="At least 4 are required to estimate a homography.",
        )
        self.image = image
        self.count = count


class PlaneFitFailedError(SidewalkModelError):
    """Represents a ground plane that can't be estimated."""

    def __init__(self, reason: str) -> None:
        """Init plane fit failed error."""
        super().__init__(
            cause=f"Unable to estimate the ground plane: {reason}",
            resolution="Check road labels overlap with reconstructed points.",
        )


class HomographyFailedError(SidewalkModelError):
    """Represents an image whose homography can't be estimated."""

    def __init__(self, image: str, reason: str) -> None:
        """Init homography failed error."""
        super().__init__(cause=f"Unable to estimate the homography of `{image}`: {reason}")
        self.image = image


class ModelEmptyError(SidewalkModelError):
    """Represents a model without any sidewalk point."""

    def __init__(self) -> None:
        """Init model empty error."""
        super().__init__(
            cause="No sidewalk point could be projected on the ground plane",
            resolution="Check reference rasters contain sidewalk pixels near the vehicle.",
        )


class ModelFileError(ExplainedError):
    """Represents an unreadable sidewalk model file."""

    exit_code = ExitCode.IO


class VersionMismatchError(ModelFileError):
    """Represents a model file of another version."""

    def __init__(self, path: Path, version: str) -> None:
        """Init version mismatch error."""
        super().__init__(
            cause=f"The model file `{path.as_posix()}` has version `{version}`",
            resolution="Rebuild the model with this version of snowpath.",
        )
        self.version = version


class ChecksumMismatchError(ModelFileError):
    """Represents a corrupted model file."""

    def __init__(self, path: Path) -> None:
        """Init checksum mismatch error."""
        super().__init__(
            cause=f"The checksum of `{path.as_posix()}` doesn't match its content",
            resolution="The file is corrupted, rebuild the model.",
        )


class MalformedModelFileError(ModelFileError):
    """Represents a model file that can't be parsed."""

    def __init__(self, path: Path, reason: str) -> None:
        """Init malformed model file error."""
        super().__init__(
            cause=f"Malformed model file `{path.as_posix()}`: {reason}",
            resolution="The file is probably truncated, rebuild the model.",
        )
        self.reason = reason


class ClassificationError(ExplainedError):
    """Represents a query that can't be classified."""


class EmptyProjectionError(ClassificationError):
    """Represents a sidewalk model invisible from the query pose."""

    def __init__(self, name: str) -> None:
        """Init empty projection error."""
        super().__init__(
            cause=f"No sidewalk point projects into the query `{name}`",
            resolution="The query pose probably doesn't belong to this scene.",
        )
        self.name = name


class UnregisteredQueryError(ClassificationError):
    """Represents a query without estimated pose."""

    exit_code = ExitCode.UNREGISTERED

    def __init__(self, name: str) -> None:
        """Init unregistered query error."""
        super().__init__(
            cause=f"The query `{name}` isn't registered in the augmented model",
            resolution="Re-run the reconstruction with the query until it gets a pose.",
        )
        self.name = name


class EvaluationError(ExplainedError):
    """Represents an evaluation failure."""


class UnknownSceneError(EvaluationError):
    """Represents a labeled query without sidewalk model."""

    def __init__(self, query: str, scene: str) -> None:
        """Init unknown scene error."""
        super().__init__(
            cause=f"The query `{query}` belongs to scene `{scene}` which has no sidewalk model",
            resolution="Pass the model built for this scene.",
        )
        self.query = query
        self.scene = scene


class NoBandError(EvaluationError):
    """Represents a sweep without acceptable threshold."""

    def __init__(self, floor_pct: float) -> None:
        """Init no band error."""
        super().__init__(cause=f"No threshold reaches {floor_pct:.2f}% for every category")
        self.floor_pct = floor_pct


class NoLabeledQueriesError(EvaluationError):
    """Represents a manifest without labeled queries."""

    def __init__(self) -> None:
        """Init no labeled queries error."""
        super().__init__(
            cause="No query carries a category label",
            resolution="Add `category` to the query entries of the manifest.",
        )


class ManifestError(ExplainedError):
    """Represents an invalid manifest."""

    exit_code = ExitCode.USAGE


class InvalidManifestError(ManifestError):
    """Represents an invalid manifest error."""

    def __init__(self, path: Path, reason: str | None = None) -> None:
        """Init invalid manifest error."""
        details = f": {reason}" if reason else ""
        super().__init__(
            cause=f"Invalid manifest file at `{path.as_posix()}`{details}",
            resolution="Check the syntax or the version of the manifest.",
        )


class VersionManifestError(ManifestError):
    """Represents an version manifest error."""

    def __init__(self, version: str) -> None:
        """Init version manifest error."""
        super().__init__(
            cause=f"Manifest version `v{version}` isn't supported",
            resolution="Upgrade `snowpath` version or downgrade manifest version.",
        )


class MissingManifestError(ManifestError):
    """Represents a missing manifest error."""

    def __init__(self, path: Path) -> None:
        """Init missing manifest error."""
        super().__init__(
            cause=f"Missing manifest file at `{path.as_posix()}`",
            resolution="Create a manifest or use another location.",
        )


class UnreadableManifestError(ManifestError):
    """Represents an unreadable manifest error"""

    def __init__(self, path: Path) -> None:
        """Init unreadable manifest error."""
        super().__init__(
            cause=f"Unreadable manifest file at `{path.as_posix()}`",
            resolution="Use the right user or change permissions.",
        )


class UnknownQueryNameError(ManifestError):
    """Represents a query name missing from the manifest."""

    def __init__(self, name: str) -> None:
        """Init unknown query name error."""
        super().__init__(
            cause=f"The query `{name}` isn't declared in the manifest",
            resolution="Add an entry with role `query` for this image.",
        )
        self.name = name


class InvalidSpecError(ExplainedError):
    """Represents an invalid synthetic scene spec."""

    exit_code = ExitCode.USAGE

    def __init__(self, reason: str) -> None:
        """Init invalid spec error."""
        super().__init__(
            cause=f"Invalid scene spec: {reason}",
            resolution="Check the spec against the documented fields.",
        )
        self.reason = reason


class UnknownQueryError(InvalidSpecError):
    """Represents a query missing from a synthetic bundle."""

    def __init__(self, name: str) -> None:
        """Init unknown query error."""
        super().__init__(reason=f"the bundle has no query `{name}`")
        self.name = name
