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
import os
import pkgutil
from dataclasses import dataclass, field, replace
from enum import StrEnum
from pathlib import Path
from typing import Any

from dataclasses_json import dataclass_json
from jsonschema.exceptions import ValidationError
from jsonschema.validators import validate

from .evaluation import QueryCategory
from .exceptions import (
    InvalidManifestError,
    IoFailureError,
    MissingManifestError,
    UnknownQueryNameError,
    UnreadableManifestError,
    VersionManifestError,
)
from .geo import GeoPoint
from .masks import LabelRaster, load_label_raster
from .sidewalk import SceneDescriptor
from .utils import Constants

MANIFEST_VERSION = "1.0"


class ImageRole(StrEnum):
    """Represents the role of an image in a scene."""

    REFERENCE = "reference"
    QUERY = "query"


@dataclass_json
@dataclass(frozen=True)
class ManifestScene:
    """Represents the scene block of a manifest."""

    scene_id: str
    centroid: GeoPoint
    radius_m: float


@dataclass_json
@dataclass(frozen=True)
class ManifestImage:
    """Represents an image entry of a manifest."""

    name: str
    role: ImageRole
    lat: float
    lon: float
    raster: str
    category: QueryCategory | None = None

    @property
    def gps(self) -> GeoPoint:
        return GeoPoint(lat=self.lat, lon=self.lon)


def load_schema(kind: str, version: str) -> dict[str, Any]:
    """
    Load a versioned schema bundled with the package.

    Raises:
        FileNotFoundError: if no schema exists for this version.
    """
    schema = pkgutil.get_data(__name__, f"schemas/{kind}_schema_v{version}.json")
    if not schema:
        raise FileNotFoundError(f"The schema `schemas/{kind}_schema_v{version}.json` can't be found")
    return json.loads(schema)


@dataclass_json
@dataclass(frozen=True)
class Manifest:
    """Represents a scene manifest."""

    scene: ManifestScene
    images: list[ManifestImage] = field(default_factory=list)
    version: str = MANIFEST_VERSION

    @staticmethod
    def from_file(path: Path) -> "Manifest":
        """
        Read a scene manifest, raster paths being resolved against its directory.

        Args:
            path: path to manifest.
        Raises:
            MissingManifestError: if the manifest is missing.
            UnreadableManifestError: if the manifest can't be read.
            VersionManifestError: if the version manifest isn't supported.
            InvalidManifestError: if the manifest isn't valid.
        """
        if not path.exists() or not path.is_file():
            raise MissingManifestError(path)
        if not os.access(path.as_posix(), os.R_OK):
            raise UnreadableManifestError(path)

        with path.open(
            Constants.FILE_MODE_READ, encoding=Constants.ENCODING_UTF_8
        ) as file_descriptor:
            try:
                data = json.load(file_descriptor)
            except json.JSONDecodeError as err:
                raise InvalidManifestError(path, err.msg) from err
        if not isinstance(data, dict):
            raise InvalidManifestError(path, "expected an object")

        # Check version
        version = str(data.get("version", MANIFEST_VERSION))
        try:
            schema = load_schema("manifest", version)
        except FileNotFoundError as err:
            raise VersionManifestError(version) from err

        # Validate manifest
        try:
            validate(instance=data, schema=schema)
        except ValidationError as err:
            raise InvalidManifestError(path, err.message) from err
        # noinspection PyUnresolvedReferences
        manifest: Manifest = Manifest.from_dict(data)  # type: ignore[attr-defined]

        names = [image.name for image in manifest.images]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise InvalidManifestError(path, f"duplicated image names {duplicates}")
        images = []
        for image in manifest.images:
            raster = path.parent / image.raster
            if not raster.is_file():
                raise InvalidManifestError(path, f"missing raster `{image.raster}`")
            images.append(replace(image, raster=raster.as_posix()))
        return replace(manifest, images=images)

    def write(self, path: Path) -> None:
        """
        Write the manifest as JSON.

        Raises:
            IoFailureError: if the file can't be written.
        """
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            # noinspection PyUnresolvedReferences
            path.write_text(
                self.to_json(indent=2) + "\n",  # type: ignore[attr-defined]
                Constants.ENCODING_UTF_8,
            )
        except OSError as err:
            raise IoFailureError(path, "write") from err

    @property
    def references(self) -> list[ManifestImage]:
        return [image for image in self.images if image.role == ImageRole.REFERENCE]

    @property
    def queries(self) -> list[ManifestImage]:
        return [image for image in self.images if image.role == ImageRole.QUERY]

    def query(self, name: str) -> ManifestImage:
        """
        Raises:
            UnknownQueryNameError: if no query has this name.
        """
        for image in self.queries:
            if image.name == name:
                return image
        raise UnknownQueryNameError(name)

    def descriptor(self) -> SceneDescriptor:
        """
        Returns:
            the scene descriptor with the reference image names.
        """
        return SceneDescriptor(
            scene_id=self.scene.scene_id,
            centroid=self.scene.centroid,
            radius_m=self.scene.radius_m,
            references=[image.name for image in self.references],
        )

    def load_raster(self, image: ManifestImage) -> LabelRaster:
        return load_label_raster(Path(image.raster))
