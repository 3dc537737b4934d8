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
from pathlib import Path

import click
from click import Parameter
from overrides import override

from snowpath.classifier import QueryInput
from snowpath.colmap import SparseModel, parse_sparse_model
from snowpath.exceptions import (
    ExplainedError,
    IoFailureError,
    ManifestError,
    ModelFileError,
    RasterError,
    SparseModelError,
)
from snowpath.manifest import Manifest, ManifestImage
from snowpath.masks import LabelRaster
from snowpath.sidewalk import SidewalkModel, load_model
from snowpath.utils import Log


class UnitIntervalType(click.ParamType):
    """Ratio param typing for click, within [0, 1]."""

    name = "ratio"

    @override
    def convert(self, value, param: Parameter | None, ctx: click.Context | None) -> float:
        if isinstance(value, float):
            ratio = value
        else:
            try:
                ratio = float(value)
            except (TypeError, ValueError):
                self.fail(f"{value!r} isn't a valid number", param, ctx)
        if not 0.0 <= ratio <= 1.0:
            self.fail(f"{value!r} isn't within [0, 1]", param, ctx)
        return ratio


class PositiveFloatType(click.ParamType):
    """Strictly positive number param typing for click."""

    name = "positive"

    def __init__(self, allow_zero: bool = False) -> None:
        self.allow_zero = allow_zero

    @override
    def convert(self, value, param: Parameter | None, ctx: click.Context | None) -> float:
        try:
            number = float(value)
        except (TypeError, ValueError):
            self.fail(f"{value!r} isn't a valid number", param, ctx)
        if number < 0 or (number == 0 and not self.allow_zero):
            bound = "greater or equal to 0" if self.allow_zero else "greater than 0"
            self.fail(f"{value!r} must be {bound}", param, ctx)
        return number


def read_manifest(path: Path) -> Manifest:
    """
    Read the scene manifest if possible.
    This function handle errors by logging and exiting.
    """
    try:
        return Manifest.from_file(path)
    except ManifestError as err:
        Log.fatal("read manifest", err)


def read_sparse_model(path: Path) -> SparseModel:
    """
    Read a sparse reconstruction if possible.
    This function handle errors by logging and exiting.
    """
    try:
        return parse_sparse_model(path)
    except (SparseModelError, IoFailureError) as err:
        Log.fatal(f"read sparse model at `{path.as_posix()}`", err)


def read_sidewalk_model(path: Path) -> SidewalkModel:
    """
    Read a sidewalk model if possible.
    This function handle errors by logging and exiting.
    """
    try:
        return load_model(path)
    except (ModelFileError, IoFailureError) as err:
        Log.fatal(f"read sidewalk model at `{path.as_posix()}`", err)


def read_raster(manifest: Manifest, image: ManifestImage) -> LabelRaster:
    """
    Read the label raster of an image if possible.
    This function handle errors by logging and exiting.
    """
    try:
        return manifest.load_raster(image)
    except (RasterError, IoFailureError) as err:
        Log.fatal(f"read raster of `{image.name}`", err)


def read_query(
    manifest: Manifest, augmented: SparseModel, image: ManifestImage
) -> QueryInput:
    """
    Assemble a query from its manifest entry and its registered pose.
    This function handle errors by logging and exiting.
    """
    raster = read_raster(manifest, image)
    try:
        return QueryInput.from_model(augmented, image.name, image.gps, raster)
    except ExplainedError as err:
        Log.fatal(f"load query `{image.name}`", err)
