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
from enum import IntEnum, StrEnum
from io import BytesIO
from pathlib import Path
from typing import Final, Iterable

import numpy as np
from PIL import Image
from scipy import ndimage

from .exceptions import (
    DimensionMismatchError,
    EmptySubjectError,
    IllegalLabelValueError,
    IoFailureError,
    MalformedPgmError,
)

PGM_MAXVAL: Final[int] = 255


class Category(IntEnum):
    """Label codes of a raster."""

    VOID = 0
    ROAD = 1
    SIDEWALK = 2
    SNOW = 3


class KeepSide(StrEnum):
    """Side of the image where the sidewalk of interest lies."""

    RIGHT = "right"
    LEFT = "left"


@dataclass(frozen=True)
class LabelRaster:
    """Represents a per-pixel category raster, stored row-major."""

    width: int
    height: int
    labels: bytes

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"invalid size {self.width}x{self.height}")
        if len(self.labels) != self.width * self.height:
            raise ValueError(
                f"expected {self.width * self.height} labels, got {len(self.labels)}"
            )
        values = np.frombuffer(self.labels, dtype=np.uint8)
        illegal = np.flatnonzero(values > int(max(Category)))
        if illegal.size:
            index = int(illegal[0])
            raise IllegalLabelValueError(int(values[index]), index)

    @staticmethod
    def from_grid(grid: np.ndarray) -> "LabelRaster":
        """Build a raster from a (height, width) array of codes."""
        grid = np.ascontiguousarray(grid, dtype=np.uint8)
        height, width = grid.shape
        return LabelRaster(width=width, height=height, labels=grid.tobytes())

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    @property
    def grid(self) -> np.ndarray:
        """
        Returns:
            a read-only (height, width) view of the labels.
        """
        return np.frombuffer(self.labels, dtype=np.uint8).reshape(self.height, self.width)


@dataclass(frozen=True, eq=False)
class PixelSet:
    """Represents a set of pixels of a width x height grid."""

    width: int
    height: int
    members: np.ndarray

    def __post_init__(self) -> None:
        members = np.array(self.members, dtype=bool)
        if members.ndim != 2:
            raise ValueError("members must be a 2D grid")
        if members.shape != (self.height, self.width):
            raise DimensionMismatchError(
                (self.width, self.height), (members.shape[1], members.shape[0])
            )
        members.setflags(write=False)
        object.__setattr__(self, "members", members)

    @staticmethod
    def empty(width: int, height: int) -> "PixelSet":
        return PixelSet(width, height, np.zeros((height, width), dtype=bool))

    @staticmethod
    def from_pixels(width: int, height: int, pixels: Iterable[tuple[int, int]]) -> "PixelSet":
        """
        Build a set from (x, y) pixel coordinates.
        """
        members = np.zeros((height, width), dtype=bool)
        for x, y in pixels:
            members[y, x] = True
        return PixelSet(width, height, members)

    @property
    def size(self) -> tuple[int, int]:
        return self.width, self.height

    def pixels(self) -> list[tuple[int, int]]:
        """
        Returns:
            (x, y) coordinates of the members in row-major order.
        """
        ys, xs = np.nonzero(self.members)
        return [(int(x), int(y)) for x, y in zip(xs, ys)]

    def issubset(self, other: "PixelSet") -> bool:
        self._check(other)
        return not np.any(self.members & ~other.members)

    def __and__(self, other: "PixelSet") -> "PixelSet":
        self._check(other)
        return PixelSet(self.width, self.height, self.members & other.members)

    def __or__(self, other: "PixelSet") -> "PixelSet":
        self._check(other)
        return PixelSet(self.width, self.height, self.members | other.members)

    def __len__(self) -> int:
        return int(np.count_nonzero(self.members))

    def __contains__(self, pixel: object) -> bool:
        if not isinstance(pixel, tuple) or len(pixel) != 2:
            return False
        x, y = pixel
        return 0 <= x < self.width and 0 <= y < self.height and bool(self.members[y, x])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PixelSet):
            return NotImplemented
        return self.size == other.size and np.array_equal(self.members, other.members)

    def __hash__(self) -> int:
        return hash((self.width, self.height, np.packbits(self.members).tobytes()))

    def _check(self, other: "PixelSet") -> None:
        if self.size != other.size:
            raise DimensionMismatchError(self.size, other.size)


def load_label_raster(path: Path) -> LabelRaster:
    """
    Load a binary PGM label raster.

    Raises:
        IoFailureError: if the file can't be read.
        MalformedPgmError: if the file isn't a P5 PGM with maxval 255.
        IllegalLabelValueError: if a label isn't a known category.
    """
    try:
        data = path.read_bytes()
    except OSError as err:
        raise IoFailureError(path, "read") from err

    try:
        with Image.open(BytesIO(data), formats=["PPM"]) as image:
            # Only P5 with maxval 255 decodes raw into 8-bit gray levels
            binary = image.mode == "L" and bool(image.tile) and image.tile[0][0] == "raw"
            grid = np.asarray(image) if binary else None
    except (OSError, ValueError, SyntaxError) as err:
        raise MalformedPgmError(path, str(err)) from err
    if grid is None:
        raise MalformedPgmError(path, f"expected binary gray levels with maxval {PGM_MAXVAL}")
    if grid.size == 0:
        raise MalformedPgmError(path, f"invalid size {grid.shape[1]}x{grid.shape[0]}")
    return LabelRaster.from_grid(grid)


def write_pgm(path: Path, codes: np.ndarray) -> None:
    """
    Write a (height, width) array of 8-bit codes as a binary PGM file.

    Raises:
        IoFailureError: if the file can't be written.
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.ascontiguousarray(codes, dtype=np.uint8)).save(path, format="PPM")
    except OSError as err:
        raise IoFailureError(path, "write") from err


def write_label_raster(raster: LabelRaster, path: Path) -> None:
    """Write a label raster as binary PGM."""
    write_pgm(path, raster.grid)


def category_pixels(raster: LabelRaster, code: Category) -> PixelSet:
    """
    Returns:
        pixels labeled with the category.
    """
    return PixelSet(raster.width, raster.height, raster.grid == int(code))


def right_side_filter(pixels: PixelSet, keep_side: KeepSide = KeepSide.RIGHT) -> PixelSet:
    """
    Keep pixels below the horizontal midline and on the kept side of the vertical one.
    Midline pixels are kept.
    """
    mid_x, mid_y = pixels.width // 2, pixels.height // 2
    xs = np.arange(pixels.width)[None, :]
    ys = np.arange(pixels.height)[:, None]
    side = xs >= mid_x if keep_side == KeepSide.RIGHT else xs <= mid_x
    return PixelSet(pixels.width, pixels.height, pixels.members & side & (ys >= mid_y))


def nearest_cluster_filter(pixels: PixelSet) -> PixelSet:
    """
    Keep the 8-connected cluster closest to the vehicle, which is the one reaching the
    lowest image row. Ties go to the larger cluster, then to the first one in row-major order.
    """
    components, count = ndimage.label(pixels.members, structure=np.ones((3, 3), dtype=int))
    if count <= 1:
        return pixels
    labels = np.arange(1, count + 1)
    rows = np.broadcast_to(np.arange(pixels.height)[:, None], components.shape)
    bottoms = ndimage.maximum(rows, components, labels)
    sizes = ndimage.sum_labels(pixels.members, components, labels)
    best = max(labels, key=lambda label: (bottoms[label - 1], sizes[label - 1], -label))
    return PixelSet(pixels.width, pixels.height, components == best)


def overlap_ratio(subject: PixelSet, cover: PixelSet) -> float:
    """
    Compute the share of the subject covered by the cover.

    Raises:
        DimensionMismatchError: if both sets have different sizes.
        EmptySubjectError: if the subject is empty.
    """
    if subject.size != cover.size:
        raise DimensionMismatchError(subject.size, cover.size)
    total = len(subject)
    if total == 0:
        raise EmptySubjectError()
    return len(subject & cover) / total
