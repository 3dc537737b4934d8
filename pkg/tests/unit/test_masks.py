from itertools import product
from pathlib import Path

import numpy as np
import pytest

from snowpath.exceptions import (
    DimensionMismatchError,
    EmptySubjectError,
    IllegalLabelValueError,
    MalformedPgmError,
)
from snowpath.masks import (
    Category,
    KeepSide,
    LabelRaster,
    PixelSet,
    category_pixels,
    load_label_raster,
    nearest_cluster_filter,
    overlap_ratio,
    right_side_filter,
    write_label_raster,
)


def write_pgm_bytes(path: Path, content: bytes) -> Path:
    path.write_bytes(content)
    return path


def test_load_label_raster(tmp_path: Path) -> None:
    path = write_pgm_bytes(tmp_path / "labels.pgm", b"P5\n3 2\n255\n" + bytes([0, 1, 2, 3, 0, 1]))
    raster = load_label_raster(path)
    assert raster.size == (3, 2)
    assert raster.labels == bytes([0, 1, 2, 3, 0, 1])
    assert raster.grid[1, 0] == Category.SNOW


def test_load_label_raster_with_comments(tmp_path: Path) -> None:
    content = b"P5\n# labels\n3 2\n# categories\n255\n" + bytes([0, 1, 2, 3, 0, 1])
    raster = load_label_raster(write_pgm_bytes(tmp_path / "labels.pgm", content))
    assert raster.labels == bytes([0, 1, 2, 3, 0, 1])


def test_load_label_raster_with_illegal_label(tmp_path: Path) -> None:
    path = write_pgm_bytes(tmp_path / "labels.pgm", b"P5\n3 2\n255\n" + bytes([0, 1, 2, 7, 0, 1]))
    with pytest.raises(IllegalLabelValueError) as exc_info:
        load_label_raster(path)
    assert exc_info.value.value == 7
    assert exc_info.value.index == 3


@pytest.mark.parametrize(
    "content",
    [
        b"P2\n3 2\n255\n0 1 2 3 0 1",
        b"P5\n3 2\n65535\n" + bytes(12),
        b"P5\n3 2\n3\n" + bytes([0, 1, 2, 3, 0, 1]),
        b"P5\n3 2\n255\n" + bytes(5),
        b"P5\n3",
        b"P5\n3 two\n255\n" + bytes(6),
    ],
    ids=["ascii", "16-bit", "maxval", "truncated", "header", "size"],
)
def test_load_label_raster_with_malformed_file(tmp_path: Path, content: bytes) -> None:
    with pytest.raises(MalformedPgmError):
        load_label_raster(write_pgm_bytes(tmp_path / "labels.pgm", content))


def test_write_label_raster(tmp_path: Path) -> None:
    raster = LabelRaster(width=3, height=2, labels=bytes([0, 1, 2, 3, 0, 1]))
    write_label_raster(raster, tmp_path / "first.pgm")
    assert (tmp_path / "first.pgm").read_bytes() == b"P5\n3 2\n255\n" + raster.labels
    assert load_label_raster(tmp_path / "first.pgm") == raster
    write_label_raster(load_label_raster(tmp_path / "first.pgm"), tmp_path / "second.pgm")
    assert (tmp_path / "first.pgm").read_bytes() == (tmp_path / "second.pgm").read_bytes()


def test_label_raster_with_wrong_length() -> None:
    with pytest.raises(ValueError):
        LabelRaster(width=3, height=2, labels=bytes(5))


def test_category_pixels_on_void_raster() -> None:
    raster = LabelRaster.from_grid(np.zeros((4, 5), dtype=np.uint8))
    assert len(category_pixels(raster, Category.ROAD)) == 0


def test_category_pixels() -> None:
    grid = np.zeros((4, 5), dtype=np.uint8)
    road = [(0, 0), (1, 0), (4, 1), (2, 3), (3, 3)]
    for x, y in road:
        grid[y, x] = Category.ROAD
    pixels = category_pixels(LabelRaster.from_grid(grid), Category.ROAD)
    assert len(pixels) == 5
    assert sorted(pixels.pixels()) == sorted(road)


def test_category_pixels_partition_raster() -> None:
    rng = np.random.default_rng(7)
    raster = LabelRaster.from_grid(rng.integers(0, 4, (20, 30)))
    sets = [category_pixels(raster, category) for category in Category]
    assert sum(len(pixels) for pixels in sets) == 20 * 30
    for first, second in product(range(4), repeat=2):
        if first != second:
            assert len(sets[first] & sets[second]) == 0


def test_pixel_set_operators() -> None:
    first = PixelSet.from_pixels(5, 5, [(0, 0), (1, 1), (2, 2)])
    second = PixelSet.from_pixels(5, 5, [(2, 2), (3, 3)])
    assert (first & second).pixels() == [(2, 2)]
    assert (first | second).pixels() == [(0, 0), (1, 1), (2, 2), (3, 3)]
    assert first.issubset(first | second)
    with pytest.raises(DimensionMismatchError):
        _ = first | PixelSet.empty(4, 5)


def test_right_side_filter() -> None:
    pixels = PixelSet.from_pixels(100, 100, [(10, 90), (80, 90), (80, 10)])
    assert right_side_filter(pixels).pixels() == [(80, 90)]


def test_right_side_filter_on_full_grid() -> None:
    full = PixelSet(4, 4, np.ones((4, 4), dtype=bool))
    kept = right_side_filter(full)
    assert len(kept) == 4
    assert kept.pixels() == [(2, 2), (3, 2), (2, 3), (3, 3)]


def test_right_side_filter_on_left_side() -> None:
    pixels = PixelSet.from_pixels(100, 100, [(10, 90), (80, 90)])
    assert right_side_filter(pixels, KeepSide.LEFT).pixels() == [(10, 90)]


def test_right_side_filter_is_idempotent_and_monotone() -> None:
    rng = np.random.default_rng(3)
    pixels = PixelSet(17, 11, rng.random((11, 17)) < 0.5)
    kept = right_side_filter(pixels)
    assert kept.issubset(pixels)
    assert right_side_filter(kept) == kept


def test_nearest_cluster_filter() -> None:
    members = np.zeros((10, 10), dtype=bool)
    members[1:4, 1:6] = True
    members[7:9, 6:8] = True
    kept = nearest_cluster_filter(PixelSet(10, 10, members))
    assert kept.pixels() == [(6, 7), (7, 7), (6, 8), (7, 8)]


def test_nearest_cluster_filter_with_single_cluster() -> None:
    pixels = PixelSet.from_pixels(5, 5, [(1, 1), (2, 2)])
    assert nearest_cluster_filter(pixels) == pixels


def test_overlap_ratio_of_subset() -> None:
    subject = PixelSet.from_pixels(10, 10, [(1, 1), (2, 2)])
    cover = PixelSet.from_pixels(10, 10, [(1, 1), (2, 2), (3, 3)])
    assert overlap_ratio(subject, cover) == 1.0


def test_overlap_ratio_of_disjoint_sets() -> None:
    subject = PixelSet.from_pixels(10, 10, [(1, 1)])
    cover = PixelSet.from_pixels(10, 10, [(2, 2)])
    assert overlap_ratio(subject, cover) == 0.0


def test_overlap_ratio() -> None:
    subject = PixelSet(10, 10, np.ones((10, 10), dtype=bool))
    cover = PixelSet.from_pixels(10, 10, list(product(range(10), range(10)))[:91])
    assert overlap_ratio(subject, cover) == pytest.approx(0.91)


def test_overlap_ratio_of_empty_subject() -> None:
    with pytest.raises(EmptySubjectError):
        overlap_ratio(PixelSet.empty(10, 10), PixelSet.from_pixels(10, 10, [(1, 1)]))


def test_overlap_ratio_with_dimension_mismatch() -> None:
    with pytest.raises(DimensionMismatchError):
        overlap_ratio(PixelSet.from_pixels(10, 10, [(1, 1)]), PixelSet.empty(10, 12))
