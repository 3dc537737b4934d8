from pathlib import Path

import pytest

from snowpath.classifier import Measurement, Outcome, QueryInput
from snowpath.exceptions import (
    InvalidParameterError,
    NoBandError,
    NoLabeledQueriesError,
    UnknownSceneError,
)
from snowpath.evaluation import (
    REPORT_HEADER,
    LabeledQuery,
    QueryCategory,
    SweepResult,
    accuracy_from_measurements,
    emit_report,
    optimal_band,
    render_summary,
    sweep,
    threshold_grid,
)
from snowpath.sidewalk import SidewalkModel
from snowpath.synthetic import SyntheticBundle

DEFAULT_GRID = threshold_grid(0.0, 0.95, 0.05)


def covered(coverage: float) -> Measurement:
    return Measurement("query.jpg", outcome=None, coverage=coverage)


def labeled(bundle: SyntheticBundle, scene_id: str | None = None) -> list[LabeledQuery]:
    queries = []
    for image in bundle.manifest.queries:
        if image.category is None:
            continue
        query = QueryInput.from_model(
            bundle.augmented, image.name, image.gps, bundle.rasters[image.name]
        )
        queries.append(
            LabeledQuery(query, image.category, scene_id or bundle.manifest.scene.scene_id)
        )
    return queries


def test_threshold_grid() -> None:
    assert len(DEFAULT_GRID) == 20
    assert DEFAULT_GRID[0] == 0.0
    assert DEFAULT_GRID[3] == 0.15
    assert DEFAULT_GRID[-1] == 0.95


def test_threshold_grid_with_single_value() -> None:
    assert threshold_grid(0.6, 0.6, 0.05) == (0.6,)


@pytest.mark.parametrize(
    "t_min, t_max, step", [(0.0, 0.95, 0.0), (0.0, 0.95, -0.1), (0.9, 0.1, 0.1)]
)
def test_threshold_grid_with_invalid_parameters(t_min: float, t_max: float, step: float) -> None:
    with pytest.raises(InvalidParameterError):
        threshold_grid(t_min, t_max, step)


def test_accuracy_of_clear_queries() -> None:
    measurements = [
        (QueryCategory.CLEAR, Measurement(f"q{i}.jpg", Outcome.NO_SNOW)) for i in range(3)
    ]
    result = accuracy_from_measurements(measurements, DEFAULT_GRID)
    assert list(result.accuracy) == [QueryCategory.CLEAR]
    assert set(result.accuracy[QueryCategory.CLEAR]) == {100.0}


def test_accuracy_of_snow_covered_queries() -> None:
    measurements = [(QueryCategory.SNOW_COVERED, covered(c)) for c in (0.75, 0.8, 0.9)]
    result = accuracy_from_measurements(measurements, DEFAULT_GRID)
    values = result.accuracy[QueryCategory.SNOW_COVERED]
    for threshold, value in zip(result.thresholds, values):
        if threshold < 0.75:
            assert value == 100.0
    assert list(values) == sorted(values, reverse=True)
    assert values[DEFAULT_GRID.index(0.75)] == pytest.approx(200.0 / 3.0)
    assert values[DEFAULT_GRID.index(0.9)] == 0.0


def test_accuracy_of_cleared_queries() -> None:
    measurements = [(QueryCategory.CLEARED, covered(c)) for c in (0.2, 0.36, 0.5)]
    result = accuracy_from_measurements(measurements, DEFAULT_GRID)
    values = result.accuracy[QueryCategory.CLEARED]
    for threshold, value in zip(result.thresholds, values):
        if threshold >= 0.5:
            assert value == 100.0
    assert list(values) == sorted(values)
    assert values[0] == 0.0


def test_accuracy_of_unmeasured_queries() -> None:
    measurements = [
        (QueryCategory.SNOW_COVERED, covered(0.9)),
        (QueryCategory.SNOW_COVERED, None),
        (QueryCategory.SNOW_COVERED, Measurement("far.jpg", Outcome.OUT_OF_SCENE)),
    ]
    result = accuracy_from_measurements(measurements, DEFAULT_GRID)
    assert result.accuracy[QueryCategory.SNOW_COVERED][0] == pytest.approx(100.0 / 3.0)


def test_sweep_result_with_misaligned_accuracies() -> None:
    with pytest.raises(ValueError):
        SweepResult(thresholds=(0.1, 0.2), accuracy={QueryCategory.CLEAR: (100.0,)})


def test_optimal_band_full_range() -> None:
    result = SweepResult(
        thresholds=DEFAULT_GRID,
        accuracy={category: (100.0,) * len(DEFAULT_GRID) for category in QueryCategory},
    )
    assert optimal_band(result) == (0.0, 0.95)


def test_optimal_band() -> None:
    result = SweepResult(
        thresholds=DEFAULT_GRID,
        accuracy={
            QueryCategory.CLEAR: (100.0,) * len(DEFAULT_GRID),
            QueryCategory.SNOW_COVERED: tuple(100.0 if t <= 0.7 else 0.0 for t in DEFAULT_GRID),
            QueryCategory.CLEARED: tuple(0.0 if t < 0.4 else 100.0 for t in DEFAULT_GRID),
        },
    )
    low, high = optimal_band(result)
    assert 0.4 <= low <= high <= 0.7
    assert (low, high) == (0.4, 0.7)


def test_optimal_band_prefers_longest_then_lowest_run() -> None:
    thresholds = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
    pattern = (100.0, 100.0, 0.0, 100.0, 100.0, 0.0, 100.0)
    result = SweepResult(thresholds=thresholds, accuracy={QueryCategory.CLEARED: pattern})
    assert optimal_band(result) == (0.1, 0.2)


def test_optimal_band_with_floor() -> None:
    result = SweepResult(
        thresholds=(0.1, 0.2, 0.3),
        accuracy={QueryCategory.CLEAR: (50.0, 90.0, 95.0)},
    )
    assert optimal_band(result, floor_pct=90.0) == (0.2, 0.3)


def test_optimal_band_without_band() -> None:
    result = SweepResult(
        thresholds=DEFAULT_GRID,
        accuracy={category: (0.0,) * len(DEFAULT_GRID) for category in QueryCategory},
    )
    with pytest.raises(NoBandError):
        optimal_band(result)


def test_emit_report(tmp_path: Path) -> None:
    result = SweepResult(
        thresholds=DEFAULT_GRID,
        accuracy={
            QueryCategory.CLEAR: (100.0,) * len(DEFAULT_GRID),
            QueryCategory.CLEARED: (50.0,) * len(DEFAULT_GRID),
        },
    )
    emit_report(result, tmp_path / "first.csv")
    lines = (tmp_path / "first.csv").read_text().splitlines()
    assert len(lines) == 21
    assert lines[0] == REPORT_HEADER
    assert lines[1] == "0.00,100.00,,50.00"
    assert lines[-1] == "0.95,100.00,,50.00"

    emit_report(result, tmp_path / "second.csv")
    assert (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()


def test_render_summary() -> None:
    result = SweepResult(
        thresholds=(0.5, 0.6),
        accuracy={QueryCategory.CLEAR: (100.0, 100.0), QueryCategory.CLEARED: (50.0, 100.0)},
    )
    summary = render_summary(result, (0.6, 0.6))
    assert summary.startswith("# Threshold sweep\n")
    assert "between thresholds **0.60** and **0.60**" in summary
    assert "0.50: clear 100.00%, cleared 50.00%" in summary
    assert "snow_covered" not in summary


def test_render_summary_without_band() -> None:
    result = SweepResult(thresholds=(0.5,), accuracy={QueryCategory.CLEAR: (0.0,)})
    assert "No threshold reaches 100.00% for every category." in render_summary(result, None)


def test_sweep_without_queries(sidewalk_model: SidewalkModel) -> None:
    with pytest.raises(NoLabeledQueriesError):
        sweep({"synthetic": sidewalk_model}, [])


def test_sweep_with_unknown_scene(bundle: SyntheticBundle, sidewalk_model: SidewalkModel) -> None:
    with pytest.raises(UnknownSceneError):
        sweep({"synthetic": sidewalk_model}, labeled(bundle, scene_id="elsewhere"))


def test_sweep(bundle: SyntheticBundle, sidewalk_model: SidewalkModel) -> None:
    result = sweep({bundle.manifest.scene.scene_id: sidewalk_model}, labeled(bundle), jobs=2)
    assert result.thresholds == DEFAULT_GRID
    assert set(result.accuracy) == set(QueryCategory)
    assert set(result.accuracy[QueryCategory.CLEAR]) == {100.0}

    snow_covered = result.accuracy[QueryCategory.SNOW_COVERED]
    cleared = result.accuracy[QueryCategory.CLEARED]
    assert list(snow_covered) == sorted(snow_covered, reverse=True)
    assert list(cleared) == sorted(cleared)
    low, high = optimal_band(result)
    assert low <= 0.1
    assert high >= 0.85
