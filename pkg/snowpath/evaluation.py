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
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from enum import StrEnum
from pathlib import Path
from typing import Final, Mapping, Sequence

import mdformat
from jinja2 import Environment, PackageLoader

from .classifier import ClassifyParams, Measurement, Outcome, QueryInput, measure, verdict_for
from .exceptions import (
    EmptyProjectionError,
    InvalidParameterError,
    IoFailureError,
    NoBandError,
    NoLabeledQueriesError,
    UnknownSceneError,
)
from .sidewalk import SidewalkModel
from .utils import Constants, Log

REPORT_HEADER: Final[str] = "threshold,clear_pct,snow_covered_pct,cleared_pct"
SUMMARY_TEMPLATE: Final[str] = "sweep_summary.md"


class QueryCategory(StrEnum):
    """Represents the ground truth category of a labeled query."""

    CLEAR = "clear"
    SNOW_COVERED = "snow_covered"
    CLEARED = "cleared"

    @property
    def expected(self) -> Outcome:
        """
        Returns:
            the outcome a correct classification reports.
        """
        return Outcome.SNOW_COVERED if self == QueryCategory.SNOW_COVERED else Outcome.CLEAR


@dataclass(frozen=True)
class LabeledQuery:
    """Represents a query with its ground truth category."""

    query: QueryInput
    category: QueryCategory
    scene_id: str

    @property
    def expected(self) -> Outcome:
        return self.category.expected


@dataclass(frozen=True)
class SweepResult:
    """Represents per-category accuracies across thresholds."""

    thresholds: tuple[float, ...]
    accuracy: dict[QueryCategory, tuple[float, ...]]

    def __post_init__(self) -> None:
        if list(self.thresholds) != sorted(self.thresholds):
            raise ValueError("thresholds must be ascending")
        for category, values in self.accuracy.items():
            if len(values) != len(self.thresholds):
                raise ValueError(f"{category} accuracies aren't aligned with thresholds")
            if any(not 0.0 <= value <= 100.0 for value in values):
                raise ValueError(f"{category} accuracies must be percentages")

    def row(self, index: int) -> dict[QueryCategory, float]:
        """
        Returns:
            accuracies of present categories at a threshold index.
        """
        return {category: values[index] for category, values in self.accuracy.items()}


def threshold_grid(t_min: float, t_max: float, step: float) -> tuple[float, ...]:
    """
    Build an inclusive threshold grid with exact decimal steps.

    Raises:
        InvalidParameterError: if the bounds or the step are invalid.
    """
    start, stop, delta = Decimal(str(t_min)), Decimal(str(t_max)), Decimal(str(step))
    if delta <= 0:
        raise InvalidParameterError("step", step, "greater than 0")
    if start > stop:
        raise InvalidParameterError("t_min", t_min, f"lower or equal to t_max ({t_max})")
    count = int((stop - start) // delta)
    return tuple(float(start + index * delta) for index in range(count + 1))


def _is_correct(measurement: Measurement | None, expected: Outcome, threshold: float) -> bool:
    if measurement is None:
        return False
    return verdict_for(measurement, threshold).outcome.reported == expected


def accuracy_from_measurements(
    measurements: Sequence[tuple[QueryCategory, Measurement | None]],
    thresholds: Sequence[float],
) -> SweepResult:
    """
    Compute per-category accuracies from cached measurements.
    Queries measured as None couldn't be classified and count as incorrect.
    """
    accuracy: dict[QueryCategory, tuple[float, ...]] = {}
    for category in QueryCategory:
        members = [measurement for label, measurement in measurements if label == category]
        if not members:
            continue
        accuracy[category] = tuple(
            100.0
            * sum(_is_correct(measurement, category.expected, threshold) for measurement in members)
            / len(members)
            for threshold in thresholds
        )
    return SweepResult(thresholds=tuple(thresholds), accuracy=accuracy)


def sweep(
    models: Mapping[str, SidewalkModel],
    queries: Sequence[LabeledQuery],
    t_min: float = 0.0,
    t_max: float = 0.95,
    step: float = 0.05,
    params: ClassifyParams = ClassifyParams(),
    jobs: int = 1,
) -> SweepResult:
    """
    Measure every query once, then evaluate accuracies across the threshold grid.

    Args:
        models: sidewalk models by scene id.
        queries: labeled queries.
        t_min: lowest threshold.
        t_max: highest threshold.
        step: threshold step.
        params: classification parameters.
        jobs: number of queries measured concurrently.
    Raises:
        NoLabeledQueriesError: if there's no query.
        UnknownSceneError: if a query scene has no model.
    """
    thresholds = threshold_grid(t_min, t_max, step)
    if not queries:
        raise NoLabeledQueriesError()
    for labeled in queries:
        if labeled.scene_id not in models:
            raise UnknownSceneError(labeled.query.name, labeled.scene_id)

    def run(labeled: LabeledQuery) -> Measurement | None:
        try:
            return measure(models[labeled.scene_id], labeled.query, params)
        except EmptyProjectionError as err:
            Log.warning(f"Counting query `{labeled.query.name}` as misclassified", err)
            return None

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as executor:
        measurements = list(executor.map(run, queries))
    for labeled, measurement in zip(queries, measurements):
        if measurement is not None and measurement.coverage is not None:
            Log.detail(f"{labeled.query.name}: coverage {measurement.coverage:.4f}")
    return accuracy_from_measurements(
        [(labeled.category, measurement) for labeled, measurement in zip(queries, measurements)],
        thresholds,
    )


def optimal_band(result: SweepResult, floor_pct: float = 100.0) -> tuple[float, float]:
    """
    Find the longest run of thresholds where every category reaches the floor.
    Ties go to the run starting first.

    Raises:
        InvalidParameterError: if the floor isn't in (0, 100].
        NoBandError: if no threshold qualifies.
    """
    if not 0.0 < floor_pct <= 100.0:
        raise InvalidParameterError("floor_pct", floor_pct, "in (0, 100]")
    best: tuple[int, int] | None = None
    start = None
    for index in range(len(result.thresholds) + 1):
        qualifies = index < len(result.thresholds) and all(
            value >= floor_pct for value in result.row(index).values()
        )
        if qualifies and start is None:
            start = index
        elif not qualifies and start is not None:
            if best is None or index - start > best[1] - best[0] + 1:
                best = (start, index - 1)
            start = None
    if best is None:
        raise NoBandError(floor_pct)
    return result.thresholds[best[0]], result.thresholds[best[1]]


def _cell(result: SweepResult, category: QueryCategory, index: int) -> str:
    values = result.accuracy.get(category)
    return "" if values is None else f"{values[index]:.2f}"


def emit_report(result: SweepResult, path: Path) -> None:
    """
    Write the sweep as CSV, one row per threshold.

    Raises:
        IoFailureError: if the file can't be written.
    """
    lines = [REPORT_HEADER]
    for index, threshold in enumerate(result.thresholds):
        cells = [_cell(result, category, index) for category in QueryCategory]
        lines.append(",".join([f"{threshold:.2f}", *cells]))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", Constants.ENCODING_UTF_8)
    except OSError as err:
        raise IoFailureError(path, "write") from err


def render_summary(
    result: SweepResult, band: tuple[float, float] | None, floor_pct: float = 100.0
) -> str:
    """
    Returns:
        a markdown summary of the sweep.
    """
    env = Environment(loader=PackageLoader("snowpath", "templates"))
    tmpl = env.get_template(SUMMARY_TEMPLATE)
    rows = [
        {
            "threshold": f"{threshold:.2f}",
            "cells": [
                (category, _cell(result, category, index) + "%")
                for category in QueryCategory
                if category in result.accuracy
            ],
        }
        for index, threshold in enumerate(result.thresholds)
    ]
    rendering = tmpl.render(
        {
            "band": band,
            "floor": floor_pct,
            "rows": rows,
        }
    )
    return mdformat.text(rendering)
