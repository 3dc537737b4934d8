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
import dataclasses
from pathlib import Path

import click
from rich.table import Table

from snowpath.classifier import (
    ClassifyParams,
    Outcome,
    Verdict,
    classify as classify_query,
    gps_gate,
)
from snowpath.commands.helpers import (
    PositiveFloatType,
    UnitIntervalType,
    read_manifest,
    read_query,
    read_raster,
    read_sidewalk_model,
    read_sparse_model,
)
from snowpath.evaluation import (
    LabeledQuery,
    emit_report,
    optimal_band,
    render_summary,
    sweep as sweep_queries,
)
from snowpath.exceptions import (
    ExitCode,
    ExplainedError,
    NoBandError,
    NoLabeledQueriesError,
)
from snowpath.masks import Category, KeepSide
from snowpath.sidewalk import BuildParams, SidewalkModel, build_sidewalk_model, save_model
from snowpath.synthetic import SceneSpec, generate, write_bundle
from snowpath.utils import Constants, Log, SharedContext


@click.command("build")
@click.option(
    "--model-dir",
    help="Sparse reconstruction of the reference images.",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--manifest",
    "manifest_path",
    help="Scene manifest.",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--out",
    help="Sidewalk model file to write.",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
)
@click.option("--seed", help="Random seed.", type=int, default=Constants.DEFAULT_SEED)
@click.option(
    "--plane-threshold",
    help="Ground plane inlier distance, defaults to 1% of the road points extent.",
    type=PositiveFloatType(),
    default=None,
)
@click.option(
    "--stride",
    help="Sidewalk pixel subsampling step.",
    type=click.IntRange(min=1),
    default=2,
    show_default=True,
)
@click.option(
    "--keep-side",
    help="Side of the image where the sidewalk of interest lies.",
    type=click.Choice([side.value for side in KeepSide]),
    default=KeepSide.RIGHT.value,
    show_default=True,
)
@click.option(
    "--nearest-cluster",
    help="Only keep the sidewalk cluster closest to the vehicle.",
    is_flag=True,
    default=False,
)
@click.option(
    "--target",
    help="Surface to learn.",
    type=click.Choice(["sidewalk", "road"]),
    default="sidewalk",
    show_default=True,
)
@click.option(
    "--jobs",
    help="Reference images processed concurrently.",
    type=click.IntRange(min=1),
    default=1,
)
def build(
    model_dir: Path,
    manifest_path: Path,
    out: Path,
    seed: int,
    plane_threshold: float | None,
    stride: int,
    keep_side: str,
    nearest_cluster: bool,
    target: str,
    jobs: int,
) -> None:
    """Build the sidewalk model of a scene from its reference images."""
    manifest = read_manifest(manifest_path)
    Log.action(f"Building sidewalk model of scene `{manifest.scene.scene_id}`")
    sparse = read_sparse_model(model_dir)
    rasters = {image.name: read_raster(manifest, image) for image in manifest.references}
    params = BuildParams(
        seed=seed,
        plane_threshold=plane_threshold,
        stride=stride,
        keep_side=KeepSide(keep_side),
        nearest_cluster=nearest_cluster,
        target=Category.ROAD if target == "road" else Category.SIDEWALK,
        jobs=jobs,
    )
    try:
        model = build_sidewalk_model(sparse, rasters, manifest.descriptor(), params)
        save_model(model, out)
    except ExplainedError as err:
        Log.fatal("build sidewalk model", err)

    table = Table()
    table.add_column("Reference", justify="left", style="cyan", no_wrap=True)
    table.add_column("Points", justify="right", style="magenta")
    for name, count in model.counts.items():
        table.add_row(name, str(count))
    SharedContext.console().print(table)
    Log.success(f"build sidewalk model with {len(model)} points at `{out.as_posix()}`")


@click.command("classify")
@click.option(
    "--model",
    "model_path",
    help="Sidewalk model of the scene.",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--aug-model-dir",
    help="Sparse reconstruction including the query image.",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--manifest",
    "manifest_path",
    help="Scene manifest.",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
)
@click.option("--query", "name", help="Name of the query image.", type=str, required=True)
@click.option(
    "--threshold",
    help="Alert threshold on the snow coverage.",
    type=UnitIntervalType(),
    default=Constants.DEFAULT_THRESHOLD,
    show_default=True,
)
@click.option(
    "--splat-radius",
    help="Radius of projected points in pixels, defaults to 2 px at 1920 px width.",
    type=PositiveFloatType(allow_zero=True),
    default=None,
)
@click.option(
    "--min-snow-fraction",
    help="Share of snow pixels required to measure coverage.",
    type=UnitIntervalType(),
    default=0.0,
)
@click.option(
    "--overlay-out",
    help="Diagnostics overlay to write.",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
)
def classify(
    model_path: Path,
    aug_model_dir: Path,
    manifest_path: Path,
    name: str,
    threshold: float,
    splat_radius: float | None,
    min_snow_fraction: float,
    overlay_out: Path | None,
) -> None:
    """Classify a query image as snow covered or clear."""
    manifest = read_manifest(manifest_path)
    try:
        image = manifest.query(name)
        params = ClassifyParams(splat_radius=splat_radius, min_snow_fraction=min_snow_fraction)
    except ExplainedError as err:
        Log.fatal(f"classify `{name}`", err)
    model = read_sidewalk_model(model_path)

    # A query outside the scene can't be registered, its pose isn't needed
    if not gps_gate(image.gps, model.scene):
        verdict = Verdict(name, Outcome.OUT_OF_SCENE, None, threshold, 0)
    else:
        query = read_query(manifest, read_sparse_model(aug_model_dir), image)
        try:
            verdict = classify_query(model, query, threshold, params, overlay_out)
        except ExplainedError as err:
            Log.fatal(f"classify `{name}`", err)
    Log.detail(f"{verdict.projected_count} projected sidewalk pixels")
    click.echo(verdict.line())


@click.command("sweep")
@click.option(
    "--model",
    "model_paths",
    help="Sidewalk model, once per scene.",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    multiple=True,
    required=True,
)
@click.option(
    "--manifest",
    "manifest_paths",
    help="Scene manifest with labeled queries, once per model.",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    multiple=True,
    required=True,
)
@click.option(
    "--aug-model-dir",
    "aug_model_dirs",
    help="Sparse reconstruction including the queries, once per model.",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    multiple=True,
    required=True,
)
@click.option("--t-min", help="Lowest threshold.", type=UnitIntervalType(), default=0.0)
@click.option("--t-max", help="Highest threshold.", type=UnitIntervalType(), default=0.95)
@click.option("--step", help="Threshold step.", type=PositiveFloatType(), default=0.05)
@click.option(
    "--floor",
    "floor_pct",
    help="Accuracy every category must reach within the band.",
    type=click.FloatRange(min=0.0, max=100.0, min_open=True),
    default=100.0,
    show_default=True,
)
@click.option(
    "--report",
    help="CSV report to write.",
    type=click.Path(dir_okay=False, path_type=Path),
    required=True,
)
@click.option(
    "--summary",
    help="Markdown summary to write.",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
)
@click.option(
    "--splat-radius",
    help="Radius of projected points in pixels, defaults to 2 px at 1920 px width.",
    type=PositiveFloatType(allow_zero=True),
    default=None,
)
@click.option(
    "--jobs",
    help="Queries measured concurrently.",
    type=click.IntRange(min=1),
    default=1,
)
def sweep(
    model_paths: tuple[Path, ...],
    manifest_paths: tuple[Path, ...],
    aug_model_dirs: tuple[Path, ...],
    t_min: float,
    t_max: float,
    step: float,
    floor_pct: float,
    report: Path,
    summary: Path | None,
    splat_radius: float | None,
    jobs: int,
) -> None:
    """Evaluate labeled queries across alert thresholds."""
    if not len(model_paths) == len(manifest_paths) == len(aug_model_dirs):
        raise click.UsageError("--model, --manifest and --aug-model-dir must be given as many times")

    models: dict[str, SidewalkModel] = {}
    queries: list[LabeledQuery] = []
    for model_path, manifest_path, aug_model_dir in zip(
        model_paths, manifest_paths, aug_model_dirs
    ):
        model = read_sidewalk_model(model_path)
        models[model.scene.scene_id] = model
        manifest = read_manifest(manifest_path)
        labeled = [image for image in manifest.queries if image.category is not None]
        if not labeled:
            continue
        Log.action(f"Loading {len(labeled)} labeled queries of `{manifest.scene.scene_id}`")
        augmented = read_sparse_model(aug_model_dir)
        for image in labeled:
            queries.append(
                LabeledQuery(
                    query=read_query(manifest, augmented, image),
                    category=image.category,  # type: ignore[arg-type]
                    scene_id=manifest.scene.scene_id,
                )
            )

    try:
        if not queries:
            raise NoLabeledQueriesError()
        result = sweep_queries(
            models,
            queries,
            t_min=t_min,
            t_max=t_max,
            step=step,
            params=ClassifyParams(splat_radius=splat_radius),
            jobs=jobs,
        )
        emit_report(result, report)
    except ExplainedError as err:
        Log.fatal("sweep thresholds", err)
    Log.success(f"write report of {len(queries)} queries at `{report.as_posix()}`")

    band: tuple[float, float] | None
    try:
        band = optimal_band(result, floor_pct)
    except NoBandError:
        band = None
    if summary:
        try:
            summary.parent.mkdir(parents=True, exist_ok=True)
            summary.write_text(
                data=render_summary(result, band, floor_pct), encoding=Constants.ENCODING_UTF_8
            )
        except OSError as err:
            Log.fatal(f"write summary at `{summary.as_posix()}`", err, raise_exit=ExitCode.IO)
    click.echo("no band" if band is None else f"band {band[0]:.2f} {band[1]:.2f}")


@click.command("synth")
@click.option(
    "--spec",
    "spec_path",
    help="YAML scene spec, defaults are used when omitted.",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
)
@click.option(
    "--out-dir",
    help="Directory of the generated bundle.",
    type=click.Path(file_okay=False, path_type=Path),
    required=True,
)
@click.option("--seed", help="Override the spec seed.", type=int, default=None)
def synth(spec_path: Path | None, out_dir: Path, seed: int | None) -> None:
    """Generate a synthetic scene with its ground truth."""
    try:
        spec = SceneSpec.from_file(spec_path) if spec_path else SceneSpec()
        if seed is not None:
            spec = dataclasses.replace(spec, seed=seed)
        Log.action(f"Generating scene `{spec.scene_id}` with seed {spec.seed}")
        bundle = generate(spec)
        write_bundle(bundle, out_dir)
    except ExplainedError as err:
        Log.fatal("generate synthetic scene", err)
    for name, coverage in bundle.truth.coverage.items():
        Log.detail(f"{name}: true coverage {coverage:.4f}")
    Log.success(f"generate synthetic scene at `{out_dir.as_posix()}`")
