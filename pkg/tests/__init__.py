from pathlib import Path
from typing import Any, Final

from snowpath.classifier import QueryInput
from snowpath.evaluation import QueryCategory
from snowpath.synthetic import QuerySpec, SceneSpec, SnowScenario, SyntheticBundle

PROJECT_ROOT_DIR: Final[Path] = Path(__file__).parent.parent.absolute().resolve()


def covered(name: str, fraction: float, position: float, **extra: Any) -> QuerySpec:
    return QuerySpec(
        name=name,
        scenario=SnowScenario.COVERS_SIDEWALK,
        fraction=fraction,
        position=position,
        **extra,
    )


def suite_queries() -> list[QuerySpec]:
    """Queries shared by the synthetic scenes of the test suite."""
    return [
        QuerySpec(name="q_clear.jpg", category=QueryCategory.CLEAR, position=0.3),
        covered("q_snow.jpg", 0.95, 0.5, category=QueryCategory.SNOW_COVERED),
        QuerySpec(
            name="q_cleared.jpg",
            category=QueryCategory.CLEARED,
            scenario=SnowScenario.BESIDE_SIDEWALK,
            position=0.7,
        ),
        covered("q_f000.jpg", 0.0, 0.2),
        covered("q_f025.jpg", 0.25, 0.3),
        covered("q_f050.jpg", 0.5, 0.4),
        covered("q_f075.jpg", 0.75, 0.5),
        covered("q_f100.jpg", 1.0, 0.6),
        covered("q_091.jpg", 0.91, 0.45),
        covered("q_036.jpg", 0.36, 0.55),
        covered("q_far.jpg", 0.95, 0.5, gps_offset_m=1000.0),
        QuerySpec(name="q_iou.jpg", pose_of="run1_001.jpg"),
    ]


def small_spec(**overrides: Any) -> SceneSpec:
    """A reduced synthetic scene, fast enough for the test suite."""
    values: dict[str, Any] = {
        "seed": 7,
        "runs": 3,
        "images_per_run": 6,
        "point_count": 1500,
        "width": 640,
        "height": 360,
        "queries": suite_queries(),
    }
    values.update(overrides)
    return SceneSpec(**values)


def tiny_spec(seed: int, **overrides: Any) -> SceneSpec:
    """A minimal synthetic scene, only meant for sparse model checks."""
    values: dict[str, Any] = {
        "seed": seed,
        "runs": 2,
        "images_per_run": 3,
        "point_count": 200,
        "width": 160,
        "height": 90,
        "queries": [QuerySpec(name="q.jpg", position=0.5)],
    }
    values.update(overrides)
    return SceneSpec(**values)


def tree(root: Path) -> dict[str, bytes]:
    """Files below a directory by relative path."""
    return {
        path.relative_to(root).as_posix(): path.read_bytes()
        for path in root.rglob("*")
        if path.is_file()
    }


def synthetic_query(bundle: SyntheticBundle, name: str) -> QueryInput:
    image = bundle.manifest.query(name)
    return QueryInput.from_model(bundle.augmented, name, image.gps, bundle.rasters[name])
