from pathlib import Path

import pytest
from click.testing import CliRunner, Result

from snowpath.cli import main
from snowpath.synthetic import SyntheticBundle, generate, write_bundle
from snowpath.utils import Constants
from tests import small_spec


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


@pytest.fixture(scope="session")
def bundle() -> SyntheticBundle:
    return generate(small_spec())


@pytest.fixture(scope="session")
def scene_dir(tmp_path_factory: pytest.TempPathFactory, bundle: SyntheticBundle) -> Path:
    path = tmp_path_factory.mktemp("scene")
    write_bundle(bundle, path)
    return path


@pytest.fixture(scope="session")
def model_path(tmp_path_factory: pytest.TempPathFactory, scene_dir: Path) -> Path:
    path = tmp_path_factory.mktemp("model") / "sidewalk.txt"
    result = CliRunner().invoke(main, args=["build", *build_args(scene_dir), "--out", str(path)])
    assert_result(result)
    return path


def build_args(scene_dir: Path) -> list[str]:
    return [
        "--model-dir",
        str(scene_dir / Constants.SPARSE_DIR_NAME),
        "--manifest",
        str(scene_dir / Constants.MANIFEST_FILE_NAME),
    ]


def query_args(scene_dir: Path, model_path: Path) -> list[str]:
    return [
        "--model",
        str(model_path),
        "--aug-model-dir",
        str(scene_dir / Constants.AUGMENTED_DIR_NAME),
        "--manifest",
        str(scene_dir / Constants.MANIFEST_FILE_NAME),
    ]


def assert_result(result: Result) -> tuple[str, str]:
    stdout = result.stdout
    stderr = result.stderr if result.stderr_bytes else None

    if result.exit_code > 0:
        print(f"stdout: {stdout}")
        print(f"stderr: {stderr}")
        assert result.exit_code == 0
    for pattern in ["Failed", "Error"]:
        assert pattern not in [stdout, stderr]
    return stdout, stderr
