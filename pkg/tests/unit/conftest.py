import pytest

from snowpath.sidewalk import BuildParams, SidewalkModel, build_sidewalk_model
from snowpath.synthetic import SyntheticBundle, generate
from tests import small_spec


@pytest.fixture(scope="session")
def bundle() -> SyntheticBundle:
    return generate(small_spec())


@pytest.fixture(scope="session")
def sidewalk_model(bundle: SyntheticBundle) -> SidewalkModel:
    return build_sidewalk_model(
        bundle.sparse, bundle.rasters, bundle.manifest.descriptor(), BuildParams()
    )
