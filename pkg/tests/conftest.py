import numpy as np
import pytest
from hypothesis import settings

from splitgnc.geometry import RigidTransform, voxel_downsample
from splitgnc.synthbench import make_standin_cloud, random_rotation

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

BENCH_VOXEL = 0.042


@pytest.fixture(scope="session")
def standin():
    return make_standin_cloud()


@pytest.fixture(scope="session")
def bench_source(standin):
    return voxel_downsample(standin, BENCH_VOXEL)


def random_transform(rng, scale=2.0):
    return RigidTransform(random_rotation(rng), rng.uniform(-scale, scale, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(test_acceptance.RESULTS):
            terminalreporter.write_line(test_acceptance.RESULTS[k])
