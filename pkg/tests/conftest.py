import numpy as np
import pytest

from jabfsp.scenario import cluster_angles, complex_normal, make_geometry, sample_channels
from jabfsp.spreading import assign_signatures, equivalent_channel


def crandn(rng, *shape):
    return complex_normal(rng, shape)


def make_scene(rng, M=5, N=3, Q=40, K=20, centers=None, width=5.0):
    if centers is None:
        centers = [-30.0, -10.0, 10.0][:N] if N <= 3 else np.linspace(-50, 50, N)
    theta = cluster_angles(centers, Q, width, rng)
    channels = sample_channels(make_geometry(theta), K, M, rng)
    sigs = assign_signatures(K, Q, rng)
    return channels, sigs, equivalent_channel(channels, sigs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
