import numpy as np
import pytest

from fieldsep.fields import Grid, PowerSpectrum, covariance_from_spectrum
from fieldsep.operators import DataSet, MixtureMatrix, NoiseCovariance, Response

# (name, passed, detail) tuples appended by the end-to-end suite; echoed
# after the run so each numbered target gets one visible line.
CRITERION_RESULTS: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_RESULTS:
        return
    terminalreporter.section("behavior targets")
    for name, ok, detail in CRITERION_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid16():
    """Small 1-d grid with unit pixel volume."""
    return Grid(shape=(16,), lengths=(16.0,))


@pytest.fixture
def grid16_unit_box():
    """Same resolution, but pixels of volume 1/16."""
    return Grid(shape=(16,), lengths=(1.0,))


def random_problem(grid, n_channels, n_components, rng, masked=False):
    """Build a consistent (response, mixture, noise, priors, data) tuple."""
    spectrum = PowerSpectrum(lambda k: 1.0 / (4.0 * k**2 + 1.0))
    priors = tuple(covariance_from_spectrum(grid, spectrum) for _ in range(n_components))
    if masked:
        mask = (rng.uniform(size=(n_channels,) + grid.shape) > 0.25).astype(float)
    else:
        mask = np.ones((n_channels,) + grid.shape)
    response = Response(grid, mask)
    matrix = rng.standard_normal((n_channels, n_components))
    matrix /= np.linalg.norm(matrix, axis=0)
    mixture = MixtureMatrix(matrix)
    variance = np.full((n_channels,) + grid.shape, 0.1) * rng.uniform(0.5, 2.0, size=(n_channels, 1))
    noise = NoiseCovariance(grid, variance)
    data = DataSet(grid, rng.standard_normal((n_channels,) + grid.shape) * mask)
    return response, mixture, noise, priors, data
