import numpy as np
import pytest

from models.mixture import FamilyId, MixtureModel


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: Monte Carlo harness runs (deselect with -m "not slow")')


@pytest.fixture
def generator():
    return np.random.default_rng(20240611)


@pytest.fixture
def three_gaussians():
    """k=3, d=1 Gaussian mixture with separation 4."""
    return MixtureModel(FamilyId.GAUSSIAN, [[0.0], [4.0], [8.0]])


@pytest.fixture
def model_file(tmp_path, three_gaussians):
    path = tmp_path / 'model.json'
    path.write_text(three_gaussians.to_json())
    return str(path)
