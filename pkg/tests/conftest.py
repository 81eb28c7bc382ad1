import numpy as np
import pytest


def pytest_addoption(parser):
    parser.addoption("--data-dir", default=None,
                     help="directory with the released benchmark and raw tag/genre files")
    parser.addoption("--run-slow", action="store_true", default=False,
                     help="run the multi-hour reproduction check")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def data_dir(request):
    return request.config.getoption("--data-dir")

