import pytest

from dividend_barrier import ModelParams


@pytest.fixture(scope="session")
def params():
    # mu=2, sigma^2=50, delta=0.2, c=0.05, alpha=0.5, beta=8
    return ModelParams.from_sigma2(2.0, 50.0, 0.2, 0.05, 0.5, 8.0)
