import numpy as np
import pytest

from toeplitz_ml.matrix import build_sinc_model, generate_snapshots, make_rng, sample_covariance


@pytest.fixture(scope="session")
def sinc17():
    return build_sinc_model(17, 0.1, 0.01)


@pytest.fixture(scope="session")
def trial85(sinc17):
    """Snapshots and sample covariance of one N=17, T=85 draw."""
    S = generate_snapshots(sinc17, 85, seed=3)
    return S, sample_covariance(S)


def random_pd_toeplitz(rng, n, margin=0.2):
    """Random symmetric Toeplitz lags made p.d. by raising t_0."""
    lags = rng.standard_normal(n) / np.arange(1, n + 1)
    lags[0] = 0.0
    T = np.array([[lags[abs(i - j)] for j in range(n)] for i in range(n)])
    lags[0] = margin - np.linalg.eigvalsh(T)[0]
    return lags


def random_hpd(rng, n, complex_=True):
    X = rng.standard_normal((n, 3 * n))
    if complex_:
        X = X + 1j * rng.standard_normal((n, 3 * n))
    return X @ X.conj().T / (3 * n)


@pytest.fixture
def rng():
    return make_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
