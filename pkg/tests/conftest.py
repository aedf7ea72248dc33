import numpy as np
import pytest

from dissipative_kitaev.model_core import ChainParams


@pytest.fixture
def fig1():
    """Reference point: mu = 0, w = 1, Delta = i, Gamma = 1, N = 4."""
    return ChainParams(N=4, w=1.0, delta=1j, mu=0.0, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_params(rng, N=4, **fixed):
    """Generic quadratic parameter set (complex w, Delta, jump asymmetry)."""
    kw = dict(
        N=N,
        w=complex(rng.normal(), rng.normal()),
        delta=complex(rng.normal(), rng.normal()),
        mu=float(rng.normal()),
        gamma=float(rng.uniform(0.1, 2.0)),
        jump_asymmetry=complex(rng.normal(), rng.normal()),
    )
    kw.update(fixed)
    return ChainParams(**kw)


def random_density_matrix(rng, dim):
    X = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "ACCEPTANCE_REPORT", {}) if mod else {}
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
