"""Shared fixtures and independent oracles for the test suite.

The quadrature oracles here are deliberately separate from the package's own
adaptive Simpson so the dual-route checks stay independent.
"""

import numpy as np
import pytest

import cfphase as cf


def composite_simpson(f, a, b, panels):
    """Plain composite Simpson with a fixed even panel count (oracle)."""
    if panels % 2:
        panels += 1
    x = np.linspace(a, b, panels + 1)
    fx = f(x)
    h = (b - a) / panels
    return h / 3.0 * (fx[0] + fx[-1] + 4.0 * fx[1:-1:2].sum() + 2.0 * fx[2:-2:2].sum())


def std_params(kappa=0.1, t_end=1.0, c=1.0, nu=1.0):
    """Standard-suite model constants: unit coefficients, isotropic stiffness
    with both Lame constants 1, misfit strain diag(1,0,0), quartic well."""
    return cf.ModelParams(c=c, nu=nu, kappa=kappa,
                          epsbar=cf.SymMatrix3.diag(1.0, 0.0, 0.0),
                          elastic=cf.ElasticTensor.isotropic(1.0, 1.0),
                          a=0.0, d=1.0, t_end=t_end,
                          potential=cf.DoubleWell.quartic())


def random_spd_tensor(rng):
    """Random SPD stiffness map in the orthonormal basis."""
    m = rng.standard_normal((6, 6))
    m = m @ m.T + 0.5 * np.eye(6)
    m = 0.5 * (m + m.T)
    return cf.ElasticTensor(m)


def random_sym_matrix(rng):
    return cf.SymMatrix3(rng.standard_normal(6))


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


@pytest.fixture(scope="session")
def warm_engine():
    """Trigger jit compilation once so timed tests measure runs, not the
    compiler."""
    params = std_params(kappa=0.2, t_end=0.002)
    grid = cf.Grid(0.0, 1.0, 16)
    s0 = cf.make_initial_profile("sine", 0.1, grid)
    cf.run(s0, params, cf.SolverConfig(snapshot_interval=0.001))
    return True
