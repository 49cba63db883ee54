import numpy as np
import pytest

from mcflab.field import get_basis, zero_field
from mcflab.geometry import AxisPolynomial
from mcflab.dynamics import GraphState


@pytest.fixture(scope="session")
def basis16():
    return get_basis(16, 4)


@pytest.fixture(scope="session")
def basis24():
    return get_basis(24, 4)


@pytest.fixture
def cylinder_state():
    return GraphState(0.0, AxisPolynomial({}, T=1.0), zero_field(16, 4))


def seeded_field(n_y, k_omega, seed, amplitude=1e-3):
    """Random smooth low-degree field for round-trip style tests."""
    rng = np.random.default_rng(seed)
    fld = zero_field(n_y, k_omega)
    decay_n = np.exp(-0.8 * np.arange(n_y + 1))
    decay_f = np.exp(-0.5 * np.arange(fld.coeffs.shape[1]))
    fld.coeffs[:] = amplitude * rng.normal(size=fld.coeffs.shape) \
        * np.outer(decay_n, decay_f)
    return fld
