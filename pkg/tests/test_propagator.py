import math

import numpy as np
import pytest

from mcflab.propagator import (POTENTIALS, PropagatorAbort, build_grid,
                               coefficients, decay_battery, eigenfunction,
                               eigensum_apply, measure_decay, mehler_apply,
                               project_pn, projected_propagate, synthesize,
                               weighted_sup, write_decay_report)


@pytest.fixture(scope="module")
def grid():
    return build_grid()


def test_eigenfunction_orthonormality(grid):
    """coefficients() recovers exactly sqrt(2 sqrt(pi) 2^k k!) e_k for
    psi_k, i.e. the flat inner products of the psi_k are diagonal."""
    for k in (0, 1, 5, 12):
        c = coefficients(grid, eigenfunction(grid, k))
        norm = math.sqrt(2.0 * math.sqrt(math.pi) * 2.0**k
                         * math.factorial(k))
        expect = np.zeros_like(c)
        expect[k] = norm
        assert np.abs(c - expect).max() < 1e-12 * norm


def test_synthesize_coefficients_round_trip(grid):
    rng = np.random.default_rng(3)
    c = rng.normal(size=20) * np.exp(-0.5 * np.arange(20))
    g = synthesize(grid, c)
    back = coefficients(grid, g)
    np.testing.assert_allclose(back[:20], c, atol=1e-13)
    assert np.abs(back[20:]).max() < 1e-13


def test_semigroup_property(grid):
    g = eigenfunction(grid, 3) + 0.5 * eigenfunction(grid, 6)
    one = eigensum_apply(eigensum_apply(g, 0.4, grid), 0.7, grid)
    two = eigensum_apply(g, 1.1, grid)
    assert np.abs(one - two).max() < 1e-12


def test_eigensum_exact_action(grid):
    for k, s in ((2, 0.5), (5, 1.25)):
        g = eigenfunction(grid, k)
        out = eigensum_apply(g, s, grid)
        np.testing.assert_allclose(out, math.exp(-(k / 2.0 - 1.0) * s) * g,
                                   atol=1e-12)


def test_mehler_matches_eigensum(grid):
    rng = np.random.default_rng(8)
    c = rng.normal(size=12) * np.exp(-0.7 * np.arange(12))
    g = synthesize(grid, c)
    for s in (0.05, 0.3, 1.0, 3.0):
        a = mehler_apply(g, s, grid)
        b = eigensum_apply(g, s, grid)
        assert np.abs(a - b).max() < 1e-10
    # the short-time branch agrees with the exact flow to O(s^2)
    short = mehler_apply(g, 1e-9, grid)
    exact = eigensum_apply(g, 1e-9, grid)
    assert np.abs(short - exact).max() < 1e-12


def test_projection_removes_low_modes(grid):
    g = (eigenfunction(grid, 1) + eigenfunction(grid, 3)
         + eigenfunction(grid, 5))
    out = project_pn(g, 3, grid)
    c = coefficients(grid, out)
    assert np.abs(c[:4]).max() < 1e-10 * np.abs(c).max()
    # psi_5 passes through unchanged
    c5 = coefficients(grid, eigenfunction(grid, 5))[5]
    assert abs(c[5] - c5) < 1e-10 * c5


def test_propagate_zero_potential_matches_kernel(grid):
    g0 = eigenfunction(grid, 4) + eigenfunction(grid, 6)
    n, span = 2, 1.0
    out = projected_propagate(g0, POTENTIALS["zero"], n, span, grid=grid)
    ref = project_pn(mehler_apply(project_pn(g0, n, grid), span, grid), n,
                     grid)
    assert np.abs(out - ref).max() < 1e-8


def test_propagate_abort_guard(grid):
    g0 = eigenfunction(grid, 3)
    grow = lambda y, tau: np.full_like(y, -6.0)  # amplifying potential
    with pytest.raises(PropagatorAbort):
        projected_propagate(g0, grow, 2, 2.0, grid=grid)


def test_measure_decay():
    taus = np.linspace(0.0, 4.0, 17)
    fit = measure_decay(np.exp(-1.3 * taus), taus)
    assert fit.rate == pytest.approx(1.3, abs=1e-10)
    assert fit.conclusive and fit.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError):
        measure_decay(np.ones(3), taus[:3])
    noisy = np.exp(np.random.default_rng(0).normal(size=17))
    assert not measure_decay(noisy, taus).conclusive


def test_weighted_sup_scaling(grid):
    g = eigenfunction(grid, 5)
    a = weighted_sup(g, 2, 3, grid)
    b = weighted_sup(2.0 * g, 2, 3, grid)
    assert b == pytest.approx(2.0 * a, rel=1e-12)
    assert weighted_sup(g, 3, 3, grid) < a  # heavier weight, smaller sup


def test_decay_battery_beats_spectral_bound(tmp_path, grid):
    """The projected flow decays at least at the spectral rate (n-1)/2 for
    every test potential."""
    rows = decay_battery(n_values=(2, 3), tau_span=4.0, grid=grid)
    assert len(rows) == 2 * len(POTENTIALS)
    for row in rows:
        assert row["margin"] > -0.05, row
        assert row["bound"] == (row["n"] - 1) / 2.0
    path = tmp_path / "decay_report.csv"
    write_decay_report(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].startswith("test,")
    assert len(lines) == len(rows) + 1
