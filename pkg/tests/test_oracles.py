import numpy as np
import pytest

from stochnh import oracles
from stochnh.errors import NegativeWidth, PastCollapse
from stochnh.field import GaussianInit, Grid
from stochnh.model import random_dissipative
from stochnh.stochastic import generate_path


def test_deterministic_moments_frozen_values():
    # hand-evaluated: lam1 = 1 + 1i, lam2 = -0.5i, q0 = p0 = 0, sigma0 = 1,
    # t = 1: den = 1, q = 0 + 1 - 2(-0.5)(1)(1 + 0)/1 = 2, sigma2 = 1 + 1 = 2
    m = oracles.deterministic_moments(1.0 + 1.0j, -0.5j,
                                      GaussianInit(sigma0=1.0), 1.0)
    assert m.q == pytest.approx(2.0, abs=1e-14)
    assert m.sigma2 == pytest.approx(2.0, abs=1e-14)
    # pure spreading at t = 2: sigma2 = 1 + t^2 = 5
    m2 = oracles.deterministic_moments(0.0, -0.5j, GaussianInit(sigma0=1.0),
                                       2.0)
    assert m2.sigma2 == pytest.approx(5.0, abs=1e-14)
    assert m2.q == 0.0


def test_collapse_time_and_past_collapse():
    assert oracles.collapse_time(0.25, 1.0) == pytest.approx(2.0)
    assert oracles.collapse_time(-0.25, 1.0) is None
    with pytest.raises(PastCollapse):
        oracles.deterministic_moments(0.0, 0.25, GaussianInit(sigma0=1.0),
                                      2.5)


def test_nd_moments_initial_values():
    init = GaussianInit(q0=0.7, p0=-1.2, sigma0=0.9)
    nd = oracles.nd_moments(1.0, -1.0 - 1.0j, init, 0.0)
    assert nd.N_R == pytest.approx(0.7)
    assert nd.N_I == pytest.approx(-1.2 * 0.81)
    assert nd.D_R == pytest.approx(0.81)
    assert nd.D_I == pytest.approx(0.0, abs=1e-15)
    q, s2 = oracles.stochastic_moments(1.0, -1.0 - 1.0j, 1.0, init, 0.0, 0.0)
    assert q == pytest.approx(0.7)
    assert s2 == pytest.approx(0.81)


def test_long_time_limits_frozen_values():
    assert oracles.sigma2_inf(1.0, -1.0 - 1.0j) == pytest.approx(0.5)
    assert oracles.Eq2_inf(-1.0 - 1.0j, 1.0) == pytest.approx(0.25)
    assert oracles.Eq2_inf(-1.0 - 1.0j, 0.5) == pytest.approx(0.0625)
    assert oracles.Eq2_inf(-0.3 - 1.0j, 1.0) == pytest.approx(1 / 1.2)
    with pytest.raises(ValueError):
        oracles.sigma2_inf(1.0, -1.0 + 1.0j)


def test_width_stays_positive_for_dissipative_sign():
    assert oracles.first_negative_width(1.0, -1.0 - 1.0j,
                                        GaussianInit(sigma0=1.0), 12.0) is None


def test_first_negative_width_bracketing():
    # lam_R > 0 drives D_R through zero; the root is consistent with the
    # sampled sign change and stochastic_moments raises just past it
    lam = 0.5 - 1.0j
    init = GaussianInit(sigma0=1.0)
    t0 = oracles.first_negative_width(1.0, lam, init, 12.0)
    assert t0 is not None and 0.0 < t0 < 12.0
    assert oracles.nd_moments(1.0, lam, init, t0 - 1e-6).D_R > 0
    assert oracles.nd_moments(1.0, lam, init, t0 + 1e-6).D_R <= 0
    with pytest.raises(NegativeWidth):
        oracles.stochastic_moments(1.0, lam, 1.0, init, t0 + 0.1, 0.0)


def test_nd_sigma2_approaches_limit():
    nd = oracles.nd_moments(1.0, -1.0 - 1.0j, GaussianInit(sigma0=1.0), 12.0)
    s2 = nd.D_R + nd.D_I ** 2 / nd.D_R
    assert s2 == pytest.approx(0.5, rel=1e-6)


def test_x_moment_formulas_consistency():
    lam = -1.0 - 1.0j
    assert oracles.X_squared_mean(lam, 1e-8) == pytest.approx(1e-8, rel=1e-6)
    assert oracles.X_abs_squared_mean(lam, 1e-8) == pytest.approx(1e-8,
                                                                  rel=1e-6)
    assert oracles.X_abs_squared_mean(0.0, 2.0) == pytest.approx(2.0)


def test_lattice_power_equals_repeated_multiplication():
    g = Grid(20.0, 128)
    prop = oracles.lattice_propagator(0.3 + 0.1j, 0.1 - 0.2j, g.k, 0.5, 64)
    direct = np.ones_like(prop.c)
    for _ in range(64):
        direct = direct * prop.c
    assert np.max(np.abs(prop.c_power_n - direct)
                  / np.maximum(np.abs(direct), 1e-300)) < 1e-10


def test_lattice_converges_to_continuum_symbol():
    g = Grid(20.0, 128)
    errs = []
    for n in (100, 1000, 10000):
        prop = oracles.lattice_propagator(0.0, -0.1 - 0.2j, g.k, 0.5, n)
        band = np.abs(g.k) < 5
        errs.append(np.max(np.abs(prop.c_power_n[band] - prop.continuum[band])))
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-3


def test_lattice_moment_check_all_quadrants():
    init = GaussianInit(sigma0=1.0)
    g = Grid(40.0, 512)
    for lam2 in (0.1 + 0.3j, 0.1 - 0.3j, -0.1 + 0.3j, -0.1 - 0.3j):
        r = oracles.lattice_deterministic_check(0.0, lam2, init, 0.5, g)
        assert r["q_err"] < 1e-3, lam2
        assert r["sigma2_rel_err"] < 1e-3, lam2


def test_propagator_row_lattice_vs_continuum():
    # per-mode kernel error is ~ N (dt sym)^2, worst at k_max, so keep the
    # band modest and the step count high
    g = Grid(20.0, 64)
    prop = oracles.lattice_propagator(0.0, -0.5j, g.k, 0.5, 40000)
    row_l = oracles.propagator_row(prop, g, 0.0, "lattice")
    row_c = oracles.propagator_row(prop, g, 0.0, "continuum")
    assert np.max(np.abs(row_l - row_c)) < 1e-2 * np.max(np.abs(row_c))


def test_per_path_check_small_error():
    spec = random_dissipative(1.0, -1.0 - 1.0j, 1.0)
    path = generate_path(100, 0.0, 2.0, 1e-3 / 64)
    r = oracles.per_path_check(spec, path, 1e-3, 2.0)
    assert r["q_err"] < 5 * np.sqrt(1e-3) * 2
    assert r["sigma2_err"] < 1e-8     # width is path-independent
