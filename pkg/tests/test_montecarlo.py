import numpy as np
import pytest

from stochnh.errors import AllTrajectoriesTerminated, InsufficientData
from stochnh.field import GaussianInit, Grid
from stochnh.model import deterministic_nh, random_dissipative
from stochnh.montecarlo import diffusion_classifier, run_ensemble
from stochnh.oracles import Eq2_inf, sigma2_inf

SPEC = random_dissipative(1.0, -1.0 - 1.0j, 1.0)
INIT = GaussianInit(sigma0=1.0)


def test_bitwise_reproducible_and_chunk_invariant():
    a = run_ensemble(SPEC, INIT, 200, 2.0, 1e-2, master_seed=5)
    b = run_ensemble(SPEC, INIT, 200, 2.0, 1e-2, master_seed=5)
    c = run_ensemble(SPEC, INIT, 200, 2.0, 1e-2, master_seed=5, chunk=37)
    assert np.array_equal(a.final_q, b.final_q)
    assert np.array_equal(a.final_q, c.final_q)
    d = run_ensemble(SPEC, INIT, 200, 2.0, 1e-2, master_seed=6)
    assert not np.array_equal(a.final_q, d.final_q)


def test_steady_state_statistics():
    st = run_ensemble(SPEC, INIT, 1500, 12.0, 5e-3, master_seed=11,
                      output_times=[12.0])
    assert st.mean_sigma2[-1] == pytest.approx(sigma2_inf(1.0, -1.0 - 1.0j),
                                               rel=0.02)
    se = np.nanstd(st.final_q ** 2) / np.sqrt(st.n_trajectories)
    assert abs(st.mean_q2[-1] - Eq2_inf(-1.0 - 1.0j, 1.0)) < 3 * se + 0.01
    assert st.terminations == {"completed": 1500}


def test_grid_and_gaussian_branches_agree():
    spec = random_dissipative(1.0, -0.3 - 1.0j, 0.5)
    kw = dict(n_traj=3, t_final=0.25, dt=1e-3, master_seed=3,
              output_times=[0.25])
    sg = run_ensemble(spec, INIT, representation="gaussian", **kw)
    sx = run_ensemble(spec, INIT, representation="grid",
                      grid=Grid(16.0, 128), **kw)
    assert sg.mean_q[-1] == pytest.approx(sx.mean_q[-1], abs=5e-3)
    assert sg.mean_sigma2[-1] == pytest.approx(sx.mean_sigma2[-1], abs=5e-3)


def test_all_trajectories_terminated():
    collapse = deterministic_nh(0.0, 0.25)
    with pytest.raises(AllTrajectoriesTerminated):
        run_ensemble(collapse, INIT, 2, 2.5, 1e-3, master_seed=0,
                     representation="grid", grid=Grid(16.0, 1024),
                     output_times=[2.5])


def test_var_se_fourth_moment():
    # normal samples: Var(s^2) ~ 2 sigma^4 / n, so SE ~ sigma^2 sqrt(2/n)
    st = run_ensemble(SPEC, INIT, 2000, 4.0, 1e-2, master_seed=9,
                      output_times=[4.0])
    expected = st.var_q[-1] * np.sqrt(2.0 / 2000)
    assert st.se_var_q[-1] == pytest.approx(expected, rel=0.5)


def test_classifier_linear_series_is_diffusive():
    t = np.linspace(0.1, 10.0, 300)
    fit = diffusion_classifier(t, 1.0 + 0.5 * t, window=(4.0, 10.0))
    assert fit.regime == "diffusive"
    assert fit.exponent == pytest.approx(1.0, abs=1e-6)


def test_classifier_quadratic_is_ballistic():
    t = np.linspace(0.1, 10.0, 300)
    fit = diffusion_classifier(t, 0.3 * t ** 2 + 2.0, window=(4.0, 10.0))
    assert fit.regime == "ballistic"
    assert fit.exponent == pytest.approx(2.0, abs=1e-6)


def test_classifier_saturating():
    t = np.linspace(0.1, 10.0, 300)
    fit = diffusion_classifier(t, 3.0 - 2.0 * np.exp(-t), window=(4.0, 10.0))
    assert fit.regime == "saturating"
    flat = diffusion_classifier(t, np.full_like(t, 3.0), window=(4.0, 10.0))
    assert flat.regime == "saturating"


def test_classifier_insufficient_data():
    t = np.linspace(0.0, 10.0, 12)
    with pytest.raises(InsufficientData):
        diffusion_classifier(t, t, window=(9.0, 10.0))
