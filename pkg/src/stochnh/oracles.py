"""Closed-form reference results: deterministic Gaussian moments, the
stochastic propagator moments driven by X(t), their long-time limits, and
the k-space lattice-determinant propagator.

All functions are pure; proportionality constants of the propagators are
never computed -- comparisons are made on normalized densities and moments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NegativeWidth, PastCollapse
from .field import GaussianInit, Grid, init_gaussian_k
from .model import ModelSpec
from .stochastic import WienerPath, coarsen, derive_X


# ---------------------------------------------------------------------------
# Deterministic model: q(t), sigma^2(t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeterministicMoments:
    q: float
    sigma2: float


def collapse_time(lam2: complex, sigma0: float) -> float | None:
    """t_c = sigma0^2 / (2 lam2_R) when lam2_R > 0, else None."""
    if lam2.real > 0:
        return sigma0 ** 2 / (2.0 * lam2.real)
    return None


def deterministic_moments(lam1: complex, lam2: complex, init: GaussianInit,
                          t: float) -> DeterministicMoments:
    """Exact packet center and squared width for H1 = -i(lam1 dx + lam2 dxx):

        q(t)      = q0 + lam1_R t - 2 lam2_I t (lam1_I t + sigma0^2 p0) / den
        sigma2(t) = den + 4 lam2_I^2 t^2 / den,   den = sigma0^2 - 2 lam2_R t
    """
    s2 = init.sigma0 ** 2
    den = s2 - 2.0 * lam2.real * t
    if den <= 0:
        raise PastCollapse(t, collapse_time(lam2, init.sigma0))
    q = (init.q0 + lam1.real * t
         - 2.0 * lam2.imag * t * (lam1.imag * t + s2 * init.p0) / den)
    sigma2 = den + 4.0 * lam2.imag ** 2 * t ** 2 / den
    return DeterministicMoments(q=q, sigma2=sigma2)


# ---------------------------------------------------------------------------
# Stochastic model: N/D moment functions and q, sigma^2 given X(t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StochasticMoments:
    N_R: float
    N_I: float
    D_R: float
    D_I: float


def nd_moments(m: float, lam: complex, init: GaussianInit, t) -> StochasticMoments:
    """The N_R, N_I, D_R, D_I functions of the stochastic propagator.

    alpha = 1 / (2 m |lam|^2).  At t = 0: (N_R, N_I, D_R, D_I) =
    (q0, p0 sigma0^2, sigma0^2, 0).
    """
    lr, li = lam.real, lam.imag
    s2 = init.sigma0 ** 2
    alpha = 1.0 / (2.0 * m * abs(lam) ** 2)
    e1 = np.exp(lr * t)
    e2 = np.exp(2.0 * lr * t)
    c1, s1 = np.cos(li * t), np.sin(li * t)
    c2, s2t = np.cos(2.0 * li * t), np.sin(2.0 * li * t)
    n_r = e1 * (init.q0 * c1 - init.p0 * s2 * s1)
    n_i = e1 * (init.q0 * s1 + init.p0 * s2 * c1)
    d_r = e2 * (c2 * (s2 + li * alpha) - s2t * lr * alpha) - li * alpha
    d_i = e2 * (c2 * lr * alpha + s2t * (s2 + li * alpha)) - lr * alpha
    return StochasticMoments(N_R=n_r, N_I=n_i, D_R=d_r, D_I=d_i)


def stochastic_moments(m: float, lam: complex, gamma: complex,
                       init: GaussianInit, t: float, x_value: complex):
    """Per-path packet center and squared width given X(t):

        sigma2 = D_R + D_I^2 / D_R
        q      = N_R + Re[gamma X] + (D_I / D_R) (N_I + Im[gamma X])
    """
    nd = nd_moments(m, lam, init, t)
    if nd.D_R <= 0:
        raise NegativeWidth(f"D_R = {nd.D_R} <= 0 at t = {t}")
    gx = complex(gamma) * complex(x_value)
    sigma2 = nd.D_R + nd.D_I ** 2 / nd.D_R
    q = nd.N_R + gx.real + (nd.D_I / nd.D_R) * (nd.N_I + gx.imag)
    return float(q), float(sigma2)


def sigma2_inf(m: float, lam: complex) -> float:
    """Long-time squared width 1 / (2 m (-lam_I)); requires lam_I < 0."""
    if lam.imag >= 0:
        raise ValueError("width limit exists only for lam_I < 0")
    return 1.0 / (2.0 * m * (-lam.imag))


def Eq2_inf(lam: complex, gamma: complex) -> float:
    """Long-time E[q(t)^2] over Wiener paths."""
    lr, li = lam.real, lam.imag
    gr, gi = gamma.real, gamma.imag
    return (-gi ** 2 * lr / (2.0 * li ** 2)
            - (abs(gamma) ** 2) / (4.0 * lr)
            - gr * gi / (2.0 * li))


def X_squared_mean(lam: complex, t: float) -> complex:
    """E[X(t)^2] = (e^{2 lam t} - 1) / (2 lam)."""
    return (np.exp(2.0 * lam * t) - 1.0) / (2.0 * lam)


def X_abs_squared_mean(lam: complex, t: float) -> float:
    """E[|X(t)|^2] = (e^{2 lam_R t} - 1) / (2 lam_R)."""
    lr = lam.real
    if lr == 0:
        return t
    return (np.exp(2.0 * lr * t) - 1.0) / (2.0 * lr)


def first_negative_width(m: float, lam: complex, init: GaussianInit,
                         t_final: float, n_samples: int = 1000) -> float | None:
    """First zero of D_R on (0, t_final], or None if D_R stays positive.

    Dense sampling (D_R is smooth with an exponential envelope) followed by
    bisection.
    """
    ts = np.linspace(0.0, t_final, n_samples + 1)
    dr = nd_moments(m, lam, init, ts).D_R
    neg = np.nonzero(dr <= 0)[0]
    if len(neg) == 0:
        return None
    hi = ts[neg[0]]
    lo = ts[neg[0] - 1]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if nd_moments(m, lam, init, mid).D_R <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Lattice-determinant propagator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticePropagator:
    k: np.ndarray
    c: np.ndarray            # per-k scalar 1 - dt * symbol(k)
    c_power_n: np.ndarray    # c(k)^N via exp(N log c)
    continuum: np.ndarray    # e^{-t symbol(k)}
    n_steps: int
    t: float


def lattice_propagator(lam1: complex, lam2: complex, k: np.ndarray,
                       t: float, n_steps: int) -> LatticePropagator:
    """Finite-N lattice kernel c(k)^N against the continuum limit.

    c(k) = 1 - dt (lam1 (ik) + lam2 (ik)^2); c^N is evaluated as
    exp(N log c), which for integer N equals repeated multiplication exactly
    (any 2 pi i branch offset cancels) without 10^6-fold rounding.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    dt = t / n_steps
    sym = lam1 * (1j * k) + lam2 * (1j * k) ** 2
    c = 1.0 - dt * sym
    c_n = np.exp(n_steps * np.log(c.astype(complex)))
    cont = np.exp(-t * sym)
    return LatticePropagator(k=np.asarray(k, dtype=float), c=c, c_power_n=c_n,
                             continuum=cont, n_steps=n_steps, t=t)


def propagator_row(prop: LatticePropagator, grid: Grid, x0: float = 0.0,
                   which: str = "lattice") -> np.ndarray:
    """x-space propagator row <x_f | U | x0> via the Fourier sum
    (unnormalized; flagged by `which` in {'lattice', 'continuum'})."""
    kernel = prop.c_power_n if which == "lattice" else prop.continuum
    x = grid.x
    # sum_k e^{ik(x_f - x0)} kernel(k) / L
    row = np.zeros_like(x, dtype=complex)
    for kk, val in zip(prop.k, kernel):
        row += np.exp(1j * kk * (x - x0)) * val
    return row / grid.length


def lattice_deterministic_check(lam1: complex, lam2: complex,
                                init: GaussianInit, t: float, grid: Grid,
                                n_steps: int = 40000) -> dict:
    """Evolve a Gaussian with the lattice kernel and compare moments against
    the closed-form deterministic result.  Returns measured-vs-expected
    pairs; the caller applies tolerances."""
    prop = lattice_propagator(lam1, lam2, grid.k, t, n_steps)
    x = grid.x
    # analytic spectrum: exact zeros at high k, so there is no fft rounding
    # floor for a lam2_R > 0 kernel to amplify
    psik = init_gaussian_k(grid, init).amplitudes
    psik_f = psik * prop.c_power_n
    psi_f = np.fft.ifft(psik_f)
    rho = np.abs(psi_f) ** 2
    rho /= np.sum(rho) * grid.dx
    q_num = float(np.sum(x * rho) * grid.dx)
    s2_num = 2.0 * float(np.sum((x - q_num) ** 2 * rho) * grid.dx)
    ref = deterministic_moments(lam1, lam2, init, t)
    return {
        "q_num": q_num, "q_ref": ref.q,
        "sigma2_num": s2_num, "sigma2_ref": ref.sigma2,
        "q_err": abs(q_num - ref.q),
        "sigma2_rel_err": abs(s2_num - ref.sigma2) / abs(ref.sigma2),
    }


def per_path_check(spec: ModelSpec, path: WienerPath, dt: float, t: float,
                   representation: str = "gaussian") -> dict:
    """End-to-end check: integrate the linear SDE on a coarse view of the
    path and compare (q, sigma2) against the closed form driven by X(t)
    computed on the fine path."""
    from .steppers import evolve_prenormalized  # local import: no cycle at module load

    if spec.preset != "random_dissipative":
        raise ValueError("per-path closed form exists only for the "
                         "random_dissipative preset")
    init = GaussianInit(q0=0.0, p0=0.0, sigma0=1.0)
    res = evolve_prenormalized(spec, init, path, dt, t,
                               representation=representation,
                               output_times=[t])
    s = res.summaries[-1]
    x_t = derive_X(path, spec.lam).X[-1]
    q_ref, s2_ref = stochastic_moments(spec.mass, spec.lam, spec.gamma,
                                       init, t, x_t)
    return {
        "q_num": s.q, "q_ref": q_ref, "q_err": abs(s.q - q_ref),
        "sigma2_num": s.sigma2, "sigma2_ref": s2_ref,
        "sigma2_err": abs(s.sigma2 - s2_ref),
        "X": complex(x_t),
    }
