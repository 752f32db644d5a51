"""Wiener-path ensembles and moment aggregation.

Per-trajectory seeds are derived from (master_seed, index) with SeedSequence,
so results are independent of chunking and execution order; for quadratic
models the Gaussian-manifold engine is vectorized across the trajectory
batch (elementwise arithmetic, hence bitwise identical to one-at-a-time).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllTrajectoriesTerminated, InsufficientData
from .field import GaussianInit
from .steppers import (_GaussianEngine, _gaussian_compatible, _output_schedule,
                       evolve_prenormalized, gaussian_log_norm, gaussian_state)
from .stochastic import generate_path, seed_for_trajectory


@dataclass(frozen=True)
class EnsembleStats:
    times: np.ndarray
    mean_q: np.ndarray
    var_q: np.ndarray
    se_var_q: np.ndarray       # standard error of var_q (fourth-moment formula)
    mean_q2: np.ndarray
    mean_sigma2: np.ndarray
    mean_log_norm: np.ndarray
    final_q: np.ndarray        # per-trajectory q at the last time (NaN if dead)
    n_trajectories: int
    master_seed: int
    terminations: dict         # kind -> count


def _var_se(samples: np.ndarray):
    """(variance, SE of the variance) over axis 0, NaN-aware."""
    n = np.sum(np.isfinite(samples), axis=0)
    mean = np.nanmean(samples, axis=0)
    d = samples - mean
    var = np.nanmean(d ** 2, axis=0) * n / np.maximum(n - 1, 1)
    m4 = np.nanmean(d ** 4, axis=0)
    se2 = (m4 - (n - 3) / np.maximum(n - 1, 1) * var ** 2) / np.maximum(n, 1)
    return var, np.sqrt(np.maximum(se2, 0.0))


def run_ensemble(spec, init: GaussianInit, n_traj: int, t_final: float,
                 dt: float, master_seed: int, output_times=None,
                 representation: str = "auto", grid=None, mode: str = "exp2",
                 chunk: int = 1000) -> EnsembleStats:
    """Monte Carlo ensemble of prenormalized trajectories."""
    n_steps = int(round(t_final / dt))
    schedule = _output_schedule(dt, n_steps, output_times)
    out_idx = sorted(schedule)
    times = np.array([schedule[i] for i in out_idx])

    use_gaussian = (representation in ("auto", "gaussian")
                    and grid is None and _gaussian_compatible(spec))
    if representation == "gaussian" and not use_gaussian:
        raise ValueError("gaussian representation not applicable here")

    n_out = len(out_idx)
    q = np.full((n_traj, n_out), np.nan)
    s2 = np.full((n_traj, n_out), np.nan)
    ln = np.full((n_traj, n_out), np.nan)
    terms = {}

    if use_gaussian:
        engine = _GaussianEngine(spec, dt, mode)
        floor = 0.01 * init.sigma0 ** 2
        for lo in range(0, n_traj, chunk):
            hi = min(lo + chunk, n_traj)
            b = hi - lo
            dw = np.empty((b, n_steps))
            for j in range(b):
                rng = np.random.Generator(
                    np.random.Philox(seed_for_trajectory(master_seed, lo + j)))
                dw[j] = rng.normal(0.0, np.sqrt(dt), n_steps)
            A0, B0, C0 = gaussian_state(init)
            A = np.full(b, A0, dtype=complex)
            B = np.full(b, B0, dtype=complex)
            C = np.full(b, C0, dtype=complex)
            log_norm = np.zeros(b)
            alive = np.ones(b, dtype=bool)
            col = 0
            if out_idx[0] == 0:
                q[lo:hi, 0] = np.real(B) / np.real(A)
                s2[lo:hi, 0] = 1.0 / np.real(A)
                ln[lo:hi, 0] = 0.0
                col = 1
            for i in range(n_steps):
                A, B, C = engine.step((A, B, C), dw[:, i])
                ok = np.isfinite(A) & (np.real(A) > 0)
                shift = np.where(ok, gaussian_log_norm(
                    np.where(ok, A, 1.0), np.where(ok, B, 0.0), C), 0.0)
                log_norm += np.where(alive, np.real(shift), 0.0)
                C = C - shift
                width = np.where(ok, 1.0 / np.real(np.where(ok, A, 1.0)), 0.0)
                died_overflow = alive & ~ok
                died_collapse = alive & ok & (width < floor)
                for name, mask in (("numerical_overflow", died_overflow),
                                   ("width_collapse", died_collapse)):
                    c = int(np.sum(mask))
                    if c:
                        terms[name] = terms.get(name, 0) + c
                alive &= ok & (width >= floor)
                if col < n_out and (i + 1) == out_idx[col]:
                    qv = np.real(B) / np.real(A)
                    q[lo:hi, col] = np.where(alive, qv, np.nan)
                    s2[lo:hi, col] = np.where(alive, width, np.nan)
                    ln[lo:hi, col] = np.where(alive, log_norm, np.nan)
                    col += 1
        terms["completed"] = n_traj - sum(terms.values())
    else:
        if grid is None:
            raise ValueError("grid representation requires a grid")
        for j in range(n_traj):
            seed = seed_for_trajectory(master_seed, j)
            path = generate_path(seed, 0.0, n_steps * dt, dt)
            res = evolve_prenormalized(spec, init, path, dt, n_steps * dt,
                                       mode=mode, representation="grid",
                                       grid=grid, output_times=times)
            terms[res.termination.kind] = terms.get(res.termination.kind, 0) + 1
            got = {round(t / dt): i for i, t in enumerate(res.times)}
            for col, step in enumerate(out_idx):
                if step in got:
                    s = res.summaries[got[step]]
                    q[j, col] = s.q
                    s2[j, col] = s.sigma2
                    ln[j, col] = res.log_norms[got[step]]

    if not np.any(np.isfinite(q[:, -1])):
        raise AllTrajectoriesTerminated(
            f"no trajectory survived to t = {times[-1]}")
    var_q, se_var = _var_se(q)
    return EnsembleStats(
        times=times,
        mean_q=np.nanmean(q, axis=0),
        var_q=var_q,
        se_var_q=se_var,
        mean_q2=np.nanmean(q ** 2, axis=0),
        mean_sigma2=np.nanmean(s2, axis=0),
        mean_log_norm=np.nanmean(ln, axis=0),
        final_q=q[:, -1],
        n_trajectories=n_traj,
        master_seed=master_seed,
        terminations=terms,
    )


@dataclass(frozen=True)
class DiffusionFit:
    exponent: float
    regime: str
    window: tuple


def diffusion_classifier(times: np.ndarray, values: np.ndarray,
                         window=None) -> DiffusionFit:
    """Growth-law exponent of values ~ t^a from the local growth rate.

    The exponent is 1 + (log-log slope of the finite-difference derivative),
    which is exact for series of the form c0 + c1 t^a over any window --
    unlike a direct log(values)-log(t) fit, which an additive offset biases.
    Regimes: a > 1.5 ballistic, 0.5 <= a <= 1.5 diffusive, a < 0.25
    saturating, otherwise indeterminate.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (times[0] + 0.5 * (times[-1] - times[0]), times[-1])
    sel = (times >= window[0]) & (times <= window[1])
    t, v = times[sel], values[sel]
    if len(t) < 10:
        raise InsufficientData(f"{len(t)} points in window; need >= 10")
    d = np.diff(v) / np.diff(t)
    tm = 0.5 * (t[1:] + t[:-1])
    pos = d > 0
    if np.sum(pos) < 3:
        return DiffusionFit(exponent=0.0, regime="saturating", window=window)
    slope = float(np.polyfit(np.log(tm[pos]), np.log(d[pos]), 1)[0])
    a = 1.0 + slope
    if a > 1.5:
        regime = "ballistic"
    elif a >= 0.5:
        regime = "diffusive"
    elif a < 0.25:
        regime = "saturating"
    else:
        regime = "indeterminate"
    return DiffusionFit(exponent=a, regime=regime, window=tuple(window))
