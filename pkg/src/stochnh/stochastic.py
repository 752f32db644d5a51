"""Reproducible Wiener paths and the derived processes X(t), Y_t.

Paths are generated once at a finest resolution dt_fine; any coarser view
is an exact partial-sum of the stored fine increments (never resampled), so
dt-refinement studies run on one fixed Brownian realization.

Generator: Philox (counter-based).  Per-trajectory seeds come from
numpy's SeedSequence hashed over (master_seed, trajectory_index), which is
stable across processes and execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import BadInterval, IndivisibleFactor

GENERATOR_NAME = "Philox"


def seed_for_trajectory(master_seed: int, index: int) -> int:
    """Stable 64-bit per-trajectory seed derived from the master seed."""
    ss = np.random.SeedSequence((int(master_seed), int(index)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class WienerPath:
    seed: int
    t0: float
    tf: float
    dt_fine: float
    increments: np.ndarray   # i.i.d. Normal(0, dt_fine)
    cumulative: np.ndarray   # W on the fine grid, cumulative[0] = 0

    @property
    def n_steps(self) -> int:
        return len(self.increments)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_fine * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class CoarseView:
    """Partial-sum view of a fine path at dt = factor * dt_fine."""
    dt: float
    increments: np.ndarray


@dataclass(frozen=True)
class DerivedProcesses:
    """X = W + lam * Y with Y_t = int_0^t W_s e^{lam (t - s)} ds."""
    lam: complex
    X: np.ndarray
    Y: np.ndarray


def generate_path(seed: int, t0: float, tf: float, dt_fine: float) -> WienerPath:
    if tf <= t0:
        raise BadInterval(f"tf = {tf} must exceed t0 = {t0}")
    span = tf - t0
    n = span / dt_fine
    n_round = round(n)
    if n_round < 1 or abs(n - n_round) > 1e-12 * max(1.0, n):
        raise BadInterval(
            f"dt_fine = {dt_fine} does not divide the interval length {span}")
    rng = np.random.Generator(np.random.Philox(seed))
    inc = rng.normal(0.0, np.sqrt(dt_fine), n_round)
    cum = np.concatenate([[0.0], np.cumsum(inc)])
    return WienerPath(seed=int(seed), t0=t0, tf=tf, dt_fine=dt_fine,
                      increments=inc, cumulative=cum)


def coarsen(path: WienerPath | CoarseView, factor: int) -> CoarseView:
    """Exact partial-sum coarse view; W endpoints unchanged."""
    if factor < 1:
        raise IndivisibleFactor(f"factor {factor} < 1")
    if isinstance(path, WienerPath):
        inc, dt = path.increments, path.dt_fine
    else:
        inc, dt = path.increments, path.dt
    if len(inc) % factor != 0:
        raise IndivisibleFactor(
            f"factor {factor} does not divide {len(inc)} steps")
    coarse = inc.reshape(-1, factor).sum(axis=1)
    return CoarseView(dt=dt * factor, increments=coarse)


def derive_X(path: WienerPath, lam: complex) -> DerivedProcesses:
    """Left-point (Ito-consistent) quadrature of Y with the exact
    exponential kernel:

        Y_{n+1} = e^{lam h} (Y_n + W_n h),    X = W + lam Y
    """
    h = path.dt_fine
    w = path.cumulative
    a = np.exp(complex(lam) * h)
    # one-pole recursion y[n] = a*h*w[n-1] + a*y[n-1]
    y = lfilter([0.0, a * h], [1.0, -a], w.astype(complex))
    x = w + complex(lam) * y
    return DerivedProcesses(lam=complex(lam), X=x, Y=y)


def derive_X_trapezoid(path: WienerPath, lam: complex) -> DerivedProcesses:
    """Trapezoid variant of derive_X, for quadrature-sensitivity checks."""
    h = path.dt_fine
    w = path.cumulative.astype(complex)
    a = np.exp(complex(lam) * h)
    # y[n] = a*y[n-1] + h/2*(w[n] + a*w[n-1])
    y = lfilter([0.5 * h, 0.5 * h * a], [1.0, -a], w)
    x = path.cumulative + complex(lam) * y
    return DerivedProcesses(lam=complex(lam), X=x, Y=y)
