"""Periodic spatial grid, wave-function storage, Gaussian init and moments.

Width convention: the squared width sigma2 reported everywhere satisfies
|psi|^2 ~ exp(-(x - q)^2 / sigma2), i.e. sigma2 = 2 * Var(|psi|^2).

Fourier convention: psi_k = fft(psi) * dx / sqrt(2 pi) on the wavenumber
grid k in (2 pi / L) * {-N/2 .. N/2 - 1}, which makes the transform unitary
with respect to the dx / dk measures (Parseval holds exactly).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import BoundaryOverlap, DegenerateDensity, UnderResolved


@dataclass(frozen=True)
class Grid:
    """Periodic grid of N_x points (power of two) on [-L/2, L/2)."""
    length: float
    nx: int

    def __post_init__(self):
        if self.nx < 16 or (self.nx & (self.nx - 1)) != 0:
            raise ValueError(f"nx = {self.nx} must be a power of two >= 16")
        if self.length <= 0:
            raise ValueError("grid length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.nx

    @property
    def x(self) -> np.ndarray:
        return -self.length / 2 + self.dx * np.arange(self.nx)

    @property
    def k(self) -> np.ndarray:
        """Wavenumbers in fft layout (0, ..., +k_max, -k_max, ..., -dk)."""
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)


@dataclass(frozen=True)
class WaveFunction:
    """Amplitudes (unit L2 norm) plus the stripped log-norm ledger.

    The true prenormalized function is exp(log_norm) * amplitudes.  ``space``
    records whether amplitudes are x-space or k-space samples.
    """
    grid: Grid
    amplitudes: np.ndarray
    log_norm: float = 0.0
    space: str = "x"

    def norm(self) -> float:
        d = self.grid.dx if self.space == "x" else 2 * np.pi / self.grid.length
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * d))


@dataclass(frozen=True)
class GaussianInit:
    q0: float = 0.0
    p0: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValueError("sigma0 must be positive")


@dataclass(frozen=True)
class GaussianSummary:
    q: float
    sigma2: float
    p_mean: float
    residual: float
    boundary_mass: float


def init_gaussian(grid: Grid, init: GaussianInit) -> WaveFunction:
    """Unit-norm packet with |psi|^2 ~ exp(-(x - q0)^2 / sigma0^2)."""
    if init.sigma0 < 4 * grid.dx:
        raise UnderResolved(
            f"sigma0 = {init.sigma0} below 4 dx = {4 * grid.dx}")
    clearance = np.exp(-(grid.length / 2 - abs(init.q0)) ** 2 / (2 * init.sigma0 ** 2))
    if abs(init.q0) >= grid.length / 2 or clearance >= 1e-10:
        raise BoundaryOverlap(
            f"packet at q0 = {init.q0} too close to the boundary "
            f"(clearance factor {clearance:.2e})")
    x = grid.x
    amp = np.exp(-(x - init.q0) ** 2 / (2 * init.sigma0 ** 2)
                 + 1j * init.p0 * x)
    amp = amp / (np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dx))
    return WaveFunction(grid=grid, amplitudes=amp, log_norm=0.0, space="x")


def init_gaussian_k(grid: Grid, init: GaussianInit) -> WaveFunction:
    """Unit-norm Gaussian packet sampled analytically in k-space.

    Unlike fft(init_gaussian(...)), the spectrum carries no rounding floor:
    modes beyond the analytic support underflow to exactly zero and remain
    zero under diagonal evolution.  This matters for models whose spectral
    factor grows with |k| (e.g. width collapse), where a 1e-16 floor would
    be amplified into garbage long before the physical signal arrives.
    """
    if init.sigma0 < 4 * grid.dx:
        raise UnderResolved(
            f"sigma0 = {init.sigma0} below 4 dx = {4 * grid.dx}")
    clearance = np.exp(-(grid.length / 2 - abs(init.q0)) ** 2 / (2 * init.sigma0 ** 2))
    if abs(init.q0) >= grid.length / 2 or clearance >= 1e-10:
        raise BoundaryOverlap(
            f"packet at q0 = {init.q0} too close to the boundary "
            f"(clearance factor {clearance:.2e})")
    k = grid.k
    u = k - init.p0
    amp = np.exp(-init.sigma0 ** 2 * u ** 2 / 2.0) * np.exp(-1j * u * init.q0)
    # fft phase convention for the grid origin at -L/2 (exactly +-1 per mode)
    amp = amp * np.exp(-1j * k * grid.length / 2.0)
    dk = 2 * np.pi / grid.length
    amp = amp / np.sqrt(np.sum(np.abs(amp) ** 2) * dk)
    return WaveFunction(grid=grid, amplitudes=amp, log_norm=0.0, space="k")


def transform_to_k(psi: WaveFunction) -> WaveFunction:
    if psi.space == "k":
        return psi
    amp_k = np.fft.fft(psi.amplitudes) * psi.grid.dx / np.sqrt(2 * np.pi)
    return replace(psi, amplitudes=amp_k, space="k")


def transform_to_x(psi: WaveFunction) -> WaveFunction:
    if psi.space == "x":
        return psi
    amp_x = np.fft.ifft(psi.amplitudes) * np.sqrt(2 * np.pi) / psi.grid.dx
    return replace(psi, amplitudes=amp_x, space="x")


def summarize(psi: WaveFunction) -> GaussianSummary:
    """Moments of |psi|^2 in the paper width convention plus diagnostics.

    q and sigma2 come from trapezoidal moments; the Gaussian residual (L2
    misfit against the moment-matched Gaussian) is diagnostic only.
    """
    psi_x = transform_to_x(psi)
    grid = psi.grid
    x = grid.x
    rho = np.abs(psi_x.amplitudes) ** 2
    total = np.sum(rho) * grid.dx
    if total == 0:
        raise DegenerateDensity("all amplitudes are zero")
    rho = rho / total
    q = float(np.sum(x * rho) * grid.dx)
    var = float(np.sum((x - q) ** 2 * rho) * grid.dx)
    sigma2 = 2.0 * var

    # mean momentum from the k-space density
    psi_k = transform_to_k(psi_x)
    k = grid.k
    rho_k = np.abs(psi_k.amplitudes) ** 2
    rho_k = rho_k / np.sum(rho_k)
    p_mean = float(np.sum(k * rho_k))

    # relative L2 misfit against the moment-matched Gaussian density
    if var > 0:
        model = np.exp(-(x - q) ** 2 / (2 * var))
        model /= np.sum(model) * grid.dx
        residual = float(np.linalg.norm(rho - model) / np.linalg.norm(rho))
    else:
        residual = 1.0

    n_edge = max(1, grid.nx // 20)  # outer 10% of the grid: 5% per side
    edge = np.concatenate([rho[:n_edge], rho[-n_edge:]])
    boundary_mass = float(np.sum(edge) * grid.dx)
    return GaussianSummary(q=q, sigma2=sigma2, p_mean=p_mean,
                           residual=residual, boundary_mass=boundary_mass)
