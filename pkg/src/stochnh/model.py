"""Model specification: the operators H1 (deterministic) and H2 (stochastic).

Operators are stored as structured term lists.  Two kinds occur in practice:

* ``DerivativePoly(order, coeff)`` -- ``coeff * d^n/dx^n``; diagonal in k-space
  with spectral symbol ``coeff * (ik)^n``.
* ``MixedDxX(coeff)`` -- ``coeff * (d/dx . x)``, i.e. first multiply by x then
  differentiate.  This is the dilation-type term of the dissipative model.

``Scalar(coeff)`` (a multiple of the identity) appears only as output of the
Hermitian decomposition, never in user-built models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import EmptyModel, UnsupportedOrder

MAX_DERIVATIVE_ORDER = 4


@dataclass(frozen=True)
class DerivativePoly:
    """coeff * d^order/dx^order."""
    order: int
    coeff: complex

    def __post_init__(self):
        if not (1 <= self.order <= MAX_DERIVATIVE_ORDER):
            raise UnsupportedOrder(
                f"derivative order {self.order} outside supported range "
                f"1..{MAX_DERIVATIVE_ORDER}")
        _require_finite(self.coeff)

    def adjoint(self) -> "DerivativePoly":
        # (d^n)^dagger = (-1)^n d^n
        return DerivativePoly(self.order, (-1) ** self.order * self.coeff.conjugate())


@dataclass(frozen=True)
class MixedDxX:
    """coeff * (d/dx . x): psi -> coeff * d/dx (x psi)."""
    coeff: complex

    def __post_init__(self):
        _require_finite(self.coeff)


@dataclass(frozen=True)
class Scalar:
    """coeff * identity; produced by the Hermitian decomposition only."""
    coeff: complex

    def __post_init__(self):
        _require_finite(self.coeff)


OperatorTerm = DerivativePoly | MixedDxX | Scalar


def _require_finite(c: complex):
    if not (math.isfinite(c.real) and math.isfinite(c.imag)):
        raise ValueError(f"non-finite coefficient {c!r}")


@dataclass(frozen=True)
class ModelSpec:
    """Expanded operator terms plus the preset parameters they came from.

    ``preset`` is one of "custom", "deterministic_nh", "random_dissipative";
    the parameter fields are retained so closed-form references can dispatch
    on them.
    """
    h1_terms: tuple
    h2_terms: tuple
    preset: str = "custom"
    mass: float = 1.0
    lam: complex = 0j          # dissipation parameter of the random model
    gamma: complex = 0j        # noise strength of the random model
    lam1: complex = 0j         # drift coefficient of the deterministic model
    lam2: complex = 0j         # diffusion coefficient of the deterministic model

    def __post_init__(self):
        if len(self.h1_terms) == 0:
            raise EmptyModel("H1 has no terms")

    @property
    def has_mixed_term(self) -> bool:
        return any(isinstance(t, MixedDxX) for t in self.h1_terms + self.h2_terms)

    @property
    def is_diagonal(self) -> bool:
        """True when every term is a pure derivative (k-space diagonal)."""
        return all(isinstance(t, DerivativePoly) for t in self.h1_terms + self.h2_terms)


def build_model(h1_terms, h2_terms=(), mass: float = 1.0) -> ModelSpec:
    """Build a custom model from explicit term lists."""
    h1 = tuple(h1_terms)
    h2 = tuple(h2_terms)
    h1 = tuple(t for t in h1 if _term_coeff(t) != 0)
    h2 = tuple(t for t in h2 if _term_coeff(t) != 0)
    return ModelSpec(h1_terms=h1, h2_terms=h2, preset="custom", mass=mass)


def _term_coeff(term) -> complex:
    return term.coeff


def deterministic_nh(lam1: complex, lam2: complex) -> ModelSpec:
    """Preset: H1 = -i(lam1 d/dx + lam2 d^2/dx^2), no stochastic operator."""
    terms = []
    if lam1 != 0:
        terms.append(DerivativePoly(1, -1j * complex(lam1)))
    if lam2 != 0:
        terms.append(DerivativePoly(2, -1j * complex(lam2)))
    if not terms:
        raise EmptyModel("deterministic_nh with lam1 = lam2 = 0")
    return ModelSpec(h1_terms=tuple(terms), h2_terms=(),
                     preset="deterministic_nh", lam1=complex(lam1), lam2=complex(lam2))


def random_dissipative(m: float, lam: complex, gamma: complex) -> ModelSpec:
    """Preset: H1 = (i/2 gamma^2 - 1/(2m)) d^2/dx^2 - i lam (d/dx . x),
    H2 = -i gamma d/dx."""
    lam = complex(lam)
    gamma = complex(gamma)
    h1 = [DerivativePoly(2, 0.5j * gamma * gamma - 1.0 / (2.0 * m))]
    if lam != 0:
        h1.append(MixedDxX(-1j * lam))
    h2 = (DerivativePoly(1, -1j * gamma),) if gamma != 0 else ()
    return ModelSpec(h1_terms=tuple(h1), h2_terms=h2,
                     preset="random_dissipative", mass=m, lam=lam, gamma=gamma)


# ---------------------------------------------------------------------------
# Hermitian decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HermitianParts:
    """H = H_herm + i V_herm with both parts Hermitian operators."""
    h0_terms: tuple   # Hermitian part of H1
    v0_terms: tuple   # anti-Hermitian part of H1, as a Hermitian operator
    hr_terms: tuple   # Hermitian part of H2
    vr_terms: tuple   # anti-Hermitian part of H2, as a Hermitian operator


def _split_terms(terms):
    """Split a term list into (Hermitian part, V) with terms = H + iV.

    Adjoint rules: (d^n)^dagger = (-1)^n d^n, and for M = d/dx . x we have
    M^dagger = 1 - M, so M - 1/2 is anti-Hermitian.  A MixedDxX(c) term
    therefore decomposes as

        c M = [i c_I (M - 1/2) + c_R/2] + i [-i c_R (M - 1/2) + c_I/2]
    """
    herm = []
    anti = []
    for t in terms:
        if isinstance(t, DerivativePoly):
            adj = (-1) ** t.order * t.coeff.conjugate()
            ch = (t.coeff + adj) / 2.0
            cv = (t.coeff - adj) / 2.0j
            if ch != 0:
                herm.append(DerivativePoly(t.order, ch))
            if cv != 0:
                anti.append(DerivativePoly(t.order, cv))
        elif isinstance(t, MixedDxX):
            cr, ci = t.coeff.real, t.coeff.imag
            if ci != 0:
                herm.append(MixedDxX(1j * ci))
            # Hermitian part: i c_I (M - 1/2) + c_R / 2
            hs = -0.5j * ci + 0.5 * cr
            if hs != 0:
                herm.append(Scalar(hs))
            # V part: -i c_R (M - 1/2) + c_I / 2
            if cr != 0:
                anti.append(MixedDxX(-1j * cr))
            vs = 0.5j * cr + 0.5 * ci
            if vs != 0:
                anti.append(Scalar(vs))
        elif isinstance(t, Scalar):
            ch = (t.coeff + t.coeff.conjugate()) / 2.0
            cv = (t.coeff - t.coeff.conjugate()) / 2.0j
            if ch != 0:
                herm.append(Scalar(ch))
            if cv != 0:
                anti.append(Scalar(cv))
        else:  # pragma: no cover
            raise TypeError(f"unknown term {t!r}")
    return tuple(herm), tuple(anti)


def decompose_hermitian(spec: ModelSpec) -> HermitianParts:
    """H1 = H0 + i V0 and H2 = H_R + i V_R with H0, V0, H_R, V_R Hermitian."""
    h0, v0 = _split_terms(spec.h1_terms)
    hr, vr = _split_terms(spec.h2_terms)
    return HermitianParts(h0_terms=h0, v0_terms=v0, hr_terms=hr, vr_terms=vr)


# ---------------------------------------------------------------------------
# Physicality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalityReport:
    lambda_r_sign: str = "ok"       # "ok" | "warn_positive"
    lambda_i_sign: str = "ok"       # "ok" | "warn_nonnegative"
    lambda2_r_sign: str = "ok"      # "ok" | "warn_positive"
    predicted_tc: float | None = None


def physicality_check(spec: ModelSpec, sigma0: float) -> PhysicalityReport:
    """Warn about parameter regimes that lead to singular behavior.

    Nothing is rejected: evolving an unphysical regime up to its collapse
    time is a supported experiment.
    """
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    lr_sign = li_sign = l2_sign = "ok"
    tc = None
    if spec.preset == "random_dissipative":
        if spec.lam.real > 0:
            lr_sign = "warn_positive"
        if spec.lam.imag >= 0:
            li_sign = "warn_nonnegative"
    if spec.preset == "deterministic_nh":
        if spec.lam2.real > 0:
            l2_sign = "warn_positive"
            tc = sigma0 ** 2 / (2.0 * spec.lam2.real)
    return PhysicalityReport(lambda_r_sign=lr_sign, lambda_i_sign=li_sign,
                             lambda2_r_sign=l2_sign, predicted_tc=tc)
