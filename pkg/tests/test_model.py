import numpy as np
import pytest

from stochnh.errors import EmptyModel, UnsupportedOrder
from stochnh.model import (DerivativePoly, MixedDxX, ModelSpec, Scalar,
                           build_model, decompose_hermitian, deterministic_nh,
                           physicality_check, random_dissipative)


def test_derivative_adjoint_signs():
    t1 = DerivativePoly(1, 2.0 + 1.0j)
    assert t1.adjoint() == DerivativePoly(1, -(2.0 - 1.0j))
    t2 = DerivativePoly(2, 2.0 + 1.0j)
    assert t2.adjoint() == DerivativePoly(2, 2.0 - 1.0j)


def test_order_bounds():
    with pytest.raises(UnsupportedOrder):
        DerivativePoly(0, 1.0)
    with pytest.raises(UnsupportedOrder):
        DerivativePoly(5, 1.0)
    DerivativePoly(4, 1.0)  # top of the supported range


def test_nonfinite_coeff_rejected():
    with pytest.raises(ValueError):
        DerivativePoly(1, complex(np.inf, 0))
    with pytest.raises(ValueError):
        MixedDxX(complex(0, np.nan))


def test_build_model_drops_zero_terms():
    spec = build_model([DerivativePoly(2, 1.0), DerivativePoly(1, 0.0)],
                       [DerivativePoly(1, 0.0)])
    assert spec.h1_terms == (DerivativePoly(2, 1.0),)
    assert spec.h2_terms == ()


def test_empty_h1_rejected():
    with pytest.raises(EmptyModel):
        ModelSpec(h1_terms=(), h2_terms=())
    with pytest.raises(EmptyModel):
        deterministic_nh(0.0, 0.0)


def test_deterministic_preset_terms():
    spec = deterministic_nh(0.5, -0.5j)
    assert spec.h1_terms == (DerivativePoly(1, -0.5j),
                             DerivativePoly(2, -1j * (-0.5j)))
    assert spec.h2_terms == ()
    assert spec.is_diagonal and not spec.has_mixed_term


def test_dissipative_preset_terms():
    m, lam, gamma = 2.0, -0.3 - 1.0j, 0.5
    spec = random_dissipative(m, lam, gamma)
    (d2, mx) = spec.h1_terms
    assert d2 == DerivativePoly(2, 0.5j * gamma ** 2 - 1.0 / (2 * m))
    assert mx == MixedDxX(-1j * lam)
    assert spec.h2_terms == (DerivativePoly(1, -1j * gamma),)
    assert spec.has_mixed_term and not spec.is_diagonal


def _recompose(herm, anti):
    """Collect (herm + i*anti) coefficients keyed by term identity."""
    acc = {}
    for t in herm:
        key = (type(t).__name__, getattr(t, "order", None))
        acc[key] = acc.get(key, 0) + t.coeff
    for t in anti:
        key = (type(t).__name__, getattr(t, "order", None))
        acc[key] = acc.get(key, 0) + 1j * t.coeff
    return {k: v for k, v in acc.items() if v != 0}


def test_decomposition_recomposes_exactly():
    # H = H_herm + i V with both parts Hermitian, recombined term by term
    spec = build_model(
        [DerivativePoly(1, 0.3 - 0.7j), DerivativePoly(2, -1.1 + 0.2j),
         MixedDxX(0.4 + 0.9j)],
        [DerivativePoly(1, -1j * (0.5 + 0.3j))])
    parts = decompose_hermitian(spec)
    got = _recompose(parts.h0_terms, parts.v0_terms)
    want = {("DerivativePoly", 1): 0.3 - 0.7j,
            ("DerivativePoly", 2): -1.1 + 0.2j,
            ("MixedDxX", None): 0.4 + 0.9j}
    for k, v in want.items():
        assert got[k] == pytest.approx(v, abs=1e-15)
    # the scalar bookkeeping terms of the mixed split must cancel exactly
    assert got.get(("Scalar", None), 0) == pytest.approx(0, abs=1e-15)
    got2 = _recompose(parts.hr_terms, parts.vr_terms)
    assert got2[("DerivativePoly", 1)] == pytest.approx(-1j * (0.5 + 0.3j),
                                                        abs=1e-15)


def test_decomposition_derivative_parts_are_self_adjoint():
    # pure-derivative parts must equal their own adjoint term by term;
    # the MixedDxX + Scalar combinations are only Hermitian jointly
    # (M^dagger = 1 - M) and are verified operator-level in test_operators
    spec = build_model([MixedDxX(0.4 + 0.9j), DerivativePoly(1, 1.0 + 2.0j)])
    parts = decompose_hermitian(spec)
    for t in parts.h0_terms + parts.v0_terms:
        if isinstance(t, DerivativePoly):
            assert t.adjoint() == t


def test_physicality_flags():
    rep = physicality_check(random_dissipative(1.0, 0.2 - 1.0j, 1.0), 1.0)
    assert rep.lambda_r_sign == "warn_positive"
    assert rep.lambda_i_sign == "ok"
    rep2 = physicality_check(deterministic_nh(0.0, 0.25), 1.0)
    assert rep2.lambda2_r_sign == "warn_positive"
    assert rep2.predicted_tc == pytest.approx(2.0)
    rep3 = physicality_check(deterministic_nh(0.0, -0.25), 1.0)
    assert rep3.predicted_tc is None
    with pytest.raises(ValueError):
        physicality_check(deterministic_nh(0.0, 0.25), -1.0)
