import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from dirdep.phi import (
    SIMULATION_PHIS,
    DomainError,
    NotConvex,
    NotStrictlyConvexAtZero,
    NotZeroAtZero,
    abs_pow,
    custom,
    exp_abs,
    exp_signed,
    parse_phi,
)

BUILTINS = list(SIMULATION_PHIS) + [abs_pow(1.5), exp_signed(-2.0)]


def gl_reference(f, d0, d1, order=64):
    """Order-64 Gauss-Legendre on [0,1], split where the path crosses zero."""
    x, w = np.polynomial.legendre.leggauss(order)
    pieces = [(0.0, 1.0)]
    if d0 * d1 < 0:
        t0 = d0 / (d0 - d1)
        pieces = [(0.0, t0), (t0, 1.0)]
    total = 0.0
    for a, b in pieces:
        t = a + (b - a) * (x + 1) / 2
        total += (b - a) / 2 * float(np.sum(w * f(d0 + t * (d1 - d0))))
    return total


def test_eval_examples():
    assert abs_pow(2)(-0.5) == 0.25
    assert exp_signed(1)(0.0) == 0.0
    assert exp_abs(5)(0.2) == pytest.approx(math.e - 1, abs=1e-12)
    assert exp_signed(1e-3)(1e-9) == pytest.approx(1e-12, rel=1e-9)


def test_domain_violation():
    with pytest.raises(DomainError):
        abs_pow(2)(1.5)
    assert abs_pow(2).as_psi()(3.0) == 9.0


@pytest.mark.parametrize("f", BUILTINS, ids=str)
def test_builtins_validate(f):
    cert = f.validate()
    assert cert.value_at_zero == 0.0
    assert cert.min_curvature_at_zero > 1e-15


def test_validate_failures():
    with pytest.raises(NotStrictlyConvexAtZero):
        custom(lambda x: x, "identity").validate()
    with pytest.raises(NotConvex) as exc:
        custom(lambda x: -x * x, "negsq").validate()
    a, m, b = exc.value.witness
    assert m == pytest.approx((a + b) / 2)
    with pytest.raises(NotZeroAtZero):
        custom(lambda x: x * x + 1, "shifted").validate()


def test_abs1_is_admissible():
    # affine away from 0 but strictly convex at 0
    abs_pow(1).validate()


def test_segment_examples():
    assert abs_pow(1).segment_integral(-1, 1) == pytest.approx(0.5, abs=1e-15)
    assert abs_pow(2).segment_integral(0, 1) == pytest.approx(1 / 3, abs=1e-15)
    ref = gl_reference(exp_signed(1), 0.0, 1.0)
    assert ref == pytest.approx(math.e - 2, abs=1e-14)
    assert exp_signed(1).segment_integral(0, 1) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("f", list(SIMULATION_PHIS), ids=str)
def test_closed_forms_match_quadrature(f, rng):
    d = rng.uniform(-1, 1, size=(1000, 2))
    # include same-sign, near-equal and zero endpoints
    d[:50, 1] = d[:50, 0] + rng.normal(scale=1e-9, size=50)
    d[50:60, 0] = 0.0
    d = np.clip(d, -1, 1)
    got = f.segment_integral(d[:, 0], d[:, 1])
    ref = np.array([gl_reference(f, a, b) for a, b in d])
    assert_allclose(got, ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("f", BUILTINS, ids=str)
def test_degenerate_segment_equals_eval(f, rng):
    d = rng.uniform(-1, 1, 100)
    assert_allclose(f.segment_integral(d, d), f(d), rtol=0, atol=1e-13)


@pytest.mark.parametrize("f", BUILTINS, ids=str)
def test_segment_reversal_symmetry(f, rng):
    a, b = rng.uniform(-1, 1, (2, 500))
    assert_allclose(f.segment_integral(a, b), f.segment_integral(b, a), rtol=0, atol=1e-13)


def test_custom_quadrature_matches_closed_form(rng):
    sq = custom(lambda x: x * x, "sq")
    ex = custom(lambda x: np.expm1(np.abs(x)), "expabs")
    a, b = rng.uniform(-1, 1, (2, 300))
    assert_allclose(sq.segment_integral(a, b), abs_pow(2).segment_integral(a, b), atol=1e-14)
    assert_allclose(ex.segment_integral(a, b), exp_abs(1).segment_integral(a, b), atol=1e-14)


def test_scalar_only_custom_is_vectorised():
    f = custom(lambda x: abs(float(x)) ** 3, "cube")
    assert f.segment_integral(0.0, 1.0) == pytest.approx(0.25, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.sampled_from([1, 2, 3]), st.sampled_from([1, 2, 3]))
def test_abs_pow_segment_decreasing_in_p(d0, d1, p1, p2):
    p1, p2 = min(p1, p2), max(p1, p2)
    assert abs_pow(p1).segment_integral(d0, d1) >= abs_pow(p2).segment_integral(d0, d1) - 1e-15


@pytest.mark.parametrize("text,expected", [
    ("abs^p:2", abs_pow(2)), ("expsgn:0.2", exp_signed(0.2)),
    ("expsgn:1/5", exp_signed(0.2)), ("expabs:5", exp_abs(5)),
])
def test_parse(text, expected):
    assert parse_phi(text) == expected


def test_descriptor_round_trip():
    for f in SIMULATION_PHIS:
        assert parse_phi(f.descriptor) == f


@pytest.mark.parametrize("bad", ["abs:2", "abs^p", "abs^p:0.5", "expsgn:0", "expabs:x"])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_phi(bad)
