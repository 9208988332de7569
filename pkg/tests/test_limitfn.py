import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sudler import kernel, limitfn, qcf
from sudler.errors import InvalidInterval

SQRT5 = math.sqrt(5)
PHI = (1 + SQRT5) / 2


def test_u_first_values():
    assert limitfn.u_seq(1, 1) == pytest.approx(SQRT5 + 2, abs=1e-12)
    with mpmath.workdps(40):
        beta = mpmath.sqrt(10) - 3
        sd = mpmath.sqrt(40)
        expect = float(2 * sd * (1 - (beta - mpmath.mpf(1) / 2) / sd))
    assert limitfn.u_seq(6, 1) == pytest.approx(expect, abs=1e-12)
    assert limitfn.u_seq(6, 1) == pytest.approx(13.3245, abs=1e-4)


@given(st.integers(1, 10), st.integers(1, 10**9))
@settings(max_examples=100, deadline=None)
def test_u_bracketed(b, r):
    sd = math.sqrt(b * b + 4)
    u = limitfn.u_seq(b, r)
    assert 2 * sd * (r - 0.5) - 1e-6 < u < 2 * sd * (r + 0.5) + 1e-6


def test_special_value_golden():
    g = limitfn.G_eval(1, -PHI / SQRT5, 1e-10)
    assert abs(g.value - 1) <= 1e-7
    assert g.contains(1.0)


def test_anchor_values_b1():
    assert 1.09 <= limitfn.G_eval(1, -0.26).value <= 1.11
    assert 1.10 <= limitfn.G_eval(1, 0.58).value <= 1.12


@pytest.mark.parametrize("b,n,eps", [(1, 28, -0.2), (1, 28, 0.0), (1, 28, 0.3),
                                     (2, 15, 0.1), (6, 8, -0.02), (6, 8, 0.3)])
def test_G_is_limit_of_perturbed_products(b, n, eps):
    # independent route: the finite perturbed product at a large convergent index
    p = kernel.perturbed_product(b, n, eps).value
    g = limitfn.G_eval(b, eps, 1e-9)
    assert abs(p - g.value) < 1e-4 * max(1.0, g.value)


@pytest.mark.parametrize("b", range(1, 11))
def test_G_at_zero_is_constant(b):
    g = limitfn.G_eval(b, 0.0, 1e-9)
    c = limitfn.C_const(b, 1e-9)
    assert abs(g.value - c.value) <= g.abs_err + c.abs_err


@pytest.mark.parametrize("b,n", [(1, 31), (3, 12), (6, 8)])
def test_constant_matches_long_product(b, n):
    # C_b is the limit of P_{q_n}(beta); the convergence gap is O(1/q_n)
    m = kernel.block_index(b, n)
    q = qcf.convergents(b, m)[m]
    p = kernel.sudler_product(qcf.make_surd(b), q).value
    assert abs(p - limitfn.C_const(b).value) < 20.0 / q


def test_constant_reference_values():
    # values from direct products, independent of any printed table
    ref = [2.4071142, 2.1065303, 1.7657530, 1.4786856, 1.2546640,
           1.0813996, 0.9458538, 0.8380159, 0.7507261, 0.6789209]
    for b, v in enumerate(ref, start=1):
        assert limitfn.C_const(b).value == pytest.approx(v, abs=2e-7)


def test_constant_above_one_iff_small_b():
    for b in range(1, 21):
        c = limitfn.C_const(b, 1e-8)
        assert (c.lo > 1.0) if b <= 6 else (c.hi < 1.0)


@pytest.mark.parametrize("b,eps", [(1, 0.1), (5, -0.05), (6, 0.4)])
def test_error_shrinks_when_radius_doubles(b, eps):
    errs = [limitfn.G_eval(b, eps, R=R).abs_err for R in (2048, 4096, 8192, 16384)]
    for a, c in zip(errs, errs[1:]):
        assert a / c >= 1.9


def test_roots_closed_form_b1():
    lo, hi = limitfn.roots_near_zero(1)
    assert lo == pytest.approx(-1 / SQRT5, abs=1e-15)
    assert hi == pytest.approx((5 + SQRT5) / 10, abs=1e-15)
    assert limitfn.G_eval(1, lo).is_zero
    assert limitfn.G_eval(1, hi).is_zero


def test_grid_roots_b1():
    rows = limitfn.G_grid(1, -1.0, 1.0, 0.01)
    zeros = [e for e, _, _, root in rows if root]
    assert any(abs(z + 0.45) < 0.01 for z in zeros)
    assert any(abs(z - 0.72) < 0.01 for z in zeros)
    # G vanishes on the grid only at the inserted roots
    assert all(g > 0 for e, g, _, root in rows if not root)


@pytest.mark.parametrize("b", [2, 5, 9])
def test_roots_vanish(b):
    for r in limitfn.roots_in(b, -1.0, 1.0):
        g = limitfn.G_eval(b, r + 1e-9)
        assert g.value < 1e-6


def _fd_grid(b):
    lo, hi = limitfn.roots_near_zero(b)
    return np.linspace(lo + 0.05 * (hi - lo), hi - 0.05 * (hi - lo), 50)


@pytest.mark.slow
@pytest.mark.parametrize("b", [1, 5, 6])
def test_second_derivative_matches_finite_differences(b):
    def f(x):
        # a shared radius makes the truncation error cancel in the difference
        return math.log(limitfn.G_eval(b, x, R=16384).value)

    def central(e, h):
        return (f(e + h) - 2 * f(e) + f(e - h)) / h**2

    for e in _fd_grid(b):
        # Richardson step removes the h^2 term, which is large next to a root
        fd = (4 * central(e, 1e-3) - central(e, 2e-3)) / 3
        d2 = limitfn.d2_log_G(b, e)
        assert d2.value < 0
        assert abs(fd - d2.value) <= 1e-4 * abs(d2.value)


@pytest.mark.parametrize("b,eps", [(1, 0.2), (4, -0.1), (6, 0.5)])
def test_first_derivative_matches_finite_difference(b, eps):
    h = 1e-4
    f = lambda x: math.log(limitfn.G_eval(b, x, R=16384).value)
    fd = (f(eps + h) - f(eps - h)) / (2 * h)
    assert limitfn.d1_log_G(b, eps).value == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_derivatives_refuse_roots():
    with pytest.raises(InvalidInterval):
        limitfn.d2_log_G(1, -1 / SQRT5)


def test_certify_above_b1():
    assert limitfn.certify_above(1, -0.26, 0.58, 1.01)
    assert limitfn.certify_above(1, -0.01, 0.04, 1.1)
    cert = limitfn.certify_above(1, -0.26, 0.58, 1.2)
    assert not cert and cert.status == "fail"


def test_certify_rejects_root_inside():
    with pytest.raises(InvalidInterval):
        limitfn.certify_above(1, -0.5, 0.0, 0.5)
    with pytest.raises(InvalidInterval):
        limitfn.certify_below(1, 0.0, 0.8, 2.0)


def test_certify_below_b6():
    cert = limitfn.certify_below(6, -0.0257, -0.02, 0.96)
    assert cert and cert.details["upper_bound"] <= 0.96
    assert not limitfn.certify_below(6, -0.0257, -0.02, 0.5)


@given(st.floats(-0.44, 0.72))
@settings(max_examples=30, deadline=None)
def test_certify_above_agrees_with_pointwise_minimum(eps):
    # concavity of log G: an interior point is never below the endpoint minimum
    lo, hi = -0.4, 0.7
    cert = limitfn.certify_above(1, lo, hi, 0.0)
    inside = limitfn.G_eval(1, min(max(eps, lo), hi))
    assert inside.hi >= cert.details["lower_bound"] - 1e-9
