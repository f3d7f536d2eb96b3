import math

import gmpy2
import mpmath
import pytest
from gmpy2 import mpc, mpfr
from hypothesis import given, settings, strategies as st

from cmunits.errors import PrecisionExhausted, PreconditionError, Undecidable
from cmunits.forms import ReducedForm, cm_point, cm_points
from cmunits.jeval import (
    I_POINT,
    PrecisionContext,
    ZETA,
    certified_abs_less,
    certified_dist_less,
    eisenstein_tail_bound,
    eval_j,
    eval_j_many,
)


@pytest.fixture(autouse=True)
def _digits():
    mpmath.mp.dps = 80


def mpmath_j(tau: complex | mpmath.mpc):
    return 1728 * mpmath.kleinj(tau)


def to_mp(z):
    return mpmath.mpc(str(z.real), str(z.imag))


def close(v, ref):
    """True if the certified ball around v contains the 80-digit reference value."""
    d = abs(to_mp(v.value) - ref)
    return d <= mpmath.mpf(str(v.err)) + abs(ref) * mpmath.mpf(10) ** -70


CLASS_ONE = {
    (1, 0, 1): 1728,
    (1, 0, 2): 8000,
    (1, 1, 3): -32768,
    (1, 1, 2): -3375,
    (1, 0, 3): 54000,
    (1, 1, 5): -884736,
    (1, 1, 11): -884736000,
    (1, 1, 17): -147197952000,
    (1, 1, 41): -262537412640768000,
    (1, 0, 4): 287496,
    (1, 1, 7): -12288000,
    (1, 0, 7): 16581375,
}


@pytest.mark.parametrize("form,value", CLASS_ONE.items())
@pytest.mark.parametrize("method", ["eisenstein", "eta"])
def test_rational_singular_moduli(form, value, method):
    v = eval_j(cm_point(ReducedForm(*form)), PrecisionContext(128, 32), method=method)
    assert v.contains(value)
    assert float(v.err) < 2.0**-90 * max(1, abs(value))


def test_zeta_is_zero():
    v = eval_j(ZETA, PrecisionContext(128, 32))
    assert v.contains(0)
    assert certified_abs_less(ZETA, 1e-30)


def test_i_value_and_precision_target():
    v = eval_j(I_POINT, PrecisionContext(256, 32))
    assert v.contains(1728)
    assert v.err <= mpfr(2) ** -224 * 1728


TAUS = [complex(0.1, 0.9), complex(-0.33, 1.2), complex(0.5, 0.87), complex(0.0, 3.0), complex(0.27, 7.5)]


@pytest.mark.parametrize("tau", TAUS)
@pytest.mark.parametrize("method", ["eisenstein", "eta"])
def test_against_mpmath_kleinj(tau, method):
    v = eval_j(tau, PrecisionContext(160, 32), method=method)
    assert close(v, mpmath_j(mpmath.mpc(tau.real, tau.imag)))


def test_cm_conjugates_against_mpmath():
    for p in cm_points(-71):
        t = mpmath.mpc(mpmath.mpf(p.re.numerator) / p.re.denominator, mpmath.sqrt(p.im_num) / p.im_den)
        v = eval_j(p, PrecisionContext(160, 32))
        assert close(v, mpmath_j(t))


@given(st.floats(-0.5, 0.5), st.floats(0.87, 6.0))
@settings(max_examples=40, deadline=None)
def test_routes_agree(x, y):
    ctx = PrecisionContext(96, 32)
    a = eval_j(complex(x, y), ctx, method="eisenstein")
    b = eval_j(complex(x, y), ctx, method="eta")
    with gmpy2.context(precision=200):
        assert abs(a.value - b.value) <= a.err + b.err


@given(st.floats(-0.5, 0.5), st.floats(0.9, 3.0))
@settings(max_examples=25, deadline=None)
def test_periodicity(x, y):
    ctx = PrecisionContext(96, 32)
    with gmpy2.context(precision=200):
        t = mpc(complex(x, y), precision=200)
        a = eval_j(t, ctx)
        b = eval_j(t + 1, ctx)
        assert abs(a.value - b.value) <= a.err + b.err


@given(st.floats(math.pi / 3 + 1e-3, 2 * math.pi / 3 - 1e-3))
@settings(max_examples=25, deadline=None)
def test_modular_inversion_on_arc(theta):
    # on |tau| = 1, -1/tau = -conj(tau): j(tau) = j(-conj tau) = conj j(tau), so j is real
    ctx = PrecisionContext(96, 32)
    with gmpy2.context(precision=200):
        t = gmpy2.exp(mpc(0, theta))
        a = eval_j(t, ctx)
        b = eval_j(-1 / t, ctx)
        assert abs(a.value - b.value) <= a.err + b.err
        assert abs(a.value.imag) <= a.err


@pytest.mark.parametrize("form", [(1, 0, 5), (2, 2, 3), (3, 3, 7), (5, 4, 5), (3, 0, 4)])
def test_ambiguous_forms_are_real(form):
    v = eval_j(cm_point(ReducedForm(*form)), PrecisionContext(128, 32))
    assert abs(v.value.imag) <= v.err


def test_truncation_n_vs_2n():
    ctx = PrecisionContext(64, 32)
    tau = cm_point(ReducedForm(2, 1, 3))
    a = eval_j(tau, ctx, terms=60)
    b = eval_j(tau, ctx, terms=120)
    with gmpy2.context(precision=200):
        assert abs(a.value - b.value) <= a.err + b.err


def test_tail_bound_dominates_series():
    r = mpfr(math.exp(-2 * math.pi * 0.866))
    for k in (3, 5):
        for N in (5, 10, 20):
            exact = sum(sum(d**k for d in range(1, n + 1) if n % d == 0) * r**n for n in range(N + 1, N + 400))
            assert exact <= eisenstein_tail_bound(k, r, N)


def test_too_few_terms_exhausts_precision():
    with pytest.raises(PrecisionExhausted):
        eval_j(cm_point(ReducedForm(2, 1, 3)), PrecisionContext(128, 32), terms=3)


def test_precondition_below_domain():
    with pytest.raises(PreconditionError):
        eval_j(complex(0.0, 0.5))


def test_context_validation():
    with pytest.raises(ValueError):
        PrecisionContext(32, 32)
    assert PrecisionContext(64, 32).doubled().work_bits == 128


def test_certified_comparisons():
    assert not certified_abs_less(I_POINT, 1000)
    assert certified_abs_less(I_POINT, 1729)
    assert certified_dist_less(I_POINT, 1728, 1e-40)
    assert not certified_dist_less(cm_point(ReducedForm(1, 1, 2)), 1728, 1)


def test_exact_equality_is_undecidable():
    with pytest.raises(Undecidable):
        certified_abs_less(I_POINT, 1728)


def test_eval_many_uses_conjugate_symmetry():
    pts = cm_points(-23)
    vals = eval_j_many(pts, PrecisionContext(96, 32))
    a, b = vals[1], vals[2]
    assert complex(a) == complex(b).conjugate()
    assert a.value.real.precision == 128
