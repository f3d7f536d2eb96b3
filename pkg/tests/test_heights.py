import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from cmunits.classpoly import hilbert_class_poly
from cmunits.errors import PreconditionError, PreconditionNotUnit
from cmunits.heights import (
    colmez_diagnostic,
    height_report,
    height_upper_decomposition,
    log_mahler_measure,
    mahler_height,
)


def roots_mahler(coeffs):
    """log M from numerically computed roots (mpmath), the textbook definition."""
    mpmath.mp.dps = 60
    rts = mpmath.polyroots(list(reversed(coeffs)), maxsteps=400, extraprec=400)
    return float(math.log(abs(coeffs[-1])) + sum(max(0, mpmath.log(abs(r))) for r in rts))


@given(st.lists(st.integers(-50, 50), min_size=2, max_size=7).filter(lambda c: c[-1] != 0 and c[0] != 0))
@settings(max_examples=60, deadline=None)
def test_mahler_matches_roots(coeffs):
    est, width = log_mahler_measure(coeffs)
    assert abs(float(est) - roots_mahler(coeffs)) < 1e-9


def test_mahler_simple_cases():
    assert float(log_mahler_measure([-2, 1])[0]) == pytest.approx(math.log(2))
    # roots on the unit circle: slowest case, still inside the reported bracket
    est, width = log_mahler_measure([1, 0, 1])
    assert abs(est) <= width < 1e-18
    # x^2 - x - 1: golden ratio
    assert float(log_mahler_measure([-1, -1, 1])[0]) == pytest.approx(math.log((1 + 5**0.5) / 2), abs=1e-15)
    # zero root ignored
    assert float(log_mahler_measure([0, -3, 1])[0]) == pytest.approx(math.log(3))


def test_height_known_values():
    assert float(height_report(-4).height) == pytest.approx(math.log(1728), abs=1e-15)
    assert float(height_report(-7).height) == pytest.approx(math.log(3375), abs=1e-15)
    assert float(height_report(-3).height) == 0.0


@pytest.mark.parametrize("delta", [-15, -23, -71, -104, -420, -1003, -3299])
def test_two_routes_agree(delta):
    H = hilbert_class_poly(delta)
    rep = height_report(delta, H=H)
    assert abs(rep.height - mahler_height(H)) < 1e-40
    assert abs(rep.identity_residual) <= rep.err
    assert float(rep.height) > 0


def test_height_against_mpmath_conjugates():
    mpmath.mp.dps = 40
    delta = -47
    H = hilbert_class_poly(delta)
    vals = [1728 * mpmath.kleinj(mpmath.mpc(*[float(x) for x in (p.re, 0)]) + 1j * mpmath.sqrt(p.im_num) / p.im_den)
            for p in H.points]
    ref = sum(max(0, mpmath.log(abs(v))) for v in vals) / len(vals)
    assert float(height_report(delta, H=H).height) == pytest.approx(float(ref), abs=1e-25)


def test_colmez():
    h, ratio = colmez_diagnostic(-4)
    assert ratio == pytest.approx(math.log(1728) / math.log(4))
    with pytest.raises(PreconditionError):
        colmez_diagnostic(-3)


def test_upper_decomposition():
    with pytest.raises(PreconditionNotUnit):
        height_upper_decomposition(-23, 0.5)
    # J + 1 = 1 at delta = -3: its only conjugate has modulus 1, above eps
    t1, t2 = height_upper_decomposition(-3, 0.5, alpha=-1)
    assert t1 == 0.0 and t2 == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        height_upper_decomposition(-3, 0, alpha=-1)


def test_neg_sum_infinite_at_zero():
    rep = height_report(-3)
    assert rep.neg_sum == float("-inf")
    assert rep.identity_residual == 0
