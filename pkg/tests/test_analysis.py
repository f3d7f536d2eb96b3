import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cmunits.analysis import (
    PredicateRegion,
    SigmaEps,
    StripAbove,
    WholeDomain,
    clipped_cell_measure,
    count_below,
    deviation_trend,
    dioapprox_ratio,
    gamma_eps_count,
    hyperbolic_measure,
    j_float,
    jzlb_constant_estimate,
    jzlb_ratio,
    liouville_check,
    neighborhood_count,
    neighborhood_exponent,
    sigma_eps_measure,
)
from cmunits.classpoly import hilbert_class_poly
from cmunits.errors import EtaCollision, PreconditionError, ToleranceNotMet
from cmunits.forms import cm_points
from cmunits.jeval import I_POINT, ZETA



@given(st.floats(-0.5, 0.5), st.floats(0.0, 1.0), st.floats(0.5, 1.2), st.floats(0.0, 2.0))
@settings(max_examples=80, deadline=None)
def test_clipped_measure_matches_numeric_integral(xa, dx, ya, dy):
    x0, x1 = xa, min(0.5, xa + dx + 1e-3)
    y0, y1 = ya, ya + dy + 1e-3
    mpmath.mp.dps = 20

    def inner(x):
        lo = max(y0, math.sqrt(max(0.0, 1 - x * x)))
        return max(0.0, 1 / lo - 1 / y1) if lo < y1 else 0.0

    # split at the kinks where the arc crosses y0 and y1
    kinks = {w for y in (y0, y1) if y < 1 for w in (-math.sqrt(1 - y * y), math.sqrt(1 - y * y))}
    pts = sorted({x0, x1} | {w for w in kinks if x0 < w < x1})
    ref = 3 / math.pi * mpmath.quad(inner, pts)
    assert float(clipped_cell_measure(x0, x1, y0, y1)) == pytest.approx(float(ref), rel=1e-7, abs=1e-12)


def test_whole_domain_unit_mass():
    m = hyperbolic_measure(WholeDomain(), 1e-6)
    assert abs(m.value - 1) <= 1e-12


@pytest.mark.parametrize("Y", [1.0, 2.0, 5.0, 16.0])
def test_strip_above(Y):
    m = hyperbolic_measure(StripAbove(Y), 1e-4)
    assert abs(m.value - 3 / math.pi / Y) <= max(m.abserr, 1e-12)


def test_strip_between_grid_lines():
    m = hyperbolic_measure(StripAbove(2.3), 1e-5)
    assert abs(m.value - 3 / math.pi / 2.3) <= m.abserr + 1e-12


def test_predicate_disk():
    m = hyperbolic_measure(lambda t: abs(t - 2j) < 0.1, 1e-4)
    exact = 3 / math.pi * 2 * math.pi * (2 / math.sqrt(4 - 0.01) - 1)
    assert abs(m.value - exact) <= m.abserr


def test_predicate_region_object():
    reg = PredicateRegion(lambda t: t.imag > 3, desc="Im > 3")
    m = hyperbolic_measure(reg, 1e-3)
    assert m.region_desc == "Im > 3"
    assert abs(m.value - 1 / math.pi) <= m.abserr + 1e-12


def test_tolerance_not_met():
    with pytest.raises(ToleranceNotMet):
        sigma_eps_measure(0.5, 1e-9, max_cells=20000)


def test_sigma_monotone_and_small():
    vals = [sigma_eps_measure(e, 1e-6).value for e in (1.0, 0.5, 0.1, 0.01)]
    assert 0 < vals[0] < 1
    assert vals == sorted(vals, reverse=True)


def test_two_thirds_law_near_corners():
    # j ~ c (tau - zeta)^3 near the corners, so mu(Sigma_eps) ~ C eps^(2/3)
    r = [sigma_eps_measure(e, 1e-7).value / e ** (2 / 3) for e in (0.01, 0.001)]
    assert r[0] == pytest.approx(r[1], rel=2e-3)


@given(st.floats(-0.5, 0.5), st.floats(0.87, 5.0))
@settings(max_examples=40, deadline=None)
def test_float_j_against_mpmath(x, y):
    mpmath.mp.dps = 30
    ref = complex(1728 * mpmath.kleinj(mpmath.mpc(x, y)))
    dref = complex(1728 * mpmath.diff(lambda t: mpmath.kleinj(t), mpmath.mpc(x, y)))
    j, dj = j_float(complex(x, y))
    assert abs(j - ref) <= 1e-11 * max(1, abs(ref)) + 1e-9
    assert abs(dj - dref) <= 1e-9 * max(1, abs(dref)) + 1e-7


def test_sigma_membership_certified():
    assert ZETA in SigmaEps(0.5)
    assert I_POINT not in SigmaEps(0.5)


def test_gamma_counts():
    r = gamma_eps_count(-3, 0.5)
    assert (r.gamma_count, r.D) == (1, 1)
    H = hilbert_class_poly(-1003)
    r2 = gamma_eps_count(-1003, 0.5, H=H)
    assert r2.gamma_count == count_below(cm_points(-1003), 0.5)
    assert r2.deviation == pytest.approx(abs(r2.gamma_count / r2.D - r2.mu_sigma.value))


def test_neighborhoods():
    assert neighborhood_count(-4, 1728, 0.01) == 1
    assert neighborhood_count(-7, 1728, 0.01) == 0
    H = hilbert_class_poly(-16)
    assert neighborhood_count(-16, 287496, 1e-6, H=H) == 1
    assert [neighborhood_exponent(j) for j in (0, 1728, 5)] == [3, 2, 1]


def test_liouville():
    rows = liouville_check(-4)
    assert rows[0].min_dist == pytest.approx(abs(1j - complex(0.5, math.sqrt(3) / 2)))
    assert all(r.passed for r in liouville_check(-2003))
    with pytest.raises(PreconditionError):
        liouville_check(-3)
    # delta = -12 has no point at zeta: its form (1,0,3) gives sqrt(-3)
    assert all(r.passed for r in liouville_check(-12))


def test_jzlb():
    a = jzlb_constant_estimate(2500)
    b = jzlb_constant_estimate(40000)
    assert a > 0 and b > 0
    assert abs(a - b) / b < 0.05
    with pytest.raises(ValueError):
        jzlb_constant_estimate(10)
    assert jzlb_ratio(1j) == pytest.approx(1728 / abs(1j - complex(0.5, math.sqrt(3) / 2)) ** 6)


def test_dioapprox():
    assert dioapprox_ratio(-4) == pytest.approx(-math.log(abs(1j - complex(0.5, math.sqrt(3) / 2))))
    with pytest.raises(EtaCollision):
        dioapprox_ratio(-4, I_POINT)
    with pytest.raises(EtaCollision):
        dioapprox_ratio(-3)
    assert math.isfinite(dioapprox_ratio(-7, I_POINT))


def test_deviation_trend():
    rows = [(-d, h, 0) for d, h in zip(range(100, 112), range(30, 42))]
    out = deviation_trend(rows, 0.01, top=10, group=3)
    assert len(out["chosen"]) == 10
    assert not out["passed"]  # all deviations equal mu
    rows2 = [(-100 - i, h, round(0.01 * h) if h > 38 else 3) for i, h in enumerate(range(30, 42))]
    assert deviation_trend(rows2, 0.01)["passed"]


def test_small_examples():
    assert gamma_eps_count(-4, 0.5).gamma_count == 0
    assert gamma_eps_count(-23, 1e-3).gamma_count == 0
    assert neighborhood_count(-23, 1728, 1) == 0
    assert neighborhood_count(-3, 0, 0.5) == gamma_eps_count(-3, 0.5).gamma_count
