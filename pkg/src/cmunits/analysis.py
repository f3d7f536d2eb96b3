"""Hyperbolic measure on F, equidistribution counts and distance diagnostics.

The normalized hyperbolic measure is ``mu = (3/pi) dx dy / y**2`` on the
fundamental domain, with total mass 1.  :func:`hyperbolic_measure` integrates
it over ``F`` intersected with a region by adaptive bisection of axis-aligned
cells.  The integral of ``1/y**2`` over a cell clipped to ``|tau| >= 1`` has a
closed form, so only cells that straddle the region boundary carry error; the
part of ``F`` above ``Im tau = 16`` is added in closed form, ``(3/pi)/16``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .classpoly import ClassPolynomial
from .discriminants import Discriminant, validate_discriminant
from .errors import EtaCollision, PreconditionError, ToleranceNotMet
from .forms import CMPoint, ReducedForm, cm_points, tau_height
from .jeval import (
    CertifiedComplex,
    I_POINT,
    PrecisionContext,
    ZETA,
    certified_abs_less,
    certified_dist_less,
)

__all__ = [
    "MeasureEstimate",
    "EquidistRecord",
    "LiouvilleRow",
    "Region",
    "WholeDomain",
    "StripAbove",
    "SigmaEps",
    "PredicateRegion",
    "hyperbolic_measure",
    "sigma_eps_measure",
    "sigma_mu",
    "gamma_eps_count",
    "count_below",
    "neighborhood_count",
    "neighborhood_exponent",
    "liouville_check",
    "jzlb_constant_estimate",
    "jzlb_ratio",
    "dioapprox_ratio",
    "deviation_trend",
    "j_float",
]

Y_MAX = 16.0
MASS = 3.0 / math.pi
SQRT3_2 = math.sqrt(3) / 2
ZETA_C = complex(0.5, SQRT3_2)
ZETA2_C = complex(-0.5, SQRT3_2)
MU_TOL = 1e-6

INSIDE, MIXED, OUTSIDE = 1, 0, -1


@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    abserr: float
    region_desc: str
    cells: int = 0


@dataclass(frozen=True)
class EquidistRecord:
    delta: Discriminant
    eps: float
    gamma_count: int
    D: int
    mu_sigma: MeasureEstimate
    deviation: float


class LiouvilleRow(NamedTuple):
    form: ReducedForm
    min_dist: float
    bound: float
    passed: bool


# ---------------------------------------------------------------- float j


_N_SERIES = 14
_SIG3 = np.array([0] + [sum(d**3 for d in range(1, n + 1) if n % d == 0) for n in range(1, _N_SERIES + 1)], float)
_SIG5 = np.array([0] + [sum(d**5 for d in range(1, n + 1) if n % d == 0) for n in range(1, _N_SERIES + 1)], float)


def j_float(tau):
    """``(j(tau), j'(tau))`` in double precision, vectorized; for ``Im tau >= sqrt(3)/2``.

    Uses ``j = E4**3 / Delta`` and ``dj/dtau = -2 pi i E6 E4**2 / Delta`` with
    ``Delta = q prod (1 - q**n)**24``, which avoids the cancellation in
    ``E4**3 - E6**2`` toward the cusp.
    """
    tau = np.asarray(tau, dtype=complex)
    q = np.exp(2j * np.pi * tau)
    e4 = np.ones_like(q)
    e6 = np.ones_like(q)
    prod = np.ones_like(q)
    qn = np.ones_like(q)
    for n in range(1, _N_SERIES + 1):
        qn = qn * q
        e4 = e4 + 240 * _SIG3[n] * qn
        e6 = e6 - 504 * _SIG5[n] * qn
        prod = prod * (1 - qn)
    for _ in range(_N_SERIES + 1, 3 * _N_SERIES):
        qn = qn * q
        prod = prod * (1 - qn)
    disc = q * prod**24
    j = e4**3 / disc
    dj = -2j * np.pi * e6 * e4**2 / disc
    return j, dj


# ---------------------------------------------------------------- regions


class Region:
    """Subset of F given by a cell classifier.

    ``classify(x0, x1, y0, y1)`` receives equal-length arrays and returns an
    integer array of INSIDE / MIXED / OUTSIDE; ``cusp()`` classifies the strip
    above ``Im tau = 16``.
    """

    desc = "region"

    def classify(self, x0, x1, y0, y1):
        raise NotImplementedError

    def cusp(self) -> int:
        return MIXED

    def __contains__(self, tau) -> bool:
        raise NotImplementedError


class WholeDomain(Region):
    desc = "F"

    def classify(self, x0, x1, y0, y1):
        return np.full(len(x0), INSIDE)

    def cusp(self):
        return INSIDE

    def __contains__(self, tau):
        return True


class StripAbove(Region):
    """``{Im tau > Y}``."""

    def __init__(self, Y: float):
        self.Y = float(Y)
        self.desc = f"Im tau > {self.Y:g}"

    def classify(self, x0, x1, y0, y1):
        out = np.full(len(x0), MIXED)
        out[y0 >= self.Y] = INSIDE
        out[y1 <= self.Y] = OUTSIDE
        return out

    def cusp(self):
        return INSIDE if self.Y <= Y_MAX else MIXED

    def __contains__(self, tau):
        return complex(tau).imag > self.Y


class SigmaEps(Region):
    """``Sigma_eps = {tau in F : |j(tau)| < eps}``.

    Cells are classified from double-precision ``|j|`` at the centre and
    corners together with a Lipschitz margin built from ``|j'|`` at the same
    points; for ``Im tau >= 3/2`` the bound ``|j| >= e^{2 pi y} - 744 - 16``
    rules the cell out.  Point membership is the certified comparison.
    """

    LIPSCHITZ_SAFETY = 2.0

    def __init__(self, eps: float):
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        self.eps = float(eps)
        self.desc = f"|j| < {self.eps:g}"

    def classify(self, x0, x1, y0, y1):
        xs = np.stack([(x0 + x1) / 2, x0, x1, x0, x1])
        ys = np.stack([(y0 + y1) / 2, y0, y0, y1, y1])
        low = y0 < 1.5
        out = np.full(len(x0), OUTSIDE)
        if not low.any():
            return out
        j, dj = j_float(xs[:, low] + 1j * ys[:, low])
        a = np.abs(j)
        lip = self.LIPSCHITZ_SAFETY * np.abs(dj).max(axis=0)
        half = 0.5 * np.hypot(x1[low] - x0[low], y1[low] - y0[low])
        gap = a[0] - self.eps
        same = (np.sign(a - self.eps) == np.sign(gap)).all(axis=0)
        decided = same & (np.abs(gap) > lip * half)
        sub = np.where(decided, np.where(gap < 0, INSIDE, OUTSIDE), MIXED)
        out[low] = sub
        return out

    def cusp(self):
        return OUTSIDE

    def __contains__(self, tau):
        return certified_abs_less(tau, self.eps)


class PredicateRegion(Region):
    """Region from a bare point predicate; cells are sampled on an interior 3x3 grid.

    Sampling cannot certify a cell, so every cell is treated as MIXED until
    its hyperbolic size ``max(dx, dy) / y0`` is below ``resolution``; features
    smaller than that may still be missed.
    """

    def __init__(self, pred: Callable[[complex], bool], desc: str = "predicate",
                 cusp: int | None = None, resolution: float = 1 / 64):
        self.pred = pred
        self.desc = desc
        self._cusp = cusp
        self.resolution = resolution

    def classify(self, x0, x1, y0, y1):
        out = np.full(len(x0), MIXED)
        coarse = np.maximum(x1 - x0, y1 - y0) / y0 > self.resolution
        for i in np.flatnonzero(~coarse):
            vals = {
                bool(self.pred(complex(x, y)))
                for x in np.linspace(x0[i], x1[i], 7)[1::2]
                for y in np.linspace(y0[i], y1[i], 7)[1::2]
            }
            out[i] = MIXED if len(vals) == 2 else (INSIDE if vals.pop() else OUTSIDE)
        return out

    def cusp(self):
        if self._cusp is not None:
            return self._cusp
        vals = {bool(self.pred(complex(x, y))) for x in (-0.4, 0.0, 0.5) for y in (17.0, 32.0, 1e3)}
        return MIXED if len(vals) == 2 else (INSIDE if vals.pop() else OUTSIDE)

    def __contains__(self, tau):
        return bool(self.pred(complex(tau)))


def _as_region(region) -> Region:
    if isinstance(region, Region):
        return region
    if callable(region):
        return PredicateRegion(region)
    raise TypeError("region must be a Region or a predicate on complex numbers")


# ---------------------------------------------------------------- quadrature


def _arcsin_int(a, b):
    """``int_a^b dx / sqrt(1 - x**2)``."""
    return np.arcsin(b) - np.arcsin(a)


def clipped_cell_measure(x0, x1, y0, y1):
    """``(3/pi) * int int dx dy / y**2`` over the cell intersected with ``|tau| >= 1``.

    Exact: for fixed ``x`` the inner integral is ``1/max(y0, sqrt(1-x**2)) - 1/y1``
    (or 0 when the arc is above the cell), and ``int dx/sqrt(1-x**2)`` is an arcsine.
    Requires ``-1/2 <= x0 < x1 <= 1/2``.
    """
    x0 = np.asarray(x0, float)
    x1 = np.asarray(x1, float)
    y0 = np.asarray(y0, float)
    y1 = np.asarray(y1, float)
    # |x| <= w0: arc above y0 ; |x| <= w1: arc above y1 (cell column empty)
    w0 = np.sqrt(np.clip(1 - y0 * y0, 0, None))
    w1 = np.sqrt(np.clip(1 - y1 * y1, 0, None))

    def overlap(lo, hi, a, b):
        return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0, None)

    def arc_part(a, b):
        # int over [x0,x1] ∩ [a,b] of 1/sqrt(1-x^2)
        lo = np.maximum(x0, a)
        hi = np.minimum(x1, b)
        return np.where(hi > lo, _arcsin_int(lo, np.maximum(hi, lo)), 0.0)

    width = x1 - x0
    # columns where arc is below y0: full height
    full = width - overlap(x0, x1, -w0, w0)
    total = full * (1 / y0 - 1 / y1)
    # columns with y0 < arc < y1: |x| in (w1, w0)
    total = total + arc_part(-w0, -w1) + arc_part(w1, w0)
    total = total - (overlap(x0, x1, -w0, -w1) + overlap(x0, x1, w1, w0)) / y1
    return MASS * total


def _initial_cells():
    xs = np.linspace(-0.5, 0.5, 17)
    ys = np.concatenate([np.linspace(SQRT3_2, 1.0, 9), [1.125, 1.25, 1.5, 1.75, 2, 2.5, 3, 4, 6, 8, 12, 16]])
    X0, Y0 = np.meshgrid(xs[:-1], ys[:-1], indexing="ij")
    X1, Y1 = np.meshgrid(xs[1:], ys[1:], indexing="ij")
    return X0.ravel(), X1.ravel(), Y0.ravel(), Y1.ravel()


def hyperbolic_measure(region, tol: float = 1e-3, *, max_cells: int = 4_000_000) -> MeasureEstimate:
    """Normalized hyperbolic measure of ``F`` intersected with ``region``, within ``tol``.

    Cells classified INSIDE contribute their exact clipped measure.  MIXED
    cells contribute half their measure to the value and half to ``abserr``
    and are bisected in both directions until ``abserr <= tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    reg = _as_region(region)
    value = 0.0
    cells = 0
    tail = MASS / Y_MAX
    cusp = reg.cusp()
    tail_err = 0.0
    if cusp == INSIDE:
        value += tail
    elif cusp == MIXED:
        value += tail / 2
        tail_err = tail / 2

    x0, x1, y0, y1 = _initial_cells()
    while True:
        # drop cells strictly below the arc
        keep = y1 > np.sqrt(np.clip(1 - np.maximum(x0 * x0, x1 * x1), 0, None))
        x0, x1, y0, y1 = x0[keep], x1[keep], y0[keep], y1[keep]
        cells += len(x0)
        meas = clipped_cell_measure(x0, x1, y0, y1)
        cls = reg.classify(x0, x1, y0, y1)
        value += float(meas[cls == INSIDE].sum())
        mixed = (cls == MIXED) & (meas > 0)
        pending = float(meas[mixed].sum()) / 2
        if pending + tail_err <= tol:
            return MeasureEstimate(value + pending, pending + tail_err, reg.desc, cells)
        if not mixed.any() or cells + 4 * int(mixed.sum()) > max_cells:
            raise ToleranceNotMet(
                f"abserr {pending + tail_err:.3g} > tol {tol:.3g} after {cells} cells")
        x0, x1, y0, y1 = x0[mixed], x1[mixed], y0[mixed], y1[mixed]
        xm = (x0 + x1) / 2
        ym = (y0 + y1) / 2
        x0, x1, y0, y1 = (
            np.concatenate([x0, xm, x0, xm]),
            np.concatenate([xm, x1, xm, x1]),
            np.concatenate([y0, y0, ym, ym]),
            np.concatenate([ym, ym, y1, y1]),
        )


def sigma_eps_measure(eps: float, tol: float = 1e-4, **kw) -> MeasureEstimate:
    """``mu(Sigma_eps)``; ``Sigma_eps`` is a neighbourhood of the corners zeta, zeta**2."""
    return hyperbolic_measure(SigmaEps(eps), tol, **kw)


@lru_cache(maxsize=64)
def sigma_mu(eps: float, tol: float = MU_TOL) -> MeasureEstimate:
    """Cached :func:`sigma_eps_measure` used as the equidistribution reference."""
    return sigma_eps_measure(eps, tol)


# ---------------------------------------------------------------- counts


def count_below(points, eps, values=None, *, center: int = 0, ctx: PrecisionContext | None = None) -> int:
    """Number of points with certified ``|j(tau) - center| < eps``.

    Precomputed certified ``values`` are used when they decide the comparison;
    otherwise the comparison is refined by re-evaluation.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    e = mpfr(eps)
    n = 0
    for i, p in enumerate(points):
        if values is not None:
            v = values[i]
            if center:
                prec = v.value.real.precision
                with gmpy2.context(precision=prec):
                    shifted = v.value - center
                with gmpy2.context(precision=64, round=gmpy2.RoundUp):
                    err = v.err + abs(shifted) * mpfr(2) ** (1 - prec)
                v = CertifiedComplex(shifted, err)
            lo, hi = v.abs_bounds()
            if hi < e:
                n += 1
                continue
            if lo > e:
                continue
        if center:
            n += certified_dist_less(p, center, eps, ctx)
        else:
            n += certified_abs_less(p, eps, ctx)
    return n


def gamma_eps_count(D: Discriminant | int, eps: float, ctx: PrecisionContext | None = None, *,
                    H: ClassPolynomial | None = None, mu_tol: float = MU_TOL) -> EquidistRecord:
    """Count conjugates in ``Gamma_eps`` and compare the share with ``mu(Sigma_eps)``."""
    D = validate_discriminant(D)
    if H is not None:
        points, values = list(H.points), list(H.conjugates)
    else:
        points, values = cm_points(D), None
    count = count_below(points, eps, values, ctx=ctx)
    mu = sigma_mu(float(eps), mu_tol)
    deg = len(points)
    return EquidistRecord(D, float(eps), count, deg, mu, abs(count / deg - mu.value))


def neighborhood_exponent(J0: int) -> int:
    """Order of vanishing ``k`` of ``j - J0`` on F: 3 at ``J0 = 0``, 2 at 1728, else 1."""
    return 3 if J0 == 0 else 2 if J0 == 1728 else 1


def neighborhood_count(D: Discriminant | int, J0: int, eps: float, ctx: PrecisionContext | None = None, *,
                       H: ClassPolynomial | None = None) -> int:
    """Number of conjugates with certified ``|sigma(J) - J0| < eps``."""
    D = validate_discriminant(D)
    if H is not None:
        return count_below(list(H.points), eps, list(H.conjugates), center=int(J0), ctx=ctx)
    return count_below(cm_points(D), eps, center=int(J0), ctx=ctx)


# ---------------------------------------------------------------- distances


def _dist64(p: CMPoint, target: CMPoint | None = None, re=None):
    """``|tau - target|`` at 64-bit precision."""
    with gmpy2.context(precision=64):
        x = mpfr(gmpy2.mpq(p.re.numerator, p.re.denominator))
        y = gmpy2.sqrt(mpfr(p.im_num)) / p.im_den
        tx = mpfr(gmpy2.mpq(target.re.numerator, target.re.denominator))
        ty = gmpy2.sqrt(mpfr(target.im_num)) / target.im_den
        return gmpy2.hypot(x - tx, y - ty)


_ZETA2 = CMPoint(-ZETA.re, ZETA.im_num, ZETA.im_den, ReducedForm(1, -1, 1))


def _same_point(p: CMPoint, q: CMPoint) -> bool:
    return p.re == q.re and p.im2 == q.im2


def liouville_check(D: Discriminant | int, *, slack: float = 1e-9) -> list[LiouvilleRow]:
    """Check ``-log min(|tau - zeta|, |tau - zeta**2|) <= 4 log(2 sqrt|D|)`` per CM point."""
    D = validate_discriminant(D)
    if D.delta == -3:
        raise PreconditionError("the CM point of discriminant -3 is zeta itself")
    bound = 4 * math.log(2 * math.sqrt(-D.delta))
    rows = []
    for p in cm_points(D):
        if _same_point(p, ZETA) or _same_point(p, _ZETA2):
            raise PreconditionError(f"CM point of {p.source_form} coincides with zeta")
        d = min(_dist64(p, ZETA), _dist64(p, _ZETA2))
        lhs = -float(gmpy2.log(d))
        rows.append(LiouvilleRow(p.source_form, float(d), bound, lhs <= bound + slack))
    return rows


def jzlb_ratio(tau) -> np.ndarray:
    """``|j(tau)| / (|tau - zeta|**3 |tau - zeta**2|**3)`` in double precision."""
    tau = np.asarray(tau, complex)
    j, _ = j_float(tau)
    return np.abs(j) / (np.abs(tau - ZETA_C) ** 3 * np.abs(tau - ZETA2_C) ** 3)


def jzlb_constant_estimate(grid_n: int) -> float:
    """Grid minimum over ``F`` with ``Im tau <= 4`` of the ratio in :func:`jzlb_ratio`.

    The grid has about ``grid_n`` points, including the unit arc.  The ratio
    grows without bound toward the cusp, so the truncation at ``Im tau = 4``
    loses nothing.  This is an estimate, not a certified bound.
    """
    if grid_n < 1000:
        raise ValueError("grid_n must be at least 1000")
    n = int(math.ceil(math.sqrt(grid_n)))
    xs = np.linspace(-0.5, 0.5, n)
    ys = np.linspace(SQRT3_2, 4.0, n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    tau = (X + 1j * Y).ravel()
    tau = tau[np.abs(tau) >= 1]
    arc = np.exp(1j * np.linspace(np.pi / 3, 2 * np.pi / 3, n))
    tau = np.concatenate([tau, arc])
    far = (np.abs(tau - ZETA_C) > 1e-6) & (np.abs(tau - ZETA2_C) > 1e-6)
    return float(jzlb_ratio(tau[far]).min())


def dioapprox_ratio(D: Discriminant | int, eta: CMPoint = ZETA) -> float:
    """``max_tau (-log|tau - eta|) / max(1, h(tau))`` over the CM points of ``D``."""
    D = validate_discriminant(D)
    if not (_same_point(eta, ZETA) or _same_point(eta, I_POINT)):
        raise ValueError("eta must be zeta or i")
    best = -math.inf
    for p in cm_points(D):
        if _same_point(p, eta):
            raise EtaCollision(f"CM point of {p.source_form} equals eta")
        d = _dist64(p, eta)
        best = max(best, -float(gmpy2.log(d)) / max(1.0, tau_height(p)))
    return best


# ---------------------------------------------------------------- trends


def deviation_trend(rows, mu: float, *, top: int = 10, group: int = 3) -> dict:
    """Compare deviations ``|count/h - mu|`` of the largest and smallest class numbers.

    ``rows`` are ``(delta, h, count)`` triples.  The ``top`` rows of largest
    ``h`` are kept; the medians of the ``group`` largest and ``group`` smallest
    among them are returned with the verdict ``top_median < bottom_median``.
    """
    chosen = sorted(rows, key=lambda r: (-r[1], -abs(r[0])))[:top]
    devs = [(h, abs(c / h - mu), d) for d, h, c in chosen]
    hi = sorted(x[1] for x in devs[:group])
    lo = sorted(x[1] for x in devs[-group:])
    med_hi = hi[len(hi) // 2]
    med_lo = lo[len(lo) // 2]
    return {
        "chosen": devs,
        "top_median": med_hi,
        "bottom_median": med_lo,
        "passed": med_hi < med_lo,
    }
