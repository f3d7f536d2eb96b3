"""Certified evaluation of Klein's j-function on the fundamental domain.

Two series routes are provided, both with explicit truncation and rounding
error bounds:

``"eisenstein"``
    ``j = E4**3 / ((E4**3 - E6**2) / 1728)`` from the divisor-sum expansions
    ``E4 = 1 + 240 sum sigma_3(n) q**n`` and ``E6 = 1 - 504 sum sigma_5(n) q**n``.
    The difference in the denominator is of size ``|q|``, so the working
    precision is raised by ``log2(1/|q|)`` bits internally.

``"eta"``
    ``j = (x + 16)**3 / x`` with ``x = 2**12 q (P(q**2) / P(q))**24`` where
    ``P(z) = prod (1 - z**n)`` is summed by Euler's pentagonal series.  Only
    ``O(sqrt(N))`` terms are needed, which makes it the fast path for class
    polynomials.

The error model is a first-order worst-case accumulation: every arithmetic
operation at ``p`` bits contributes at most ``2**(1 - p)`` relative error,
propagated through the fixed expression and then doubled.  Bound arithmetic
runs in 64-bit ``mpfr`` with directed rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import gmpy2
from gmpy2 import mpc, mpfr, mpq

from .errors import PrecisionExhausted, PreconditionError, Undecidable
from .forms import CMPoint, ReducedForm, cm_point

__all__ = [
    "PrecisionContext",
    "CertifiedComplex",
    "eval_j",
    "eval_j_many",
    "certified_abs_less",
    "certified_dist_less",
    "eisenstein_terms",
    "eisenstein_tail_bound",
    "ZETA",
    "I_POINT",
    "DEFAULT_CONTEXT",
]

_UP = gmpy2.context(precision=64, round=gmpy2.RoundUp)
_DN = gmpy2.context(precision=64, round=gmpy2.RoundDown)


def _up():
    return gmpy2.context(precision=64, round=gmpy2.RoundUp)


def _dn():
    return gmpy2.context(precision=64, round=gmpy2.RoundDown)


# Im tau >= sqrt(3)/2 on F; a little slack for binary approximations of boundary points
_MIN_IM = math.sqrt(3) / 2 - 1e-9
_ZETA3 = mpfr("1.2020569031595942853997381615114499907649862923405")
_ZETA5 = mpfr("1.0369277551433699263313654864570341680570809195019")
_SLACK = 2

ZETA = cm_point(ReducedForm(1, 1, 1))
I_POINT = cm_point(ReducedForm(1, 0, 1))


@dataclass(frozen=True)
class PrecisionContext:
    work_bits: int = 128
    guard_bits: int = 32

    def __post_init__(self):
        if self.work_bits < 64:
            raise ValueError("work_bits must be at least 64")
        if self.guard_bits < 32:
            raise ValueError("guard_bits must be at least 32")

    def doubled(self) -> PrecisionContext:
        return replace(self, work_bits=2 * self.work_bits)

    @property
    def target_log2(self) -> int:
        """``log2`` of the relative error the result must meet."""
        return -(self.work_bits - self.guard_bits)


DEFAULT_CONTEXT = PrecisionContext()


@dataclass(frozen=True)
class CertifiedComplex:
    """A complex value together with a rigorous absolute error bound."""

    value: mpc
    err: mpfr

    def abs_bounds(self) -> tuple[mpfr, mpfr]:
        """Certified lower and upper bounds for the modulus of the true value."""
        with gmpy2.context(precision=self.value.real.precision):
            m = abs(self.value)
        hi = _UP.add(_UP.mul(m, 1 + mpfr(2) ** (-m.precision + 1)), self.err)
        lo = _DN.sub(_DN.mul(m, 1 - mpfr(2) ** (-m.precision + 1)), self.err)
        return (lo if lo > 0 else mpfr(0), hi)

    def contains(self, z) -> bool:
        """True if ``z`` lies in the error disc (up to rounding in the test)."""
        p = self.value.real.precision
        with gmpy2.context(precision=p + 16):
            d = abs(self.value - mpc(z))
        return d <= self.err * (1 + 2.0 ** (-40))

    def conjugate(self) -> CertifiedComplex:
        v = self.value
        with gmpy2.context(precision=v.real.precision):
            return CertifiedComplex(mpc(v.real, -v.imag), self.err)

    def __complex__(self) -> complex:
        return complex(self.value)


# divisor sums, cached and extended on demand
_SIGMA3 = [0, 1]
_SIGMA5 = [0, 1]


def _extend_sigma(n: int) -> None:
    old = len(_SIGMA3) - 1
    if n <= old:
        return
    size = max(n, 2 * old) + 1
    s3 = [0] * size
    s5 = [0] * size
    for d in range(1, size):
        d3, d5 = d**3, d**5
        for m in range(d, size, d):
            s3[m] += d3
            s5[m] += d5
    _SIGMA3[:] = s3
    _SIGMA5[:] = s5


def _polylog_neg(k: int, r: mpfr) -> mpfr:
    """Upper bound of ``sum_{n>=1} n**k r**n`` for ``0 <= r < 1`` (closed form)."""
    eulerian = {
        3: (1, 4, 1),
        4: (1, 11, 11, 1),
        5: (1, 26, 66, 26, 1),
        6: (1, 57, 302, 302, 57, 1),
    }[k]
    num = mpfr(0)
    for c in reversed(eulerian):
        num = _UP.add(_UP.mul(num, r), c)
    with _dn():
        den = (1 - r) ** (k + 1)
    return _UP.div(_UP.mul(r, num), den)


def eisenstein_tail_bound(k: int, r, N: int) -> mpfr:
    """Upper bound of ``sum_{n > N} sigma_k(n) r**n`` using ``sigma_k(n) <= zeta(k) n**k``.

    Geometric majorant: consecutive ratios of ``n**k r**n`` for ``n > N`` are at
    most ``rho = ((N + 2) / (N + 1))**k r``.
    """
    r = mpfr(r)
    zk = _ZETA3 if k == 3 else _ZETA5
    with _up():
        rho = (mpfr(N + 2) / (N + 1)) ** k * r
        first = mpfr(N + 1) ** k * r ** (N + 1)
    if rho >= 1:
        return mpfr("inf")
    with _dn():
        one_minus = 1 - rho
    return _UP.mul(zk, _UP.div(first, one_minus))


def eisenstein_terms(r, target_log2: int) -> int:
    """Smallest ``N`` whose ``sigma_5`` tail bound is below ``2**target_log2``."""
    r = mpfr(r)
    lr = -float(gmpy2.log2(r))
    N = max(1, int((-target_log2) / lr) - 2)
    bound = mpfr(2) ** target_log2
    while eisenstein_tail_bound(5, r, N) >= bound:
        N += 1
    while N > 1 and eisenstein_tail_bound(5, r, N - 1) < bound:
        N -= 1
    return N


def _as_tau(tau, prec: int):
    """Return ``(tau, abs_err_bound, y_float)`` at precision ``prec``."""
    if isinstance(tau, CMPoint):
        with gmpy2.context(precision=prec):
            re = mpfr(mpq(tau.re.numerator, tau.re.denominator))
            im = gmpy2.sqrt(mpfr(tau.im_num)) / tau.im_den
            t = mpc(re, im)
        y = math.sqrt(tau.im_num) / tau.im_den
        err = _UP.mul(_UP.add(abs(re), im), mpfr(2) ** (1 - prec))
        return t, err, y
    if isinstance(tau, Fraction):
        raise TypeError("tau must be complex, not real")
    t = tau if isinstance(tau, mpc) else mpc(complex(tau), precision=53)
    return t, mpfr(0), float(t.imag)


def _q_of(t: mpc, t_err: mpfr, prec: int):
    """``q = exp(2 pi i t)`` with a relative error bound."""
    with gmpy2.context(precision=prec):
        arg = 2 * gmpy2.const_pi() * mpc(0, 1) * t
        q = gmpy2.exp(arg)
    u = mpfr(2) ** (1 - prec)
    # input error, argument rounding (|arg| <= 2 pi (|t| + 1)) and exp rounding
    mag = _UP.add(abs(t), 1)
    two_pi = mpfr("6.2831853071795864770")
    dq = _UP.add(_UP.mul(two_pi, t_err), _UP.mul(_UP.mul(_UP.mul(two_pi, mag), 4), u))
    dq = _UP.add(dq, _UP.mul(4, u))
    y = mpfr(t.imag, 64)
    with _dn():
        y_lo = y * (1 - mpfr(2) ** -62) - t_err
    with _up():
        r = gmpy2.exp(-2 * _DN.const_pi() * y_lo)
    return q, dq, r


def _finish(value: mpc, err: mpfr, ctx: PrecisionContext, prec: int) -> CertifiedComplex:
    err = _UP.mul(err, _SLACK)
    with gmpy2.context(precision=ctx.work_bits + ctx.guard_bits):
        value = +value
    # final rounding down to the reported precision
    err = _UP.add(err, _UP.mul(abs(value), mpfr(2) ** (1 - ctx.work_bits - ctx.guard_bits)))
    scale = max(mpfr(1), abs(value))
    allowed = _DN.mul(scale, mpfr(2) ** ctx.target_log2)
    if not err <= allowed:
        raise PrecisionExhausted(
            f"error bound {float(gmpy2.log2(err)):.1f} (log2) exceeds target at "
            f"work_bits={ctx.work_bits}"
        )
    return CertifiedComplex(value, err)


def _eval_eisenstein(tau, ctx: PrecisionContext, terms: int | None) -> CertifiedComplex:
    y_est = float(tau.im_num) ** 0.5 / tau.im_den if isinstance(tau, CMPoint) else complex(tau).imag
    extra = int(math.ceil(2 * math.pi * y_est / math.log(2))) + 8
    prec = ctx.work_bits + ctx.guard_bits + extra
    t, t_err, _ = _as_tau(tau, prec)
    q, dq, r = _q_of(t, t_err, prec)
    u = mpfr(2) ** (1 - prec)
    N = terms if terms is not None else eisenstein_terms(r, -prec)
    _extend_sigma(N)
    with gmpy2.context(precision=prec):
        s3 = mpc(0)
        s5 = mpc(0)
        qn = mpc(1)
        for n in range(1, N + 1):
            qn = qn * q
            s3 += _SIGMA3[n] * qn
            s5 += _SIGMA5[n] * qn
        e4 = 1 + 240 * s3
        e6 = 1 - 504 * s5
        a = e4 * e4 * e4
        b = e6 * e6
        den = (a - b) / 1728
        j = a / den

    # term-wise bounds: powers carry n (dq + u), scaling and summation (2N + 2) u
    lin3, sq3 = _polylog_neg(4, r), _polylog_neg(3, r)
    lin5, sq5 = _polylog_neg(6, r), _polylog_neg(5, r)
    cnt = _UP.mul(2 * N + 2, u)
    with _up():
        d = dq + u
        err_s3 = _ZETA3 * (d * lin3 + cnt * sq3) + eisenstein_tail_bound(3, r, N)
        err_s5 = _ZETA5 * (d * lin5 + cnt * sq5) + eisenstein_tail_bound(5, r, N)
        m4 = abs(e4)
        m6 = abs(e6)
        e4_err = 240 * err_s3 + 2 * u * (m4 + 1)
        e6_err = 504 * err_s5 + 2 * u * (m6 + 1)
        # (m + e)**3 - m**3 = e (3 m**2 + 3 m e + e**2), all terms positive
        a_err = e4_err * (3 * m4 * m4 + 3 * m4 * e4_err + e4_err * e4_err) + 3 * u * (m4 + e4_err) ** 3
        b_err = e6_err * (2 * m6 + e6_err) + 2 * u * (m6 + e6_err) ** 2
        ma = abs(a)
        mb = abs(b)
        den_err = (a_err + b_err + u * (ma + mb)) / 1728 + 2 * u * abs(den)
    with _dn():
        den_lo = abs(den) * (1 - 2 * u) - den_err
    if den_lo <= 0:
        raise PrecisionExhausted("denominator E4^3 - E6^2 not separated from zero")
    with _up():
        mj = abs(j)
        err = (a_err + mj * den_err) / den_lo + 2 * u * mj
    return _finish(j, err, ctx, prec)


def _pentagonal(z: mpc, K: int) -> mpc:
    """``1 + sum_{k=1}^{K} (-1)**k (z**(k(3k-1)/2) + z**(k(3k+1)/2))``."""
    total = mpc(1)
    zk = mpc(1)  # z**k
    z2 = z * z
    step = z  # z**(2k+1) for the current k (starts at k = 0)
    w = mpc(1)  # z**(k(3k+1)/2), starting at k = 0
    for k in range(1, K + 1):
        zk = zk * z
        w = w * step  # z**(k(3k-1)/2)
        w2 = w * zk  # z**(k(3k+1)/2)
        if k & 1:
            total -= w + w2
        else:
            total += w + w2
        w = w2
        step = step * z2
    return total


def _pentagonal_terms(r, target_log2: int) -> tuple[int, mpfr]:
    """Smallest ``K`` whose omitted tail is below ``2**target_log2``, and that tail bound."""
    lr = -float(gmpy2.log2(r))
    K = 0
    while (K + 1) * (3 * K + 2) // 2 * lr < -target_log2 + 8:
        K += 1
    g = (K + 1) * (3 * K + 2) // 2  # first omitted exponent
    with _up():
        tail = r**g / _DN.sub(1, r)
    return K, tail


def _eval_eta(tau, ctx: PrecisionContext) -> CertifiedComplex:
    prec = ctx.work_bits + ctx.guard_bits
    t, t_err, _ = _as_tau(tau, prec)
    q, dq, r = _q_of(t, t_err, prec)
    u = mpfr(2) ** (1 - prec)
    K1, tail1 = _pentagonal_terms(r, -prec)
    r2 = _UP.mul(r, r)
    K2, tail2 = _pentagonal_terms(r2, -prec)
    with gmpy2.context(precision=prec):
        p1 = _pentagonal(q, K1)
        p2 = _pentagonal(q * q, K2)
        ratio = p2 / p1
        r3 = ratio * ratio * ratio
        r6 = r3 * r3
        r12 = r6 * r6
        r24 = r12 * r12
        x = 4096 * q * r24
        s = x + 16
        w = s * s * s
        j = w / x

    def series_err(rr, dz, K, tail):
        # sum g rr**g <= rr / (1 - rr)**2 ; sum rr**g <= 1 + rr / (1 - rr)
        with _up():
            om = _DN.sub(1, rr)
            weighted = rr / (om * om)
            mass = 1 + rr / om
            return dz * weighted + (4 * K + 2 * (2 * K + 1) + 2) * u * mass + tail, mass

    e1, _ = series_err(r, dq, K1, tail1)
    e2, _ = series_err(r2, _UP.add(_UP.mul(2, dq), u), K2, tail2)
    with _dn():
        lo1 = 1 - r / (1 - r) - e1
        lo2 = 1 - r2 / (1 - r2) - e2
    if lo1 <= 0 or lo2 <= 0:
        raise PrecisionExhausted("pentagonal series not bounded away from zero")
    with _up():
        d_ratio = e1 / lo1 + e2 / lo2 + u
        d_x = dq + 24 * d_ratio + 60 * u
        mx = abs(x)
        ms = abs(s)
        s_err = mx * d_x + u * (mx + 16)
        w_err = s_err * (3 * ms * ms + 3 * ms * s_err + s_err * s_err) + 3 * u * (ms + s_err) ** 3
        mw = abs(w)
    with _dn():
        x_lo = mx * (1 - d_x)
    if x_lo <= 0:
        raise PrecisionExhausted("x = 2^12 q (P(q^2)/P(q))^24 not separated from zero")
    with _up():
        err = (w_err + mw * d_x) / x_lo + 2 * u * abs(j)
    return _finish(j, err, ctx, prec)


def eval_j(tau, ctx: PrecisionContext | None = None, *, method: str = "eisenstein",
           terms: int | None = None) -> CertifiedComplex:
    """Evaluate ``j(tau)`` with a certified absolute error bound.

    ``tau`` is a :class:`~cmunits.forms.CMPoint` (evaluated exactly) or any
    complex number with ``Im tau >= sqrt(3)/2``, taken as exact.  The result
    satisfies ``err <= 2**-(work_bits - guard_bits) * max(1, |j(tau)|)``;
    otherwise :class:`PrecisionExhausted` is raised.  ``terms`` overrides the
    Eisenstein truncation order (the tail is still included in ``err``).
    """
    ctx = ctx or DEFAULT_CONTEXT
    y = (math.sqrt(tau.im_num) / tau.im_den) if isinstance(tau, CMPoint) else complex(tau).imag
    if y < _MIN_IM:
        raise PreconditionError(f"Im tau = {y} is below sqrt(3)/2; reduce tau into F first")
    if method == "eisenstein":
        return _eval_eisenstein(tau, ctx, terms)
    if method == "eta":
        if terms is not None:
            raise ValueError("terms override only applies to the eisenstein route")
        return _eval_eta(tau, ctx)
    raise ValueError(f"unknown method {method!r}")


def eval_j_many(points, ctx: PrecisionContext | None = None, *, method: str = "eta"):
    """Evaluate ``j`` at a list of CM points, reusing ``j(-conj tau) = conj j(tau)``."""
    ctx = ctx or DEFAULT_CONTEXT
    cache: dict[tuple, CertifiedComplex] = {}
    out = []
    for p in points:
        key = (p.re, p.im_num, p.im_den)
        partner = (-p.re, p.im_num, p.im_den)
        if key in cache:
            out.append(cache[key])
        elif partner in cache:
            v = cache[partner].conjugate()
            cache[key] = v
            out.append(v)
        else:
            v = eval_j(p, ctx, method=method)
            cache[key] = v
            out.append(v)
    return out


_CAP_LOG2 = 1024


def _decide(dist_fn, tau, eps, ctx: PrecisionContext, method: str) -> bool:
    eps = mpfr(eps) if not isinstance(eps, Fraction) else mpfr(mpq(eps.numerator, eps.denominator), 256)
    while True:
        lo, hi = dist_fn(eval_j(tau, ctx, method=method))
        if hi < eps:
            return True
        if lo > eps:
            return False
        if ctx.work_bits - ctx.guard_bits > _CAP_LOG2:
            raise Undecidable(f"|j(tau)| indistinguishable from {float(eps)} within 2^-{_CAP_LOG2}")
        ctx = ctx.doubled()


def certified_abs_less(tau, eps, ctx: PrecisionContext | None = None, *,
                       method: str = "eisenstein") -> bool:
    """Decide ``|j(tau)| < eps`` rigorously, refining precision until separated."""
    return _decide(CertifiedComplex.abs_bounds, tau, eps, ctx or PrecisionContext(64, 32), method)


def certified_dist_less(tau, center, eps, ctx: PrecisionContext | None = None, *,
                        method: str = "eisenstein") -> bool:
    """Decide ``|j(tau) - center| < eps`` rigorously for an exact integer ``center``."""

    def bounds(v: CertifiedComplex):
        p = v.value.real.precision
        with gmpy2.context(precision=p):
            shifted = v.value - center
        rounding = _UP.mul(abs(shifted), mpfr(2) ** (1 - p))
        return CertifiedComplex(shifted, _UP.add(v.err, rounding)).abs_bounds()

    return _decide(bounds, tau, eps, ctx or PrecisionContext(64, 32), method)
