"""Weil heights of singular moduli.

Singular moduli are algebraic integers, so only the archimedean places
contribute and ``h(J) = (1/D) sum_sigma log max(1, |sigma(J)|)``.  This is
computed in two independent ways:

* from certified conjugates ``j(tau)`` (:func:`height_report`), and
* from the integer coefficients of ``H_D`` alone, via the Mahler measure and
  Graeffe root squaring (:func:`mahler_height`).

Splitting the conjugate sum at ``|sigma(J)| = 1`` gives
``pos_sum + neg_sum = log |H_D(0)|``; for a unit the right side vanishes and
the height equals minus the normalized negative part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpfr, mpz

from .classpoly import ClassPolynomial, eval_at_integer, hilbert_class_poly
from .discriminants import Discriminant, nt_correction, validate_discriminant
from .errors import PreconditionError, PreconditionNotUnit, Undecidable
from .forms import cm_points
from .jeval import CertifiedComplex, PrecisionContext, eval_j_many

__all__ = [
    "HeightReport",
    "height_report",
    "height_from_conjugates",
    "mahler_height",
    "log_mahler_measure",
    "colmez_diagnostic",
    "height_upper_decomposition",
]

SUM_BITS = 192
_UP = gmpy2.context(precision=64, round=gmpy2.RoundUp)
NEG_INF = float("-inf")


@dataclass(frozen=True)
class HeightReport:
    delta: Discriminant
    height: mpfr
    pos_sum: mpfr
    neg_sum: mpfr
    log_abs_norm: mpfr | float
    ratio: float
    nt_corr: float
    err: mpfr
    degree: int

    @property
    def identity_residual(self):
        """``pos_sum + neg_sum - log|H(0)|`` (``0`` when ``H(0) = 0``)."""
        if self.log_abs_norm == NEG_INF:
            return mpfr(0)
        with gmpy2.context(precision=SUM_BITS):
            return self.pos_sum + self.neg_sum - self.log_abs_norm


def _log_abs_int(n: int):
    if n == 0:
        return NEG_INF
    with gmpy2.context(precision=SUM_BITS):
        return gmpy2.log(abs(mpz(n)))


def height_from_conjugates(D: Discriminant, conjugates, const_term: int) -> HeightReport:
    """Assemble a :class:`HeightReport` from certified conjugate values."""
    pos = mpfr(0, SUM_BITS)
    neg = mpfr(0, SUM_BITS)
    neg_inf = False
    err = mpfr(0)
    for v in conjugates:
        lo, hi = v.abs_bounds()
        with gmpy2.context(precision=SUM_BITS):
            m = abs(v.value)
            if lo == 0 and hi < 1:
                neg_inf = True
                continue
            lg = gmpy2.log(m)
            if hi <= 1:
                neg += lg
            elif lo >= 1:
                pos += lg
            else:
                # straddles the unit circle; both candidate logs are within err of 0
                if lg > 0:
                    pos += lg
                else:
                    neg += lg
        # |log m_true - log m| <= err / lo, plus summation rounding
        err = _UP.add(err, _UP.div(v.err, lo))
    n = len(conjugates)
    err = _UP.add(err, _UP.mul(mpfr(2) ** (4 - SUM_BITS), _UP.add(abs(pos), abs(neg)) + n))
    with gmpy2.context(precision=SUM_BITS):
        height = pos / n
    log_norm = _log_abs_int(const_term)
    ratio = float(height) / math.log(-D.delta)
    return HeightReport(
        delta=D,
        height=height,
        pos_sum=pos,
        neg_sum=mpfr("-inf") if neg_inf else neg,
        log_abs_norm=log_norm,
        ratio=ratio,
        nt_corr=nt_correction(D),
        err=err,
        degree=n,
    )


def height_report(D: Discriminant | int, ctx: PrecisionContext | None = None, *,
                  H: ClassPolynomial | None = None, method: str = "eisenstein") -> HeightReport:
    """Height of the singular modulus of discriminant ``D`` from its conjugates.

    Conjugates are evaluated afresh at ``ctx`` (by default through the
    Eisenstein route, independent of the class polynomial's eta route), and
    ``log_abs_norm`` comes from the exact integer ``|H_D(0)|``.
    """
    D = validate_discriminant(D)
    ctx = ctx or PrecisionContext(160, 32)
    H = H or hilbert_class_poly(D)
    values = eval_j_many(cm_points(D), ctx, method=method)
    return height_from_conjugates(D, values, H.coeffs[0])


def _graeffe_int(c: list) -> list:
    """One exact Graeffe step: coefficients of ``(-1)**n p(x) p(-x)`` in ``x**2``."""
    even = c[0::2]
    odd = c[1::2]
    n = len(c) - 1
    out = [mpz(0)] * (n + 1)
    for i, a in enumerate(even):
        for k, b in enumerate(even):
            out[i + k] += a * b
    for i, a in enumerate(odd):
        for k, b in enumerate(odd):
            out[i + k + 1] -= a * b
    if n % 2:
        out = [-x for x in out]
    return out


def _graeffe_float(c: list) -> list:
    even = c[0::2]
    odd = c[1::2]
    n = len(c) - 1
    out = [mpfr(0)] * (n + 1)
    for i, a in enumerate(even):
        for k in range(i, len(even)):
            t = a * even[k]
            out[i + k] += t if i == k else 2 * t
    for i, a in enumerate(odd):
        for k in range(i, len(odd)):
            t = a * odd[k]
            out[i + k + 1] -= t if i == k else 2 * t
    if n % 2:
        out = [-x for x in out]
    return out


def log_mahler_measure(coeffs, *, max_steps: int = 64, float_bits: int = 256,
                       exact_bits: int = 12000) -> tuple[mpfr, mpfr]:
    """``log M(P)`` for an integer polynomial (ascending coefficients).

    With ``P_k`` the ``k``-th Graeffe iterate scaled by ``s_k`` to unit maximum
    coefficient, ``log M(P) = sum_k 2**-k log s_k + 2**-k log M(P_k)``.  The
    last term lies in ``[-log C(n, n/2), log sqrt(n+1)] * 2**-k`` and tends to
    zero much faster once the root moduli separate.  Iteration stops after
    ``max_steps`` squarings or once the increments drop below ``2**-96``.
    The returned pair is ``(estimate, a-priori bracket half-width)``.

    The first squarings run in exact integers (no cancellation) while the
    coefficients stay below ``exact_bits``; the rest in ``float_bits`` floats.
    """
    c = [mpz(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    if not c:
        raise ValueError("zero polynomial")
    # roots at 0 do not contribute
    k0 = 0
    while c[k0] == 0:
        k0 += 1
    c = c[k0:]
    n = len(c) - 1
    if n == 0:
        with gmpy2.context(precision=float_bits):
            return gmpy2.log(abs(mpfr(c[0]))), mpfr(0)

    steps = 0
    while steps < max_steps and max(abs(x).bit_length() for x in c) < exact_bits:
        c = _graeffe_int(c)
        steps += 1
    with gmpy2.context(precision=float_bits):
        big = max(abs(x) for x in c)
        est = gmpy2.log(mpfr(big)) / 2**steps
        f = [mpfr(x) / mpfr(big) for x in c]
        small = mpfr(2) ** -96
        quiet = 0
        while steps < max_steps:
            f = _graeffe_float(f)
            steps += 1
            s = max(abs(x) for x in f)
            inc = gmpy2.log(s) / 2**steps
            est += inc
            f = [x / s for x in f]
            quiet = quiet + 1 if abs(inc) < small * (1 + abs(est)) else 0
            if quiet >= 2:
                break
        width = mpfr(max(math.log(math.comb(n, n // 2)), 0.5 * math.log(n + 1))) / 2**steps
    return est, width


def mahler_height(H: ClassPolynomial) -> mpfr:
    """``(1 / deg H) log M(H)`` from the integer coefficients only."""
    est, _ = log_mahler_measure(H.coeffs)
    with gmpy2.context(precision=SUM_BITS):
        return est / H.degree


def colmez_diagnostic(D: Discriminant | int, H: ClassPolynomial | None = None) -> tuple[float, float]:
    """``(h(J), h(J) / log|D|)``; the scan minimum of the ratio is an empirical lower constant."""
    D = validate_discriminant(D)
    if -D.delta < 4:
        raise PreconditionError("colmez_diagnostic needs |D| >= 4 (J = 0 has height 0 at D = -3)")
    H = H or hilbert_class_poly(D)
    rep = height_from_conjugates(D, H.conjugates, H.coeffs[0])
    return float(rep.height), rep.ratio


def height_upper_decomposition(D: Discriminant | int, eps: float, *, alpha: int = 0,
                               H: ClassPolynomial | None = None) -> tuple[float, float]:
    """Split the height of the unit ``J - alpha`` around the threshold ``eps``.

    Returns ``((#Gamma / D) * max_{|s| < eps} log(1/|s|), |log eps|)`` over the
    conjugates ``s = sigma(J) - alpha``; the first term is 0 when no conjugate
    is below ``eps``.  Raises :class:`PreconditionNotUnit` unless ``|H(alpha)| = 1``.
    """
    D = validate_discriminant(D)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    H = H or hilbert_class_poly(D)
    if abs(eval_at_integer(H, alpha)) != 1:
        raise PreconditionNotUnit(f"|H({alpha})| != 1 for discriminant {D.delta}")
    small = []
    for v in H.conjugates:
        p = v.value.real.precision
        with gmpy2.context(precision=p):
            shifted = CertifiedComplex(v.value - alpha, v.err)
        lo, hi = shifted.abs_bounds()
        if hi < eps:
            small.append(lo)
        elif lo < eps:
            raise Undecidable(f"conjugate modulus not separated from eps={eps}")
    term2 = abs(math.log(eps))
    if not small:
        return 0.0, term2
    worst = -float(gmpy2.log(min(small)))
    return len(small) / H.degree * worst, term2
