"""Hilbert class polynomials with certified integer rounding.

``H_D(X) = prod (X - j(tau))`` over the CM points of discriminant ``D``.  The
product is expanded in floating point from certified conjugates; each
coefficient is then rounded to the nearest integer, and the distance to that
integer plus a rigorous propagated error bound gives the rounding margin.

Unit criterion: a singular modulus is an algebraic integer whose minimal
polynomial is the monic ``H_D``, so it is a unit exactly when ``|H_D(0)| = 1``.
Likewise ``J - alpha`` has minimal polynomial ``H_D(X + alpha)`` with constant
term ``H_D(alpha)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr, mpz

from .discriminants import Discriminant, validate_discriminant
from .errors import PrecisionExhausted
from .forms import CMPoint, cm_point, reduced_forms
from .jeval import CertifiedComplex, PrecisionContext, eval_j_many

__all__ = [
    "ClassPolynomial",
    "precision_budget",
    "initial_precision",
    "hilbert_class_poly",
    "expand_roots",
    "eval_at_integer",
    "is_unit",
    "is_shifted_unit",
    "is_squarefree",
    "format_poly",
]

MIN_MARGIN_BITS = 10
MAX_RETRIES = 4
GUARD_BITS = 32

_UP = gmpy2.context(precision=64, round=gmpy2.RoundUp)


def _up():
    return gmpy2.context(precision=64, round=gmpy2.RoundUp)



@dataclass(frozen=True)
class ClassPolynomial:
    """Monic integer polynomial, coefficients in ascending order."""

    delta: Discriminant
    coeffs: tuple[int, ...]
    rounding_margin_bits: float
    precision_used: int
    points: tuple[CMPoint, ...] = field(default=(), repr=False, compare=False)
    conjugates: tuple[CertifiedComplex, ...] = field(default=(), repr=False, compare=False)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def constant_term(self) -> int:
        return self.coeffs[0]

    def __str__(self) -> str:
        return format_poly(self.coeffs)


def format_poly(coeffs, hex_digits: bool = False) -> str:
    """Render ascending coefficients as ``X^2 - 3 X + 5`` style text."""
    fmt = (lambda v: hex(v)) if hex_digits else str
    parts = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if c == 0:
            continue
        mono = "" if k == 0 else ("X" if k == 1 else f"X^{k}")
        mag = abs(c)
        if mono and mag == 1:
            body = mono
        elif mono:
            body = f"{fmt(mag)}*{mono}"
        else:
            body = fmt(mag)
        if not parts:
            parts.append(body if c > 0 else f"-{body}")
        else:
            parts.append(("+ " if c > 0 else "- ") + body)
    return " ".join(parts) if parts else "0"


def precision_budget(D: Discriminant | int) -> int:
    """Heuristic coefficient bit size plus margin: ``pi sqrt|D| sum 1/a / ln 2 + 16 h + 128``."""
    D = validate_discriminant(D)
    forms = reduced_forms(D)
    s = sum(1.0 / f.a for f in forms)
    return math.ceil(math.pi * math.sqrt(-D.delta) * s / math.log(2)) + 16 * len(forms) + 128


def initial_precision(D: Discriminant | int) -> int:
    """Working precision honouring ``CMUS_PRECISION_POLICY`` (``budget`` or ``fixed:<bits>``)."""
    policy = os.environ.get("CMUS_PRECISION_POLICY", "budget").strip()
    if policy == "budget":
        return precision_budget(D)
    if policy.startswith("fixed:"):
        bits = int(policy.split(":", 1)[1])
        if bits < 64:
            raise ValueError("fixed precision must be at least 64 bits")
        return bits
    raise ValueError(f"unknown CMUS_PRECISION_POLICY {policy!r}")


def _is_ambiguous(p: CMPoint) -> bool:
    a, b, c = p.source_form.as_tuple()
    return b == 0 or a == b or a == c


def expand_roots(points, conjugates, prec: int) -> tuple[list[int], float]:
    """Expand ``prod (X - r)`` and round; return ``(coeffs, margin_bits)``.

    Roots of ambiguous forms are real; the others come in complex-conjugate
    pairs ``(a, b, c)``, ``(a, -b, c)`` and are multiplied in as real quadratics.
    """
    u = mpfr(2) ** (1 - prec)
    factors = []  # (degree, float data, certified root)
    seen = set()
    for p, v in zip(points, conjugates):
        a, b, c = p.source_form.as_tuple()
        with gmpy2.context(precision=prec):
            if _is_ambiguous(p):
                factors.append((1, (v.value.real,), v))
                continue
            key = (a, abs(b), c)
            if key in seen:
                continue
            seen.add(key)
            s = 2 * v.value.real
            t = v.value.real * v.value.real + v.value.imag * v.value.imag
            factors.append((2, (s, t), v))

    coeffs = [mpfr(1, prec)]
    # P = prod (X + M_i) with M_i >= |root_i|, and E >= |computed - exact|,
    # both coefficientwise and upward rounded:
    #   E' = (X + M) E + err P + 3u (X + M) P
    bound_p = [mpfr(1)]
    bound_e = [mpfr(0)]
    for kind, data, v in factors:
        _, hi = v.abs_bounds()
        with gmpy2.context(precision=prec):
            if kind == 1:
                (r,) = data
                new = [mpfr(0)] * (len(coeffs) + 1)
                for k, ck in enumerate(coeffs):
                    new[k + 1] += ck
                    new[k] -= r * ck
            else:
                s, t = data
                new = [mpfr(0)] * (len(coeffs) + 2)
                for k, ck in enumerate(coeffs):
                    new[k + 2] += ck
                    new[k + 1] -= s * ck
                    new[k] += t * ck
        coeffs = new
        for _ in range(kind):
            bound_e, bound_p = _bound_step(bound_e, bound_p, hi, v.err, u)

    out = []
    worst = mpfr(0)
    with gmpy2.context(precision=prec):
        for k, ck in enumerate(coeffs):
            r = gmpy2.rint(ck)
            dist = _UP.add(abs(ck - r), _UP.mul(2, bound_e[k]))
            worst = max(worst, dist)
            out.append(int(r))
    margin = float("inf") if worst == 0 else -float(gmpy2.log2(worst))
    return out, margin


def _bound_step(e, p, m, err, u):
    """One linear factor of the coefficientwise error recursion."""
    n = len(p)
    new_p = [mpfr(0)] * (n + 1)
    new_e = [mpfr(0)] * (n + 1)
    with _up():
        for k in range(n):
            new_p[k + 1] += p[k]
            new_p[k] += m * p[k]
            new_e[k + 1] += e[k]
            new_e[k] += m * e[k] + err * p[k]
        for k in range(n + 1):
            new_e[k] += 3 * u * new_p[k]
    return new_e, new_p


def hilbert_class_poly(D: Discriminant | int, *, work_bits: int | None = None,
                       method: str = "eta") -> ClassPolynomial:
    """Compute ``H_D`` with a certified rounding margin of at least 10 bits.

    The precision starts at :func:`initial_precision` (or ``work_bits``) and is
    doubled on insufficient margin, at most four times.
    """
    D = validate_discriminant(D)
    points = [cm_point(f) for f in reduced_forms(D)]
    prec = work_bits or initial_precision(D)
    for _ in range(MAX_RETRIES + 1):
        ctx = PrecisionContext(prec, GUARD_BITS)
        try:
            values = eval_j_many(points, ctx, method=method)
        except PrecisionExhausted:
            prec *= 2
            continue
        coeffs, margin = expand_roots(points, values, prec + GUARD_BITS)
        if margin >= MIN_MARGIN_BITS and coeffs[-1] == 1:
            return ClassPolynomial(D, tuple(coeffs), margin, prec, tuple(points), tuple(values))
        prec *= 2
    raise PrecisionExhausted(f"class polynomial of {D.delta}: rounding margin below "
                             f"{MIN_MARGIN_BITS} bits after {MAX_RETRIES} doublings")


def eval_at_integer(H: ClassPolynomial, alpha: int) -> int:
    """Exact ``H(alpha)`` by Horner's rule."""
    acc = mpz(0)
    a = mpz(alpha)
    for c in reversed(H.coeffs):
        acc = acc * a + c
    return int(acc)


def is_unit(H: ClassPolynomial) -> bool:
    return abs(H.coeffs[0]) == 1


def is_shifted_unit(H: ClassPolynomial, alpha: int) -> bool:
    """True iff ``J - alpha`` is a unit, i.e. ``|H(alpha)| = 1``."""
    return abs(eval_at_integer(H, alpha)) == 1


def _poly_mod(coeffs, p):
    out = [c % p for c in coeffs]
    while out and out[-1] == 0:
        out.pop()
    return out


def _gcd_mod(a, b, p):
    while b:
        inv = pow(b[-1], -1, p)
        while len(a) >= len(b):
            if a[-1] == 0:
                a.pop()
                continue
            f = a[-1] * inv % p
            shift = len(a) - len(b)
            for i, bc in enumerate(b):
                a[shift + i] = (a[shift + i] - f * bc) % p
            a.pop()
        while a and a[-1] == 0:
            a.pop()
        a, b = b, a
    return a


def is_squarefree(H: ClassPolynomial, primes=(2**31 - 1, 2**31 + 11, 2**32 - 5, 1000003, 998244353)) -> bool:
    """Certify ``gcd(H, H') = 1`` by finding a prime modulo which ``H`` is squarefree.

    ``H`` is monic, so squarefreeness modulo any prime implies it over Q.
    Returns False only if every trial prime fails (a small discriminant of H
    is possible in principle, so False means "not certified").
    """
    if H.degree <= 1:
        return True
    deriv = [k * c for k, c in enumerate(H.coeffs)][1:]
    for p in primes:
        g = _gcd_mod(_poly_mod(H.coeffs, p), _poly_mod(deriv, p), p)
        if len(g) == 1:
            return True
    return False
