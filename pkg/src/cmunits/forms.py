"""Reduced binary quadratic forms and their CM points.

Each primitive reduced form ``(a, b, c)`` of discriminant ``delta`` gives a
CM point ``tau = (-b + sqrt(delta)) / (2a)``, and ``j(tau)`` runs over the
conjugates of the singular modulus as the form runs over the class group.
Points are normalized into::

    F = { tau : Re tau in (-1/2, 1/2], |tau| >= 1, Re tau >= 0 if |tau| = 1 }

All membership tests and heights use exact integers and rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .discriminants import Discriminant, validate_discriminant

__all__ = [
    "ReducedForm",
    "CMPoint",
    "reduced_forms",
    "class_number",
    "cm_point",
    "cm_points",
    "tau_height",
    "in_fundamental_domain",
]


@dataclass(frozen=True)
class ReducedForm:
    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        return -a < b <= a <= c and not (a == c and b < 0)

    def is_primitive(self) -> bool:
        return math.gcd(math.gcd(self.a, self.b), self.c) == 1

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True)
class CMPoint:
    """``tau = re + i * sqrt(im_num) / im_den`` with ``re`` rational."""

    re: Fraction
    im_num: int
    im_den: int
    source_form: ReducedForm

    @property
    def abs2(self) -> Fraction:
        """Exact ``|tau|**2``."""
        return self.re * self.re + Fraction(self.im_num, self.im_den * self.im_den)

    @property
    def im2(self) -> Fraction:
        return Fraction(self.im_num, self.im_den * self.im_den)

    def __complex__(self) -> complex:
        return complex(float(self.re), math.sqrt(self.im_num) / self.im_den)

    def conjugate_partner(self) -> CMPoint:
        """The point ``-conj(tau)``, at which ``j`` takes the complex conjugate value."""
        a, b, c = self.source_form.as_tuple()
        return CMPoint(-self.re, self.im_num, self.im_den, ReducedForm(a, -b, c))


def in_fundamental_domain(re: Fraction, abs2: Fraction) -> bool:
    """Exact membership test for F given ``Re tau`` and ``|tau|**2``."""
    half = Fraction(1, 2)
    if not (-half < re <= half):
        return False
    if abs2 < 1:
        return False
    if abs2 == 1 and re < 0:
        return False
    return True


def _sort_key(form: ReducedForm) -> tuple[int, int, bool]:
    # conjugate classes (a, b, c), (a, -b, c) are kept adjacent, positive b first
    return (form.a, abs(form.b), form.b < 0)


def reduced_forms(D: Discriminant | int) -> list[ReducedForm]:
    """All primitive reduced forms of discriminant ``D``."""
    D = validate_discriminant(D)
    n = -D.delta
    out = []
    a = 1
    while 3 * a * a <= n:
        for b in range(-a + 1, a + 1):
            if (b - n) % 2:
                continue
            num = b * b + n
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (c == a and b < 0):
                continue
            if math.gcd(math.gcd(a, b), c) != 1:
                continue
            out.append(ReducedForm(a, b, c))
        a += 1
    out.sort(key=_sort_key)
    return out


def class_number(D: Discriminant | int) -> int:
    return len(reduced_forms(D))


def cm_point(form: ReducedForm) -> CMPoint:
    """The CM point of a reduced form, normalized into F."""
    a, b, c = form.as_tuple()
    re = Fraction(-b, 2 * a)
    if re == Fraction(-1, 2):
        re += 1
    # |tau|**2 = c / a is unchanged by both moves
    if a == c and re < 0:
        # on the unit circle -1/tau = -conj(tau)
        re = -re
    return CMPoint(re, -form.discriminant, 2 * a, form)


def cm_points(D: Discriminant | int) -> list[CMPoint]:
    return [cm_point(f) for f in reduced_forms(D)]


def tau_height(p: CMPoint) -> float:
    """Weil height of ``tau``: ``1/2 log c``.

    The minimal polynomial ``a T^2 + b T + c`` is primitive and both roots have
    modulus ``sqrt(c/a) >= 1``, so its Mahler measure is ``c``.
    """
    return 0.5 * math.log(p.source_form.c)
