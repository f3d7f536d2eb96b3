"""Imaginary quadratic discriminants.

A discriminant ``delta < 0`` with ``delta = 0, 1 (mod 4)`` factors uniquely
as ``delta0 * f**2`` with ``delta0`` fundamental and ``f`` the conductor of
the order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import NotADiscriminant

__all__ = [
    "Discriminant",
    "validate_discriminant",
    "is_discriminant",
    "is_fundamental",
    "kronecker_symbol",
    "nt_correction",
    "prime_factorization",
    "discriminants_up_to",
]


@dataclass(frozen=True, order=True)
class Discriminant:
    delta: int
    delta0: int
    f: int

    def __int__(self) -> int:
        return self.delta

    def __str__(self) -> str:
        return str(self.delta)


def prime_factorization(n: int) -> dict[int, int]:
    """Factor ``n > 0`` by trial division."""
    if n <= 0:
        raise ValueError("n must be positive")
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _squarefree(m: int) -> bool:
    return all(e == 1 for e in prime_factorization(m).values()) if m > 1 else m == 1


def is_discriminant(n: int) -> bool:
    return n < 0 and n % 4 in (0, 1)


def is_fundamental(d: int) -> bool:
    """True if ``d < 0`` is a fundamental discriminant."""
    if not is_discriminant(d):
        return False
    if d % 4 == 1:
        return _squarefree(-d)
    m = d // 4
    return m % 4 in (2, 3) and _squarefree(-m)


def validate_discriminant(n: int) -> Discriminant:
    """Return the decomposition ``n = delta0 * f**2`` of a discriminant.

    Raises :class:`NotADiscriminant` unless ``n < 0`` and ``n = 0, 1 (mod 4)``.
    """
    if isinstance(n, Discriminant):
        return n
    n = int(n)
    if not is_discriminant(n):
        raise NotADiscriminant(f"{n} is not a negative integer congruent to 0 or 1 mod 4")
    # largest f first: f**2 | n with n / f**2 fundamental
    for f in range(math.isqrt(-n), 0, -1):
        if n % (f * f) == 0 and is_fundamental(n // (f * f)):
            return Discriminant(n, n // (f * f), f)
    raise AssertionError("unreachable: every discriminant has a fundamental part")


def kronecker_symbol(d: int, p: int) -> int:
    """Kronecker symbol ``(d/p)`` for a prime ``p``."""
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    r = d % p
    if r == 0:
        return 0
    return 1 if pow(r, (p - 1) // 2, p) == 1 else -1


def nt_correction(D: Discriminant | int) -> float:
    """Conductor correction ``1/2 log f - 1/2 sum_{p | f} e_f(p) log p``.

    ``e_f(p) = (1 - chi(p)) / (p - chi(p)) * (1 - p**-n) / (1 - p**-1)`` where
    ``p**n`` exactly divides ``f`` and ``chi(p) = (delta0 / p)``.
    """
    D = validate_discriminant(D)
    if D.f == 1:
        return 0.0
    acc = 0.0
    for p, n in prime_factorization(D.f).items():
        chi = kronecker_symbol(D.delta0, p)
        e = (1 - chi) / (p - chi) * (1 - p ** (-n)) / (1 - 1 / p)
        acc += e * math.log(p)
    return 0.5 * math.log(D.f) - 0.5 * acc


def discriminants_up_to(dmax: int, dmin: int = 3):
    """Yield every discriminant with ``dmin <= |delta| <= dmax`` by increasing ``|delta|``."""
    for n in range(max(dmin, 3), dmax + 1):
        if n % 4 in (0, 3):
            yield validate_discriminant(-n)
