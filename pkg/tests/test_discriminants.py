import math

import pytest
from hypothesis import given, strategies as st

from cmunits.discriminants import (
    discriminants_up_to,
    is_fundamental,
    kronecker_symbol,
    nt_correction,
    prime_factorization,
    validate_discriminant,
)
from cmunits.errors import NotADiscriminant

SMALL_PRIMES = [p for p in range(2, 200) if all(p % q for q in range(2, int(p**0.5) + 1))]


def brute_fundamental(d):
    # d fundamental iff no square m^2 > 1 leaves a discriminant d/m^2
    for m in range(2, math.isqrt(-d) + 1):
        if d % (m * m) == 0 and (d // (m * m)) % 4 in (0, 1):
            return False
    return True


@pytest.mark.parametrize("n", [-3, -4, -7, -8, -12, -16, -27, -28, -60, -99, -108, -1003, -20000])
def test_decomposition_examples(n):
    D = validate_discriminant(n)
    assert D.delta0 * D.f**2 == n
    assert is_fundamental(D.delta0)


def test_known_decompositions():
    assert (validate_discriminant(-12).delta0, validate_discriminant(-12).f) == (-3, 2)
    assert (validate_discriminant(-16).delta0, validate_discriminant(-16).f) == (-4, 2)
    assert (validate_discriminant(-108).delta0, validate_discriminant(-108).f) == (-3, 6)
    assert (validate_discriminant(-20000).delta0, validate_discriminant(-20000).f) == (-8, 50)


@pytest.mark.parametrize("n", [0, 5, -1, -2, -5, -6, -9998, 3])
def test_rejects_non_discriminants(n):
    with pytest.raises(NotADiscriminant):
        validate_discriminant(n)


def test_fundamental_matches_bruteforce():
    for n in range(3, 3000):
        d = -n
        if d % 4 in (0, 1):
            assert is_fundamental(d) == brute_fundamental(d), d


def test_kronecker_matches_residue_count():
    for p in SMALL_PRIMES[1:]:
        squares = {x * x % p for x in range(1, p)}
        for d in range(-300, 0):
            if d % 4 not in (0, 1):
                continue
            expect = 0 if d % p == 0 else (1 if d % p in squares else -1)
            assert kronecker_symbol(d, p) == expect


def test_kronecker_two():
    # (d/2) for odd d: +1 iff d = +-1 mod 8
    assert kronecker_symbol(-7, 2) == 1
    assert kronecker_symbol(-3, 2) == -1
    assert kronecker_symbol(-4, 2) == 0


def test_enumeration_order():
    ds = [D.delta for D in discriminants_up_to(20)]
    assert ds == [-3, -4, -7, -8, -11, -12, -15, -16, -19, -20]


@given(st.integers(min_value=3, max_value=200000))
def test_nt_correction_bounds(n):
    if n % 4 not in (0, 3):
        return
    D = validate_discriminant(-n)
    c = nt_correction(D)
    assert -1e-12 <= c <= 0.5 * math.log(D.f) + 1e-12
    if D.f == 1:
        assert c == 0.0


def test_factorization():
    assert prime_factorization(360) == {2: 3, 3: 2, 5: 1}
    assert prime_factorization(9973) == {9973: 1}
