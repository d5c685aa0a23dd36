"""Small integer helpers shared across modules."""

from __future__ import annotations

from functools import lru_cache

from sympy import factorint, isprime, primerange


def is_prime(n: int) -> bool:
    return n >= 2 and bool(isprime(n))


@lru_cache(maxsize=None)
def primes_up_to(n: int) -> tuple[int, ...]:
    return tuple(int(p) for p in primerange(2, n + 1))


def factor(n: int) -> dict[int, int]:
    """Prime factorisation of a positive integer as {prime: exponent}."""
    if n < 1:
        raise ValueError(f"cannot factor {n}")
    return {int(p): int(e) for p, e in factorint(n).items()}


def valuation(n: int, p: int) -> int:
    if n == 0:
        raise ValueError("valuation of zero")
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v
