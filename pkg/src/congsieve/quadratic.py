"""Principal prime ideals in real quadratic fields Q(sqrt(m)).

Elements of the maximal order are written (a + b sqrt(m)) / s with s = 2 when
m = 1 mod 4 and s = 1 otherwise; omega = (s - 1 + sqrt(m)) / s generates the
order over Z.  A prime of degree one is described by its norm q and the image
rho of omega in F_q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import sympy

MAX_M = 10**4


class QuadraticError(ValueError):
    pass


def order_denominator(m: int) -> int:
    return 2 if m % 4 == 1 else 1


def _check_m(m: int) -> None:
    if not 2 <= m <= MAX_M:
        raise QuadraticError(f"m = {m} outside [2, {MAX_M}]")
    if not sympy.ntheory.factor_.core(m) == m:
        raise QuadraticError(f"m = {m} is not squarefree")


@dataclass(frozen=True)
class QuadIdeal:
    m: int
    norm: int
    rho: int  # omega = rho mod the ideal; 0 for the unit ideal
    witness: tuple[int, int] | None = None

    def __post_init__(self):
        if self.witness is not None:
            a, b = self.witness
            s = order_denominator(self.m)
            if abs(a * a - self.m * b * b) != s * s * self.norm:
                raise QuadraticError(f"witness {self.witness} has the wrong norm")


def omega_min_poly(m: int) -> tuple[int, int, int]:
    """x^2 + c1 x + c0 with root omega, constant term first."""
    if order_denominator(m) == 2:
        return (-(m - 1) // 4, -1, 1)
    return (-m, 0, 1)


def primes_above(m: int, q: int) -> list[QuadIdeal]:
    """Degree-one primes above the rational prime q, sorted by rho."""
    _check_m(m)
    c0, c1, _ = omega_min_poly(m)
    return [QuadIdeal(m, q, r) for r in range(q) if (r * r + c1 * r + c0) % q == 0]


def _coords(a: int, b: int, m: int) -> tuple[int, int]:
    """(a + b sqrt(m)) / s = x + y omega."""
    s = order_denominator(m)
    return (a - (s - 1) * b) // s, b


def in_ideal(a: int, b: int, ideal: QuadIdeal) -> bool:
    if ideal.norm == 1:
        return True
    x, y = _coords(a, b, ideal.m)
    return (x + y * ideal.rho) % ideal.norm == 0


def _mul(u: tuple[int, int], v: tuple[int, int], m: int) -> tuple[int, int]:
    s = order_denominator(m)
    a = u[0] * v[0] + m * u[1] * v[1]
    b = u[0] * v[1] + u[1] * v[0]
    return a // s, b // s


def _floor_quotient(P: int, Q: int, D: int, r: int) -> int:
    # floor((P + sqrt(D)) / Q) for non-square D, r = isqrt(D)
    if Q > 0:
        return (P + r) // Q
    return -((P + r) // -Q) - 1


def _cf_elements(m: int, q: int, b0: int):
    """Elements q (h - k theta), theta = (b0 + sqrt(D)) / (2q), over the continued fraction of theta.

    Yields (a, b) with the element equal to (a + b sqrt(m)) / s, stopping once
    the cycle of complete quotients closes.
    """
    s = order_denominator(m)
    D = m if s == 2 else 4 * m
    r = math.isqrt(D)
    P, Q = b0, 2 * q
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    seen = set()
    while (P, Q) not in seen:
        seen.add((P, Q))
        c = _floor_quotient(P, Q, D, r)
        h0, h1 = h1, c * h1 + h0
        k0, k1 = k1, c * k1 + k0
        P = c * Q - P
        Q = (D - P * P) // Q
        # q h - k (b0 + sqrt(D)) / 2
        if s == 2:
            yield 2 * q * h1 - k1 * b0, -k1
        else:
            yield q * h1 - k1 * b0 // 2, -k1


def fundamental_unit(m: int) -> tuple[int, int]:
    """The fundamental unit > 1 as (a, b) with unit = (a + b sqrt(m)) / s."""
    _check_m(m)
    s = order_denominator(m)
    for a, b in _cf_elements(m, 1, s - 1):
        if b and abs(a * a - m * b * b) == s * s:
            # a + b sqrt(m) is small, its conjugate is the unit up to sign
            a, b = a, -b
            if a < 0:
                a, b = -a, -b
            if b < 0:
                raise AssertionError("unit normalisation failed")
            return a, b
    raise AssertionError("no unit found in the continued fraction cycle")  # unreachable


def _canonical(w: tuple[int, int]) -> tuple[int, int]:
    a, b = w
    if a < 0 or (a == 0 and b < 0):
        a, b = -a, -b
    return a, b


def _canon_key(w: tuple[int, int]) -> tuple[int, int, int]:
    return abs(w[1]), w[0], w[1]


def _balance(w: tuple[int, int], m: int) -> tuple[int, int]:
    """Among +-w times powers of the fundamental unit, least |b|, then least a >= 0.

    |b| grows geometrically away from its minimum along the unit orbit, so each
    direction is walked until |b| is well past the best value seen.
    """
    eps = fundamental_unit(m)
    s = order_denominator(m)
    if eps[0] ** 2 - m * eps[1] ** 2 == s * s:
        inv = (eps[0], -eps[1])
    else:
        inv = (-eps[0], eps[1])
    best = _canonical(w)
    for step in (eps, inv):
        cur = w
        while abs(cur[1]) <= 4 * abs(best[1]) + 4:
            cur = _mul(cur, step, m)
            cand = _canonical(cur)
            if _canon_key(cand) < _canon_key(best):
                best = cand
    return best


def is_principal_quadratic(ideal: QuadIdeal) -> QuadIdeal | None:
    """The ideal with its canonical generator (a, b) attached, or None if it is not principal."""
    m, q, rho = ideal.m, ideal.norm, ideal.rho
    _check_m(m)
    s = order_denominator(m)
    if q == 1:
        return QuadIdeal(m, 1, 0, (s, 0))
    if not sympy.isprime(q):
        raise QuadraticError(f"norm {q} is not prime")
    c0, c1, _ = omega_min_poly(m)
    if (rho * rho + c1 * rho + c0) % q:
        raise QuadraticError(f"{rho} is not a root of the minimal polynomial of omega mod {q}")
    # the ideal is Z q + Z (omega - rho) = Z q + Z (b0 + sqrt(D)) / 2
    b0 = 1 - 2 * rho if s == 2 else -2 * rho
    for a, b in _cf_elements(m, q, b0):
        if abs(a * a - m * b * b) == s * s * q:
            w = _balance((a, b), m)
            if not in_ideal(*w, ideal):
                raise AssertionError(f"generator {w} does not lie in the ideal")
            return QuadIdeal(m, q, rho, w)
    return None
