"""Prime decomposition in coefficient fields of degree <= 4 and reduction maps.

A prime above p is read off from a factor of the defining polynomial mod p
(Kummer-Dedekind).  That is only valid when p does not divide the index
[O_K : Z[theta]]; those primes are refused with :class:`IndexDividedError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import sympy
from sympy.ntheory import sqrt_mod

from .gfpoly import FField, FFElement, FPoly, ff_make, irreducible_roots, poly_factor, roots_in
from .util import is_prime, valuation

EigVector = tuple[Fraction, ...]


class IndexDividedError(ValueError):
    """p divides [O_K : Z[theta]], so factoring the defining polynomial mod p is unreliable."""


class DenominatorError(ValueError):
    """An eigenvalue coordinate has a denominator divisible by p."""


class FieldDataError(ValueError):
    pass


_x = sympy.Symbol("x")


@dataclass(frozen=True)
class CoeffField:
    defining_poly: tuple[int, ...]  # monic, constant term first; (0, 1) for Q
    disc: int  # discriminant of the maximal order

    def __post_init__(self):
        poly = tuple(int(c) for c in self.defining_poly)
        object.__setattr__(self, "defining_poly", poly)
        if len(poly) < 2 or poly[-1] != 1:
            raise FieldDataError(f"defining polynomial {poly} is not monic of degree >= 1")
        if len(poly) - 1 > 4:
            raise FieldDataError("coefficient fields of degree > 4 are not supported")
        if self.disc == 0:
            raise FieldDataError("field discriminant must be nonzero")
        if self.d > 1:
            _, factors = sympy.Poly(list(reversed(poly)), _x).factor_list()
            if len(factors) != 1 or factors[0][1] != 1:
                raise FieldDataError(f"defining polynomial {poly} is reducible over Q")
            pd = self.poly_disc
            ratio = Fraction(pd, self.disc)
            if ratio.denominator != 1 or not _is_square(ratio.numerator):
                raise FieldDataError(
                    f"field discriminant {self.disc} incompatible with polynomial discriminant {pd}"
                )

    @property
    def d(self) -> int:
        return len(self.defining_poly) - 1

    @property
    def poly_disc(self) -> int:
        return _poly_disc(self.defining_poly)

    @property
    def index(self) -> int:
        """[O_K : Z[theta]]."""
        return math.isqrt(self.poly_disc // self.disc)


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


@lru_cache(maxsize=None)
def _poly_disc(poly: tuple[int, ...]) -> int:
    if len(poly) == 2:
        return 1
    return int(sympy.discriminant(sympy.Poly(list(reversed(poly)), _x)))


@dataclass(frozen=True)
class PrimeIdealHandle:
    p: int
    field: CoeffField
    index: int  # position in split_prime(field, p)
    factor: FPoly
    e: int
    f: int
    residue_field: FField
    theta_image: FFElement

    def reduction_rows(self) -> tuple[tuple[int, ...], ...]:
        """Coefficient vectors of theta_image^j, j < d: the F_p-linear reduction map."""
        return _reduction_rows(self)

    def __repr__(self) -> str:
        return f"PrimeIdealHandle(p={self.p}, #{self.index}, e={self.e}, f={self.f}, factor={self.factor.coeffs})"


@lru_cache(maxsize=None)
def _reduction_rows(h: PrimeIdealHandle) -> tuple[tuple[int, ...], ...]:
    rows = []
    power = h.residue_field.one()
    for _ in range(h.field.d):
        rows.append(power.coeffs)
        power = power * h.theta_image
    return tuple(rows)


@lru_cache(maxsize=None)
def split_prime(field: CoeffField, p: int) -> tuple[PrimeIdealHandle, ...]:
    """The primes above p, one per irreducible factor of the defining polynomial mod p."""
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if field.d > 1:
        v_poly = valuation(field.poly_disc, p)
        v_field = valuation(field.disc, p)
        if v_poly > v_field:
            raise IndexDividedError(f"p = {p} divides the index of Z[theta] in {field.defining_poly}")
    if field.d == 1:
        F = ff_make(p, 1)
        return (PrimeIdealHandle(p, field, 0, FPoly(p, field.defining_poly), 1, 1, F, F(-field.defining_poly[0])),)
    if field.d == 2 and p != 2:
        return _split_quadratic(field, p)
    handles = []
    for i, (g, e) in enumerate(poly_factor(FPoly(p, field.defining_poly))):
        F = ff_make(p, g.degree)
        theta = irreducible_roots(F, g.coeffs)[0]
        handles.append(PrimeIdealHandle(p, field, i, g, e, g.degree, F, theta))
    return tuple(handles)


def _split_quadratic(field: CoeffField, p: int) -> tuple[PrimeIdealHandle, ...]:
    # x^2 + b x + c with p odd: the Legendre symbol of b^2 - 4c decides the splitting
    c, b, _ = field.defining_poly
    disc = (b * b - 4 * c) % p
    inv2 = pow(2, -1, p)
    if disc == 0:
        r = -b * inv2 % p
        F = ff_make(p, 1)
        return (PrimeIdealHandle(p, field, 0, FPoly(p, (-r, 1)), 2, 1, F, F(r)),)
    if pow(disc, (p - 1) // 2, p) == p - 1:
        F = ff_make(p, 2)
        g = FPoly(p, field.defining_poly)
        return (PrimeIdealHandle(p, field, 0, g, 1, 2, F, roots_in(F, g.coeffs)[0]),)
    s = int(sqrt_mod(disc, p))
    roots = sorted(((-b + s) * inv2 % p, (-b - s) * inv2 % p), key=lambda r: -r % p)
    F = ff_make(p, 1)
    return tuple(
        PrimeIdealHandle(p, field, i, FPoly(p, (-r, 1)), 1, 1, F, F(r)) for i, r in enumerate(roots)
    )


def unramified_primes_above(field: CoeffField, p: int) -> tuple[PrimeIdealHandle, ...]:
    return tuple(h for h in split_prime(field, p) if h.e == 1)


def reduce_eigenvalue(v: Sequence[Fraction], h: PrimeIdealHandle) -> FFElement:
    """Image of sum c_j theta^j in the residue field of h."""
    p = h.p
    F = h.residue_field
    out = [0] * F.k
    for c, row in zip(v, h.reduction_rows()):
        if not c:
            continue
        if c.denominator % p == 0:
            raise DenominatorError(f"coordinate {c} is not {p}-integral")
        cm = c.numerator * pow(c.denominator, -1, p) % p
        for j, r in enumerate(row):
            out[j] += cm * r
    return FFElement(F, tuple(x % p for x in out))


def hecke_order_index(field: CoeffField, vectors: Sequence[Sequence[Fraction]]) -> int | None:
    """Index in O_K of the order generated by the given eigenvalues (degree <= 2 only).

    For degree 2, O_K = Z + Z*omega with omega = (theta + t)/i, i the index of
    Z[theta]; the omega-coordinate of c0 + c1*theta is c1*i.  Returns None for
    degree > 2, where the check is not implemented.
    """
    if field.d == 1:
        return 1
    if field.d > 2:
        return None
    i = field.index
    g = 0
    for v in vectors:
        w = v[1] * i
        if w.denominator != 1:
            raise FieldDataError(f"eigenvalue {v} is not integral in the maximal order")
        g = math.gcd(g, w.numerator)
    return g
