"""Point counts of genus-2 curves y^2 + h(x) y = f(x) over F_l and F_{l^2}.

For odd l the model is equivalent to y^2 = r(x) with r = 4f + h^2.  If the
Jacobian has real multiplication by the coefficient field K of a newform f,
then for good l

    Tr_{K/Q}(a_l) = l + 1 - n1,
    Nm_{K/Q}(a_l) = (n1^2 + n2) / 2 - (l + 1) n1 - l,

with n1 = #C(F_l) and n2 = #C(F_{l^2}).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .formstore import CurveRecord, NewformRecord, trace_norm as form_trace_norm
from .gfpoly import ff_make
from .util import is_prime

MAX_FIELD_SIZE = 10**6


class CurveError(ValueError):
    pass


@dataclass(frozen=True)
class PointCount:
    ell: int
    n1: int
    n2: int

    def line(self, label: str) -> str:
        tr, nm = trace_norm(self.n1, self.n2, self.ell)
        return f"{label} | {self.ell} | {self.n1} | {self.n2} | {tr} | {nm}"


def binary_discriminant(r: Sequence[int]) -> int:
    """Discriminant of r as a binary sextic; for degree 5 this is lead^2 * disc(r)."""
    d = len(r) - 1
    disc = CurveRecord.poly_discriminant(tuple(r))
    if d == 6:
        return disc
    if d == 5:
        return r[-1] ** 2 * disc
    raise CurveError("model must have degree 5 or 6")


def has_good_reduction(curve: CurveRecord, ell: int) -> bool:
    return ell % 2 == 1 and binary_discriminant(curve.rhs) % ell != 0


def _square_table(ell: int) -> np.ndarray:
    """chi[v] = 1 + (v / ell): the number of square roots of v in F_ell."""
    chi = np.zeros(ell, dtype=np.int64)
    sq = (np.arange(ell, dtype=np.int64) ** 2) % ell
    chi[sq] = 2
    chi[0] = 1
    return chi


def count_points(curve: CurveRecord, ell: int, ext: int = 1) -> int:
    """#C(F_{ell^ext}) on the smooth projective model, ext in {1, 2}."""
    if ell == 2:
        raise CurveError("characteristic 2 is not supported")
    if not is_prime(ell):
        raise CurveError(f"{ell} is not prime")
    if ext not in (1, 2):
        raise CurveError("ext must be 1 or 2")
    if ell**ext > MAX_FIELD_SIZE:
        raise CurveError(f"field of size {ell}^{ext} exceeds {MAX_FIELD_SIZE}")
    if not has_good_reduction(curve, ell):
        raise CurveError(f"{curve.label}: bad reduction at {ell}")
    r = [c % ell for c in curve.rhs]
    while r[-1] == 0:
        r.pop()
    chi = _square_table(ell)
    if ext == 1:
        xs = np.arange(ell, dtype=np.int64)
        v = np.zeros(ell, dtype=np.int64)
        for c in reversed(r):
            v = (v * xs + c) % ell
        affine = int(chi[v].sum())
        lead_is_square = chi[r[-1]] == 2
    else:
        # F_{ell^2} = F_ell[t]/(t^2 + m1 t + m0); v = a + b t
        m0, m1, _ = ff_make(ell, 2).modulus
        a = np.repeat(np.arange(ell, dtype=np.int64), ell)
        b = np.tile(np.arange(ell, dtype=np.int64), ell)
        va = np.zeros_like(a)
        vb = np.zeros_like(b)
        for c in reversed(r):
            # (va + vb t)(a + b t) with t^2 = -m1 t - m0
            bb = vb * b % ell
            va, vb = (va * a - m0 * bb + c) % ell, (va * b + vb * a - m1 * bb) % ell
        # v is a square in F_{ell^2} iff its norm is a square in F_ell
        norm = (va * va - m1 * va % ell * vb + m0 * vb % ell * vb) % ell
        sq = chi[norm] == 2
        affine = int(np.where((va == 0) & (vb == 0), 1, np.where(sq, 2, 0)).sum())
        lead_is_square = True  # every element of F_ell is a square in F_{ell^2}
    if len(r) - 1 == 5:
        infinity = 1
    else:
        infinity = 2 if lead_is_square else 0
    n = affine + infinity
    q = ell**ext
    if (n - (q + 1)) ** 2 > 16 * q:
        raise AssertionError(f"{curve.label}: count {n} over F_{ell}^{ext} violates the Weil bound")
    return n


def point_count(curve: CurveRecord, ell: int) -> PointCount:
    return PointCount(ell, count_points(curve, ell, 1), count_points(curve, ell, 2))


def trace_norm(n1: int, n2: int, ell: int) -> tuple[int, int]:
    if (n1 * n1 + n2) % 2:
        raise AssertionError(f"n1^2 + n2 is odd for n1={n1}, n2={n2}: miscounted points")
    return ell + 1 - n1, (n1 * n1 + n2) // 2 - (ell + 1) * n1 - ell


@dataclass(frozen=True)
class Ambiguous:
    labels: tuple[str, ...]


@dataclass(frozen=True)
class NoMatch:
    pass


def match_form(curve: CurveRecord, candidates: Sequence[NewformRecord], primes: Sequence[int]) -> str | Ambiguous | NoMatch:
    """The unique candidate whose (Tr a_l, Nm a_l) agree with the point counts at every listed prime."""
    if not primes:
        raise CurveError("no probe primes given")
    for f in candidates:
        if f.field.d != 2:
            raise CurveError(f"{f.label}: coefficient field must be quadratic")
    targets = {}
    for ell in primes:
        if any(f.level % ell == 0 for f in candidates):
            raise CurveError(f"{ell} divides a candidate level")
        targets[ell] = trace_norm(*_counts(curve, ell), ell)
    survivors = []
    for f in sorted(candidates, key=lambda r: r.label):
        ok = True
        for ell, (tr, nm) in targets.items():
            t, n = form_trace_norm(f.field, f.a(ell))
            if (t, n) != (Fraction(tr), Fraction(nm)):
                ok = False
                break
        if ok:
            survivors.append(f.label)
    if len(survivors) == 1:
        return survivors[0]
    if not survivors:
        return NoMatch()
    return Ambiguous(tuple(survivors))


def _counts(curve: CurveRecord, ell: int) -> tuple[int, int]:
    return count_points(curve, ell, 1), count_points(curve, ell, 2)

