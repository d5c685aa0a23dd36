"""Synthetic newform builders shared by the test modules.

Congruent pairs are produced by reduce-and-lift: pick eigenvalues for f inside
the Weil range, reduce them mod p and lift each residue back to another value
inside the Weil range for g.  Levels are respected: a_l = +-1 at l || N and
a_l = 0 at l^2 | N.
"""

from __future__ import annotations

import math
import random
from fractions import Fraction
from pathlib import Path

import pytest

from congsieve.formstore import NewformRecord
from congsieve.splitting import CoeffField
from congsieve.util import factor, primes_up_to

DATA = Path(__file__).parent / "data"
QQ = CoeffField((0, 1), 1)
SQRT2 = CoeffField((-2, 0, 1), 8)
SQRT5 = CoeffField((-1, -1, 1), 5)  # theta = (1 + sqrt 5) / 2


def weil_range(ell: int) -> range:
    w = math.isqrt(4 * ell)
    return range(-w, w + 1)


def rational(label: str, values: dict[int, int], bound: int = 997, rank: int = 0) -> NewformRecord:
    level = int(label.split(".")[0])
    eig = {ell: (Fraction(values[ell]),) for ell in primes_up_to(bound)}
    return NewformRecord(label, level, QQ, eig, bound, rank)


def quadratic(label: str, field: CoeffField, values: dict[int, tuple[int, int]],
              bound: int = 997, rank: int = 0) -> NewformRecord:
    level = int(label.split(".")[0])
    eig = {ell: tuple(Fraction(c) for c in values[ell]) for ell in primes_up_to(bound)}
    return NewformRecord(label, level, field, eig, bound, rank)


def random_rational_values(rng: random.Random, level: int, bound: int = 997) -> dict[int, int]:
    fac = factor(level)
    out = {}
    for ell in primes_up_to(bound):
        e = fac.get(ell, 0)
        out[ell] = rng.choice(weil_range(ell)) if e == 0 else (rng.choice((1, -1)) if e == 1 else 0)
    return out


class NoLift(ValueError):
    pass


def _lift(rng: random.Random, target: int, p: int, ell: int) -> int:
    choices = [x for x in weil_range(ell) if (x - target) % p == 0]
    if not choices:
        raise NoLift(f"no value = {target} mod {p} in the Weil range at {ell}")
    return rng.choice(choices)


def congruent_rational_pair(rng: random.Random, N: int, M: int, p: int, bound: int = 997,
                            labels: tuple[str, str] | None = None) -> tuple[NewformRecord, NewformRecord]:
    """Rational newforms of levels N, M satisfying both coefficient conditions mod p at every l <= bound."""
    fn, fm = factor(N), factor(M)
    af, ag = {}, {}
    for ell in primes_up_to(bound):
        en, em = fn.get(ell, 0), fm.get(ell, 0)
        if en == 0 and em == 0:
            af[ell] = rng.choice(weil_range(ell))
            ag[ell] = _lift(rng, af[ell], p, ell)
        elif en == 1 and em == 0:
            af[ell] = rng.choice((1, -1))
            ag[ell] = _lift(rng, af[ell] * (ell + 1), p, ell)
        elif en == 0 and em == 1:
            ag[ell] = rng.choice((1, -1))
            af[ell] = _lift(rng, ag[ell] * (ell + 1), p, ell)
        else:
            af[ell] = rng.choice((1, -1)) if en == 1 else (0 if en else rng.choice(weil_range(ell)))
            ag[ell] = rng.choice((1, -1)) if em == 1 else (0 if em else rng.choice(weil_range(ell)))
    la, lb = labels or (f"{N}.2.a.a", f"{M}.2.a.b")
    return rational(la, af, bound), rational(lb, ag, bound)


def conjugate_partner(rng: random.Random, f: NewformRecord, label: str, p: int) -> NewformRecord:
    """A form over x^2 - m whose eigenvalues are conjugates of f's, moved by multiples of p where Weil allows."""
    c, b, _ = f.field.defining_poly
    assert b == 0
    m = -c
    vals = {}
    for ell, (c0, c1) in f.eigenvalues.items():
        base = (int(c0), -int(c1))
        if f.level % ell == 0:
            vals[ell] = base
            continue
        options = [(base[0] + p * i, base[1] + p * j) for i in (-1, 0, 1) for j in (-1, 0, 1)]
        options = [(x, y) for x, y in options if abs(x) + abs(y) * math.sqrt(m) <= 2 * math.sqrt(ell)]
        vals[ell] = rng.choice(options)
    return quadratic(label, f.field, vals, f.coeff_bound)


def random_sqrt2_values(rng: random.Random, level: int, bound: int = 997) -> dict[int, tuple[int, int]]:
    fac = factor(level)
    out = {}
    for ell in primes_up_to(bound):
        if ell in fac:
            out[ell] = (rng.choice((1, -1)), 0) if fac[ell] == 1 else (0, 0)
            continue
        w = 2 * math.sqrt(ell)
        c1 = rng.choice(range(-int(w / math.sqrt(2)), int(w / math.sqrt(2)) + 1))
        room = int(w - abs(c1) * math.sqrt(2))
        out[ell] = (rng.randint(-room, room), c1)
    return out


def level11_values(bound: int = 997) -> dict[int, int]:
    """a_l of the level-11 newform from point counts of y^2 + y = x^3 - x^2 - 10x - 20."""
    out = {}
    for ell in primes_up_to(bound):
        if ell == 11:
            out[ell] = 1
            continue
        hits = [0] * ell
        for y in range(ell):
            hits[(y * y + y) % ell] += 1
        n = 1 + sum(hits[(x**3 - x * x - 10 * x - 20) % ell] for x in range(ell))
        out[ell] = ell + 1 - n
    return out


@pytest.fixture(scope="session")
def level11():
    return rational("11.2.a.a", level11_values())


# criterion number -> passed, filled in by test_acceptance.py
ACCEPTANCE: dict[int, bool] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ACCEPTANCE[n] else 'FAIL'}")
