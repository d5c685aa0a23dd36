"""Exact arithmetic in F_p, F_{p^k} and F_p[x].

Extension fields are quotient rings F_p[x]/(m) where m is the
lexicographically least monic irreducible of degree k (coefficient lists
compared constant term first).  Elements are tuples of k integers in [0, p),
constant term first, always fully reduced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterator, Sequence

from sympy.ntheory import sqrt_mod

from .util import factor, is_prime

MAX_DEGREE = 8
_EXHAUSTIVE_LIMIT = 5000


class FieldError(ValueError):
    pass


# ---------------------------------------------------------------------------
# dense polynomials over F_p as tuples, constant term first, no trailing zeros


def _trim(c: Sequence[int], p: int) -> tuple[int, ...]:
    c = [x % p for x in c]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


def _add(a, b, p):
    n = max(len(a), len(b))
    return _trim([(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)], p)


def _sub(a, b, p):
    n = max(len(a), len(b))
    return _trim([(a[i] if i < len(a) else 0) - (b[i] if i < len(b) else 0) for i in range(n)], p)


def _mul(a, b, p):
    if not a or not b:
        return ()
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return _trim(out, p)


def _divmod(a, b, p):
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = list(a)
    inv = pow(b[-1], -1, p)
    db = len(b) - 1
    q = [0] * max(len(a) - db, 0)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i] * inv % p
        if c:
            q[i - db] = c
            for j in range(db + 1):
                a[i - db + j] = (a[i - db + j] - c * b[j]) % p
    return _trim(q, p), _trim(a[:db], p)


def _mod(a, b, p):
    return _divmod(a, b, p)[1]


def _monic(a, p):
    if not a:
        return a
    inv = pow(a[-1], -1, p)
    return tuple(x * inv % p for x in a)


def _gcd(a, b, p):
    while b:
        a, b = b, _mod(a, b, p)
    return _monic(a, p)


def _invmod(a, m, p):
    """Inverse of a modulo the irreducible m by the extended Euclidean algorithm."""
    r0, r1 = m, _mod(a, m, p)
    s0, s1 = (), (1,)
    while len(r1) > 1:
        q, r = _divmod(r0, r1, p)
        r0, r1 = r1, r
        s0, s1 = s1, _sub(s0, _mul(q, s1, p), p)
    if not r1:
        raise ZeroDivisionError("element is not invertible")
    c = pow(r1[0], -1, p)
    return tuple(x * c % p for x in s1)


def _powmod(a, e, m, p):
    result = (1,)
    a = _mod(a, m, p)
    while e:
        if e & 1:
            result = _mod(_mul(result, a, p), m, p)
        e >>= 1
        if e:
            a = _mod(_mul(a, a, p), m, p)
    return result


def _deriv(a, p):
    return _trim([i * a[i] for i in range(1, len(a))], p)


def _is_irreducible(m: tuple[int, ...], p: int) -> bool:
    # Rabin: x^(p^k) = x mod m and gcd(x^(p^(k/q)) - x, m) = 1 for primes q | k
    k = len(m) - 1
    if k <= 0:
        return False
    if k == 1:
        return True
    x = (0, 1)
    for q in factor(k):
        h = x
        for _ in range(k // q):
            h = _powmod(h, p, m, p)
        if len(_gcd(m, _sub(h, x, p), p)) != 1:
            return False
    h = x
    for _ in range(k):
        h = _powmod(h, p, m, p)
    return _sub(h, x, p) == ()


@dataclass(frozen=True)
class FPoly:
    """Polynomial over F_p; ``coeffs`` constant term first, trimmed."""

    p: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _trim(self.coeffs, self.p))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def monic(self) -> "FPoly":
        return FPoly(self.p, _monic(self.coeffs, self.p))

    def __add__(self, other: "FPoly") -> "FPoly":
        return FPoly(self.p, _add(self.coeffs, other.coeffs, self.p))

    def __sub__(self, other: "FPoly") -> "FPoly":
        return FPoly(self.p, _sub(self.coeffs, other.coeffs, self.p))

    def __mul__(self, other: "FPoly") -> "FPoly":
        return FPoly(self.p, _mul(self.coeffs, other.coeffs, self.p))

    def __divmod__(self, other: "FPoly"):
        q, r = _divmod(self.coeffs, other.coeffs, self.p)
        return FPoly(self.p, q), FPoly(self.p, r)

    def __pow__(self, e: int) -> "FPoly":
        out = FPoly(self.p, (1,))
        for _ in range(e):
            out = out * self
        return out

    def __call__(self, x):
        acc = 0 * x if not isinstance(x, int) else 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc % self.p if isinstance(x, int) else acc

    def is_irreducible(self) -> bool:
        return _is_irreducible(_monic(self.coeffs, self.p), self.p)

    def __repr__(self) -> str:
        terms = [f"{c}*x^{i}" if i else str(c) for i, c in enumerate(self.coeffs) if c]
        return f"FPoly({self.p}: {' + '.join(terms) or '0'})"


# ---------------------------------------------------------------------------
# finite fields


@dataclass(frozen=True)
class FField:
    p: int
    k: int
    modulus: tuple[int, ...]  # monic, length k + 1
    _frob: tuple = field(default=(), compare=False, repr=False)

    @property
    def order(self) -> int:
        return self.p**self.k

    def __call__(self, value) -> "FFElement":
        if isinstance(value, FFElement):
            if value.parent != self:
                raise FieldError("element belongs to a different field")
            return value
        if isinstance(value, int):
            return FFElement(self, (value % self.p,) + (0,) * (self.k - 1))
        c = list(value) + [0] * (self.k - len(value))
        r = _mod(_trim(c, self.p), self.modulus, self.p)
        return FFElement(self, tuple(r) + (0,) * (self.k - len(r)))

    def zero(self) -> "FFElement":
        return self(0)

    def one(self) -> "FFElement":
        return self(1)

    def gen(self) -> "FFElement":
        """Class of x in F_p[x]/(modulus)."""
        return self((0, 1))

    def elements(self) -> Iterator["FFElement"]:
        """All field elements in ascending coefficient-lex order (constant first)."""
        for c in product(range(self.p), repeat=self.k):
            yield FFElement(self, c)

    def frobenius_matrix(self) -> tuple[tuple[int, ...], ...]:
        """Rows are the images x^{ip} of the power basis; frobenius is F_p-linear."""
        if not self._frob:
            g = self.gen()
            rows = tuple((g**i) ** self.p for i in range(self.k))
            object.__setattr__(self, "_frob", tuple(r.coeffs for r in rows))
        return self._frob

    def __repr__(self) -> str:
        return f"FField({self.p}^{self.k}, modulus={self.modulus})"


@dataclass(frozen=True)
class FFElement:
    parent: FField
    coeffs: tuple[int, ...]

    @property
    def p(self) -> int:
        return self.parent.p

    def _coerce(self, other) -> "FFElement":
        if isinstance(other, FFElement):
            if other.parent != self.parent:
                raise FieldError("mixed-field arithmetic")
            return other
        return self.parent(other)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __add__(self, other):
        o = self._coerce(other)
        p = self.p
        return FFElement(self.parent, tuple((a + b) % p for a, b in zip(self.coeffs, o.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        p = self.p
        return FFElement(self.parent, tuple(-a % p for a in self.coeffs))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        o = self._coerce(other)
        if self.parent.k == 1:
            return FFElement(self.parent, (self.coeffs[0] * o.coeffs[0] % self.p,))
        return self.parent(_mul(self.coeffs, o.coeffs, self.p))

    __rmul__ = __mul__

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        result = self.parent.one()
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def inverse(self) -> "FFElement":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero in finite field")
        if self.parent.k == 1:
            return FFElement(self.parent, (pow(self.coeffs[0], -1, self.p),))
        return self.parent(_invmod(_trim(self.coeffs, self.p), self.parent.modulus, self.p))

    def __truediv__(self, other):
        return self * self._coerce(other).inverse()

    def __rtruediv__(self, other):
        return self._coerce(other) * self.inverse()

    def sort_key(self) -> tuple[int, ...]:
        return self.coeffs

    def __lt__(self, other: "FFElement") -> bool:
        return self.coeffs < other.coeffs

    def __repr__(self) -> str:
        if self.parent.k == 1:
            return f"{self.coeffs[0]} (mod {self.p})"
        return f"FFElement{self.coeffs} in F_{self.p}^{self.parent.k}"


@lru_cache(maxsize=None)
def ff_make(p: int, k: int) -> FField:
    """F_{p^k} modulo the lex-least monic irreducible of degree k."""
    if not is_prime(p):
        raise FieldError(f"{p} is not prime")
    if not 1 <= k <= MAX_DEGREE:
        raise FieldError(f"extension degree {k} outside [1, {MAX_DEGREE}]")
    if k == 1:
        return FField(p, 1, (0, 1))
    # product() is lexicographic with c_0 varying slowest; c_0 = 0 leaves the root 0
    for low in product(range(1, p), *[range(p)] * (k - 1)):
        m = low + (1,)
        if k == 2 and p != 2:
            # a quadratic is irreducible iff its discriminant is a non-square
            if pow((m[1] * m[1] - 4 * m[0]) % p, (p - 1) // 2, p) == p - 1:
                return FField(p, k, m)
            continue
        if _is_irreducible(m, p):
            return FField(p, k, m)
    raise AssertionError("no irreducible polynomial found")  # unreachable


def frobenius(a: FFElement) -> FFElement:
    """a -> a^p."""
    F = a.parent
    if F.k == 1:
        return a
    rows = F.frobenius_matrix()
    p = F.p
    out = [0] * F.k
    for c, row in zip(a.coeffs, rows):
        if c:
            for j, r in enumerate(row):
                out[j] += c * r
    return FFElement(F, tuple(x % p for x in out))


def frobenius_power(a: FFElement, j: int) -> FFElement:
    for _ in range(j % a.parent.k):
        a = frobenius(a)
    return a


# ---------------------------------------------------------------------------
# polynomials with coefficients in F_{p^k}: lists of FFElement, constant first


def _ptrim(a):
    a = list(a)
    while a and a[-1].is_zero():
        a.pop()
    return a


def _pmul(a, b, F):
    if not a or not b:
        return []
    out = [F.zero()] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = out[i + j] + x * y
    return _ptrim(out)


def _pdivmod(a, b, F):
    a = list(a)
    inv = b[-1] if b[-1] == F.one() else b[-1].inverse()
    db = len(b) - 1
    q = [F.zero()] * max(len(a) - db, 0)
    for i in range(len(a) - 1, db - 1, -1):
        c = a[i] * inv
        if c:
            q[i - db] = c
            for j in range(db + 1):
                a[i - db + j] = a[i - db + j] - c * b[j]
    return _ptrim(q), _ptrim(a[:db])


def _pmonic(a):
    inv = a[-1].inverse()
    return [x * inv for x in a]


def _pgcd(a, b):
    F = (a or b)[0].parent
    while b:
        a, b = b, _pdivmod(a, b, F)[1]
    return _pmonic(a) if a else a


def _ppowmod(a, e, m, F):
    result = [F.one()]
    a = _pdivmod(a, m, F)[1]
    while e:
        if e & 1:
            result = _pdivmod(_pmul(result, a, F), m, F)[1]
        e >>= 1
        if e:
            a = _pdivmod(_pmul(a, a, F), m, F)[1]
    return result


def _psub(a, b, F):
    n = max(len(a), len(b))
    z = F.zero()
    return _ptrim([(a[i] if i < len(a) else z) - (b[i] if i < len(b) else z) for i in range(n)])


def _shifts(F: FField) -> Iterator[FFElement]:
    """Shifts c for the splitting x + c, the constant coefficient varying fastest.

    Shifts in F_p cannot separate Frobenius-conjugate roots, and a whole line
    F_p * u can consist of squares, so for k > 1 the non-constant part is
    fixed and nonzero while c_0 runs over F_p.
    """
    p, k = F.p, F.k
    if k == 1:
        yield from F.elements()
        return
    for high in product(range(p), repeat=k - 1):
        if not any(high):
            continue
        for c0 in range(p):
            yield FFElement(F, (c0,) + high[::-1])


def _split_linear(g, F) -> list[FFElement]:
    """Roots of a monic product of distinct linear factors over F (odd p)."""
    if len(g) == 1:
        return []
    if len(g) == 2:
        return [-g[0]]
    e = (F.order - 1) // 2
    for c in _shifts(F):
        t = _ppowmod([c, F.one()], e, g, F)
        h = _pgcd(g, _psub(t, [F.one()], F))
        if 1 < len(h) < len(g):
            return _split_linear(h, F) + _split_linear(_pdivmod(g, h, F)[0], F)
    raise AssertionError("failed to split a product of linear factors")  # unreachable


def roots_in(F: FField, coeffs: Sequence) -> list[FFElement]:
    """Distinct roots in F of a nonzero polynomial with coefficients coercible into F, sorted."""
    poly = _ptrim([F(c) for c in coeffs])
    if not poly:
        raise FieldError("zero polynomial has every element as a root")
    if len(poly) == 2:
        return [-poly[0] / poly[1]]
    if len(poly) == 3 and F.p != 2 and all(isinstance(c, int) for c in coeffs):
        return _quadratic_roots(F, poly)
    if F.order <= _EXHAUSTIVE_LIMIT:
        out = []
        for x in F.elements():
            acc = F.zero()
            for c in reversed(poly):
                acc = acc * x + c
            if acc.is_zero():
                out.append(x)
        return out
    poly = _pmonic(poly)
    xq = _ppowmod([F.zero(), F.one()], F.order, poly, F)
    g = _pgcd(poly, _psub(xq, [F.zero(), F.one()], F))
    return sorted(_split_linear(g, F))


def irreducible_roots(F: FField, coeffs: Sequence[int]) -> list[FFElement]:
    """Sorted roots in F of a monic irreducible g over F_p of degree F.k.

    The roots form a single Frobenius orbit, so one root is found by splitting
    along one branch only and the rest are its conjugates.
    """
    g = _trim(coeffs, F.p)
    if len(g) - 1 != F.k or g[-1] != 1:
        raise FieldError("expected a monic polynomial of degree k over F_p")
    if F.k <= 2 or F.p == 2:
        return roots_in(F, g)
    poly = [F(c) for c in g]
    e = (F.order - 1) // 2
    while len(poly) > 2:
        for c in _shifts(F):
            t = _ppowmod([c, F.one()], e, poly, F)
            h = _pgcd(poly, _psub(t, [F.one()], F))
            if 1 < len(h) < len(poly):
                other = _pmonic(_pdivmod(poly, h, F)[0])
                poly = h if len(h) <= len(other) else other
                break
        else:
            raise AssertionError("failed to split a product of linear factors")  # unreachable
    r = -poly[0]
    orbit = [r]
    for _ in range(F.k - 1):
        orbit.append(frobenius(orbit[-1]))
    return sorted(orbit)


def _sqrt_fp(a: int, p: int) -> int | None:
    a %= p
    if a == 0:
        return 0
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    return int(sqrt_mod(a, p))


def _quadratic_roots(F: FField, poly) -> list[FFElement]:
    # poly has F_p coefficients; roots (-b +- sqrt(disc)) / 2a
    p = F.p
    c, b, a = (x.coeffs[0] for x in poly)
    disc = (b * b - 4 * a * c) % p
    inv2a = pow(2 * a, -1, p)
    s = _sqrt_fp(disc, p)
    if s is not None:
        roots = {F((-b + s) * inv2a), F((-b - s) * inv2a)}
        return sorted(roots)
    if F.k % 2:
        return []
    # sqrt(disc) = sqrt(disc / delta) * sqrt(delta) for delta a non-square with known root in F
    delta, root_delta = _nonsquare_with_root(F)
    t = _sqrt_fp(disc * pow(delta, -1, p), p)
    sd = root_delta * t
    return sorted({(sd - b) * inv2a, (-sd - b) * inv2a})


@lru_cache(maxsize=None)
def _nonsquare_with_root(F: FField) -> tuple[int, FFElement]:
    # the subfield F_{p^2} of F: any element z outside F_p with z^2 in F_p.
    p = F.p
    delta = next(n for n in range(2, p) if pow(n, (p - 1) // 2, p) == p - 1)
    if F.k == 2:
        m0, m1 = F.modulus[0], F.modulus[1]
        # (2x + m1)^2 = m1^2 - 4 m0
        z = 2 * F.gen() + m1
        d0 = (m1 * m1 - 4 * m0) % p
        t = _sqrt_fp(delta * pow(d0, -1, p), p)
        return delta, z * t
    return delta, _split_linear(_pmonic([F(-delta), F.zero(), F.one()]), F)[0]


def embed(a: FFElement, target: FField) -> FFElement:
    """Canonical embedding F_{p^m} -> F_{p^n}: the source generator maps to the least root of its modulus."""
    src = a.parent
    if src.p != target.p:
        raise FieldError("characteristic mismatch")
    if target.k % src.k:
        raise FieldError(f"F_{src.p}^{src.k} does not embed in F_{target.p}^{target.k}")
    if src.k == 1:
        return target(a.coeffs[0])
    image = _generator_image(src, target)
    acc = target.zero()
    for c in reversed(a.coeffs):
        acc = acc * image + c
    return acc


@lru_cache(maxsize=None)
def _generator_image(src: FField, target: FField) -> FFElement:
    return roots_in(target, src.modulus)[0]


def poly_factor(f: FPoly) -> list[tuple[FPoly, int]]:
    """Monic irreducible factors with multiplicities, sorted by (degree, coeffs)."""
    if f.is_zero():
        raise FieldError("cannot factor the zero polynomial")
    if f.degree > MAX_DEGREE:
        raise FieldError(f"degree {f.degree} exceeds {MAX_DEGREE}")
    p = f.p
    out: list[tuple[tuple[int, ...], int]] = []
    for g, mult in _squarefree(_monic(f.coeffs, p), p):
        for h in _distinct_degree_split(g, p):
            out.append((h, mult))
    out.sort(key=lambda t: (len(t[0]), t[0][::-1], t[1]))
    return [(FPoly(p, g), m) for g, m in out]


def _squarefree(f, p):
    if len(f) <= 1:
        return []
    res = []
    c = _gcd(f, _deriv(f, p), p)
    w = _divmod(f, c, p)[0]
    i = 1
    while len(w) > 1:
        y = _gcd(w, c, p)
        fac = _divmod(w, y, p)[0]
        if len(fac) > 1:
            res.append((_monic(fac, p), i))
        w = y
        c = _divmod(c, y, p)[0]
        i += 1
    if len(c) > 1:
        root = tuple(c[i] for i in range(0, len(c), p))
        res.extend((g, e * p) for g, e in _squarefree(root, p))
    return res


def _distinct_degree_split(f, p):
    """Irreducible factors of a squarefree monic f."""
    factors = []
    x = (0, 1)
    h = x
    d = 0
    while len(f) - 1 >= 2 * (d + 1):
        d += 1
        h = _powmod(h, p, f, p)
        g = _gcd(f, _sub(h, x, p), p)
        if len(g) > 1:
            factors.extend(_equal_degree_split(g, d, p))
            f = _divmod(f, g, p)[0]
            h = _mod(h, f, p)
    if len(f) > 1:
        factors.append(f)
    return factors


def _equal_degree_split(g, d, p):
    """Split a product of distinct monic irreducibles of degree d over F_p."""
    if len(g) - 1 == d:
        return [g]
    if p == 2:
        return _equal_degree_split_by_roots(g, d, p)
    # Cantor-Zassenhaus with the splitting polynomials taken in a fixed order:
    # x + c, then x^2 + b x + c, ...  Some residue mod g separates any two
    # factors, and every residue class occurs, so the search terminates.
    e = (p**d - 1) // 2
    n = len(g) - 1
    for a in _splitting_polys(p, n):
        h = _gcd(g, _sub(_powmod(a, e, g, p), (1,), p), p)
        if 1 < len(h) < len(g):
            rest = _divmod(g, h, p)[0]
            return _equal_degree_split(h, d, p) + _equal_degree_split(_monic(rest, p), d, p)
    raise AssertionError("equal-degree splitting failed")  # unreachable


def _splitting_polys(p, n):
    for deg in range(1, n):
        for low in product(range(p), repeat=deg):
            yield low + (1,)


def _equal_degree_split_by_roots(g, d, p):
    # each root r in F_{p^d} gives the irreducible factor prod (x - r^{p^i})
    F = ff_make(p, d)
    factors = []
    remaining = g
    while len(remaining) - 1 > 0:
        r = roots_in(F, remaining)[0]
        minpoly = [F.one()]
        conj = r
        for _ in range(d):
            minpoly = _pmul(minpoly, [-conj, F.one()], F)
            conj = frobenius(conj)
        h = tuple(c.coeffs[0] for c in minpoly)
        factors.append(h)
        remaining = _divmod(remaining, h, p)[0]
    return factors
