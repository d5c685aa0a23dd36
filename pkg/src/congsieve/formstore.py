"""Newform datasets and the curve / Tamagawa / principality side tables.

Dataset files are line oriented UTF-8::

    congsieve-dataset v1
    label | N | d | poly | field_disc | analytic_rank | coeff_bound | 2:c0/e0,c1/e1 ; 3:... ;

Polynomial coefficients and eigenvalue coordinates are constant term first;
eigenvalue coordinates are in the power basis 1, theta, ..., theta^(d-1).
A file with any invalid record is rejected as a whole.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable

import sympy

from .splitting import CoeffField, EigVector, FieldDataError, hecke_order_index
from .util import factor, primes_up_to

log = logging.getLogger(__name__)

HEADER = "congsieve-dataset v1"
MIN_COEFF_BOUND = 997
_X = sympy.Symbol("x")
_LABEL = re.compile(r"^(\d+)\.(\d+)\.([a-z]+)\.([a-z]+)$")


class DatasetError(ValueError):
    """Raised with every diagnostic collected while reading a file."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(diagnostics))


class SchemaError(ValueError):
    pass


class InvariantError(ValueError):
    pass


@dataclass(frozen=True)
class NewformRecord:
    label: str
    level: int
    field: CoeffField
    eigenvalues: dict[int, EigVector]
    coeff_bound: int
    analytic_rank: int

    @property
    def d(self) -> int:
        return self.field.d

    def a(self, ell: int) -> EigVector:
        try:
            return self.eigenvalues[ell]
        except KeyError:
            raise KeyError(f"{self.label}: no eigenvalue stored for l = {ell}") from None

    @cached_property
    def hecke_index(self) -> int | None:
        """Index of the eigenvalue order in O_K (None when unchecked, degree > 2)."""
        return hecke_order_index(self.field, list(self.eigenvalues.values()))

    def available_at(self, p: int) -> bool:
        """False when the eigenvalues may not generate O_K locally at p."""
        idx = self.hecke_index
        return idx is None or idx % p != 0

    def __hash__(self) -> int:
        return hash(self.label)

    def __eq__(self, other) -> bool:
        if not isinstance(other, NewformRecord):
            return NotImplemented
        return (
            self.label == other.label
            and self.level == other.level
            and self.field == other.field
            and self.coeff_bound == other.coeff_bound
            and self.analytic_rank == other.analytic_rank
            and self.eigenvalues == other.eigenvalues
        )


def parse_label(label: str) -> tuple[int, int, str, str]:
    m = _LABEL.match(label)
    if not m:
        raise SchemaError(f"malformed label {label!r}")
    level, weight, char, orbit = m.groups()
    if int(weight) != 2:
        raise SchemaError(f"label {label!r}: weight {weight} is not 2")
    if char != "a":
        raise SchemaError(f"label {label!r}: character {char!r} is not trivial")
    return int(level), 2, char, orbit


def quadratic_trace_norm(field: CoeffField, v: EigVector) -> tuple[Fraction, Fraction]:
    """Trace and norm of c0 + c1*theta for theta a root of x^2 + b x + c."""
    c, b, _ = field.defining_poly
    c0, c1 = v
    return 2 * c0 - b * c1, c0 * c0 - b * c0 * c1 + c * c1 * c1


def trace_norm(field: CoeffField, v: EigVector) -> tuple[Fraction, Fraction]:
    """Trace and norm from K to Q of the element with power-basis coordinates v."""
    if field.d == 1:
        return v[0], v[0]
    if field.d == 2:
        return quadratic_trace_norm(field, v)
    # multiplication-by-alpha matrix in the power basis
    d = field.d
    poly = field.defining_poly
    comp = [[Fraction(0)] * d for _ in range(d)]
    for i in range(1, d):
        comp[i][i - 1] = Fraction(1)
    for i in range(d):
        comp[i][d - 1] = Fraction(-poly[i])
    mat = [[Fraction(int(i == j)) * v[0] for j in range(d)] for i in range(d)]
    power = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    for k in range(1, d):
        power = _matmul(comp, power)
        mat = [[mat[i][j] + v[k] * power[i][j] for j in range(d)] for i in range(d)]
    return sum(mat[i][i] for i in range(d)), _det(mat)


def _matmul(a, b):
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _det(m):
    m = [row[:] for row in m]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            for k in range(c, n):
                m[r][k] -= f * m[c][k]
    return det


_weil_warned: set[str] = set()


def validate_record(rec: NewformRecord) -> None:
    """Raise SchemaError / InvariantError for a structurally or arithmetically bad record."""
    level, _, _, _ = parse_label(rec.label)
    if level != rec.level:
        raise SchemaError(f"{rec.label}: level field {rec.level} disagrees with label")
    if rec.level < 1:
        raise SchemaError(f"{rec.label}: level must be positive")
    if rec.coeff_bound < MIN_COEFF_BOUND:
        raise SchemaError(f"{rec.label}: coeff_bound {rec.coeff_bound} < {MIN_COEFF_BOUND}")
    if rec.analytic_rank < 0:
        raise SchemaError(f"{rec.label}: negative analytic rank")
    d = rec.d
    missing = [ell for ell in primes_up_to(rec.coeff_bound) if ell not in rec.eigenvalues]
    if missing:
        raise InvariantError(f"{rec.label}: eigenvalues missing for l in {missing[:5]}...")
    for ell, v in rec.eigenvalues.items():
        if len(v) != d:
            raise SchemaError(f"{rec.label}: a_{ell} has {len(v)} coordinates, expected {d}")
    fac = factor(rec.level)
    for ell, e in fac.items():
        if e == 1 and ell in rec.eigenvalues:
            v = rec.eigenvalues[ell]
            if v[0] not in (1, -1) or any(v[1:]):
                raise InvariantError(f"{rec.label}: a_{ell} must be +-1 since {ell} || N (got {v})")
    if d > 2:
        if rec.label not in _weil_warned:
            _weil_warned.add(rec.label)
            log.warning("%s: Weil bound not checked for degree %d", rec.label, d)
        return
    integral = d == 1 or rec.field.defining_poly[-1] == 1
    for ell, v in rec.eigenvalues.items():
        if ell in fac:
            continue
        if integral and all(c.denominator == 1 for c in v):
            # integer coordinates against a monic polynomial: plain int arithmetic
            w = [int(c) for c in v]
            if d == 1:
                if w[0] * w[0] > 4 * ell:
                    raise InvariantError(f"{rec.label}: |a_{ell}| = {abs(w[0])} violates the Weil bound")
                continue
            c, b, _ = rec.field.defining_poly
            t, n = 2 * w[0] - b * w[1], w[0] * w[0] - b * w[0] * w[1] + c * w[1] * w[1]
        else:
            t, n = trace_norm(rec.field, v)
            if t.denominator != 1 or n.denominator != 1:
                raise InvariantError(f"{rec.label}: a_{ell} = {v} is not an algebraic integer")
            t, n = int(t), int(n)
        if d == 1:
            if t * t > 4 * ell:
                raise InvariantError(f"{rec.label}: |a_{ell}| = {abs(t)} violates the Weil bound")
        elif not (t * t <= 16 * ell and 4 * ell + n >= 0 and (4 * ell + n) ** 2 >= 4 * ell * t * t and t * t >= 4 * n):
            raise InvariantError(f"{rec.label}: a_{ell} (trace {t}, norm {n}) violates the Weil bound")


# ---------------------------------------------------------------------------
# serialisation


def _fmt_frac(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


def format_record(rec: NewformRecord) -> str:
    eig = " ; ".join(
        f"{ell}:" + ",".join(_fmt_frac(c) for c in rec.eigenvalues[ell]) for ell in sorted(rec.eigenvalues)
    )
    return " | ".join(
        [
            rec.label,
            str(rec.level),
            str(rec.d),
            ",".join(str(c) for c in rec.field.defining_poly),
            str(rec.field.disc),
            str(rec.analytic_rank),
            str(rec.coeff_bound),
            eig + " ;",
        ]
    )


def _int(tok: str, name: str) -> int:
    try:
        return int(tok.strip())
    except ValueError:
        raise SchemaError(f"field {name!r}: {tok.strip()!r} is not an integer") from None


def _frac(tok: str) -> Fraction:
    num, _, den = tok.strip().partition("/")
    if den == "1" or not den:
        return Fraction(int(num))
    den_i = int(den) if den else 1
    if den_i <= 0:
        raise SchemaError(f"denominator must be positive in {tok!r}")
    c = Fraction(int(num), den_i)
    if den and (c.numerator != int(num) or c.denominator != den_i):
        raise SchemaError(f"fraction {tok!r} is not reduced")
    return c


def parse_record(line: str) -> NewformRecord:
    parts = line.split("|")
    if len(parts) != 8:
        raise SchemaError(f"expected 8 '|'-separated fields, found {len(parts)}")
    label = parts[0].strip()
    parse_label(label)
    level = _int(parts[1], "N")
    d = _int(parts[2], "d")
    try:
        poly = tuple(int(c) for c in parts[3].split(","))
    except ValueError:
        raise SchemaError(f"field 'defining_poly_coeffs': cannot parse {parts[3].strip()!r}") from None
    disc = _int(parts[4], "field_disc")
    rank = _int(parts[5], "analytic_rank")
    bound = _int(parts[6], "coeff_bound")
    try:
        field = CoeffField(poly, disc)
    except FieldDataError as exc:
        raise InvariantError(f"{label}: {exc}") from None
    if field.d != d:
        raise SchemaError(f"{label}: d = {d} but defining polynomial has degree {field.d}")
    eig: dict[int, EigVector] = {}
    for entry in parts[7].split(";"):
        entry = entry.strip()
        if not entry:
            continue
        ell_s, sep, coords = entry.partition(":")
        if not sep:
            raise SchemaError(f"{label}: malformed eigenvalue entry {entry!r}")
        ell = _int(ell_s, "eigenvalue prime")
        if ell in eig:
            raise SchemaError(f"{label}: duplicate eigenvalue for l = {ell}")
        try:
            eig[ell] = tuple(_frac(c) for c in coords.split(","))
        except ValueError as exc:
            raise SchemaError(f"{label}: a_{ell}: {exc}") from None
    rec = NewformRecord(label, level, field, eig, bound, rank)
    validate_record(rec)
    return rec


def parse_dataset(path) -> list[NewformRecord]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    diagnostics = []
    if not lines or lines[0].strip() != HEADER:
        raise DatasetError([f"{path}:1: missing header line {HEADER!r}"])
    records = []
    seen = set()
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            rec = parse_record(line)
        except (SchemaError, InvariantError) as exc:
            kind = "schema" if isinstance(exc, SchemaError) else "invariant"
            diagnostics.append(f"{path}:{lineno}: {kind} error: {exc}")
            continue
        if rec.label in seen:
            diagnostics.append(f"{path}:{lineno}: schema error: duplicate label {rec.label}")
            continue
        seen.add(rec.label)
        records.append(rec)
    if diagnostics:
        raise DatasetError(diagnostics)
    for rec in records:
        idx = rec.hecke_index
        if idx is not None and idx != 1:
            log.warning("%s: eigenvalues generate an order of index %d in O_K; primes dividing it are skipped",
                        rec.label, idx)
    return records


def save_dataset(records: Iterable[NewformRecord], path) -> None:
    body = [format_record(r) for r in sorted(records, key=lambda r: r.label)]
    Path(path).write_text("\n".join([HEADER, *body]) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# side tables


@dataclass(frozen=True)
class TamagawaRecord:
    label: str
    c_bound: int | None  # None means UNKNOWN
    notes: str = ""

    @property
    def exact(self) -> bool:
        """The notes flag the bound as the exact Tamagawa product."""
        return "exact" in self.notes.lower().split()


@dataclass(frozen=True)
class CurveRecord:
    label: str
    f_coeffs: tuple[int, ...]
    h_coeffs: tuple[int, ...] = ()

    def __post_init__(self):
        f = _trim_int(self.f_coeffs)
        h = _trim_int(self.h_coeffs)
        object.__setattr__(self, "f_coeffs", f)
        object.__setattr__(self, "h_coeffs", h)
        if len(h) - 1 > 3:
            raise InvariantError(f"{self.label}: h must have degree <= 3")
        if len(self.rhs) - 1 not in (5, 6):
            raise InvariantError(f"{self.label}: 4f + h^2 must have degree 5 or 6")
        if self.discriminant == 0:
            raise InvariantError(f"{self.label}: curve is singular (disc(4f + h^2) = 0)")

    @property
    def rhs(self) -> tuple[int, ...]:
        """Coefficients of 4f + h^2, the model after completing the square."""
        n = max(len(self.f_coeffs), 2 * len(self.h_coeffs) - 1)
        out = [0] * n
        for i, c in enumerate(self.f_coeffs):
            out[i] += 4 * c
        for i, a in enumerate(self.h_coeffs):
            for j, b in enumerate(self.h_coeffs):
                out[i + j] += a * b
        return _trim_int(out)

    @cached_property
    def discriminant(self) -> int:
        """Discriminant of the polynomial 4f + h^2."""
        return self.poly_discriminant(self.rhs)

    @staticmethod
    def poly_discriminant(coeffs: tuple[int, ...]) -> int:
        return int(sympy.discriminant(sympy.Poly(list(reversed(coeffs)), _X)))


def _trim_int(c) -> tuple[int, ...]:
    c = [int(x) for x in c]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True)
class PrincipalityFlag:
    label: str
    p: int
    handle: int
    principal: bool | None


def _side_lines(path):
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if line.strip() and not line.lstrip().startswith("#"):
            yield lineno, [t.strip() for t in line.split("|")]


def _int_list(tok: str) -> tuple[int, ...]:
    tok = tok.strip()
    if not tok:
        return ()
    return tuple(int(c) for c in tok.split(","))


def load_tamagawa(path) -> dict[str, TamagawaRecord]:
    out, diagnostics = {}, []
    for lineno, parts in _side_lines(path):
        try:
            if len(parts) != 3:
                raise SchemaError(f"expected 3 fields, found {len(parts)}")
            label, bound, notes = parts
            if bound.upper() == "UNKNOWN":
                c = None
            else:
                c = _int(bound, "c_bound")
                if c < 1:
                    raise InvariantError(f"{label}: c_bound must be >= 1")
            out[label] = TamagawaRecord(label, c, notes)
        except (SchemaError, InvariantError) as exc:
            diagnostics.append(f"{path}:{lineno}: {exc}")
    if diagnostics:
        raise DatasetError(diagnostics)
    return out


def save_tamagawa(records: Iterable[TamagawaRecord], path) -> None:
    lines = [
        f"{r.label} | {'UNKNOWN' if r.c_bound is None else r.c_bound} | {r.notes}"
        for r in sorted(records, key=lambda r: r.label)
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_curves(path) -> list[CurveRecord]:
    out, diagnostics = [], []
    for lineno, parts in _side_lines(path):
        try:
            if len(parts) != 3:
                raise SchemaError(f"expected 3 fields, found {len(parts)}")
            out.append(CurveRecord(parts[0], _int_list(parts[1]), _int_list(parts[2])))
        except (SchemaError, InvariantError, ValueError) as exc:
            diagnostics.append(f"{path}:{lineno}: {exc}")
    if diagnostics:
        raise DatasetError(diagnostics)
    return out


def load_principality(path) -> dict[tuple[str, int, int], PrincipalityFlag]:
    """``label | p | handle | PRINCIPAL|NONPRINCIPAL|UNKNOWN`` for fields of degree > 2."""
    out, diagnostics = {}, []
    values = {"PRINCIPAL": True, "NONPRINCIPAL": False, "UNKNOWN": None}
    for lineno, parts in _side_lines(path):
        try:
            if len(parts) != 4 or parts[3].upper() not in values:
                raise SchemaError("expected 'label | p | handle | PRINCIPAL|NONPRINCIPAL|UNKNOWN'")
            flag = PrincipalityFlag(parts[0], _int(parts[1], "p"), _int(parts[2], "handle"),
                                    values[parts[3].upper()])
            out[(flag.label, flag.p, flag.handle)] = flag
        except SchemaError as exc:
            diagnostics.append(f"{path}:{lineno}: {exc}")
    if diagnostics:
        raise DatasetError(diagnostics)
    return out


def index_by_label(records: Iterable[NewformRecord]) -> dict[str, NewformRecord]:
    return {r.label: r for r in records}

