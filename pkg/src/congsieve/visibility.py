"""Filters turning congruent pairs into candidates for visible Sha.

A pair of newforms f (target, abelian variety A) and g (source, B) congruent
modulo unramified primes P | Q above p survives when

1. p divides neither level (good reduction),
2. rank(f) = 0 and rank(g) >= 1,
3. Q is principal, so that the image of the congruence in B is again B,
4. the Tamagawa numbers of A and B are prime to p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from sympy.ntheory.factor_ import core

from .formstore import NewformRecord, PrincipalityFlag, TamagawaRecord
from .prover import CertifiedPair
from .quadratic import QuadIdeal, is_principal_quadratic, order_denominator
from .sieve import handle_for
from .splitting import IndexDividedError, PrimeIdealHandle

GOOD_REDUCTION = "GoodReduction"
RANK = "RankDiscrepancy"
PRINCIPAL = "PrincipalIdeal"
TAMAGAWA = "Tamagawa"
CERTIFICATION = "Certification"
FILTERS = (GOOD_REDUCTION, RANK, PRINCIPAL, TAMAGAWA)

PROVED, NEEDS_DATA, FAILS = "Proved", "NeedsData", "Fails"


def filter_good_reduction(N: int, M: int, p: int) -> bool:
    return N % p != 0 and M % p != 0


def filter_rank(f: NewformRecord, g: NewformRecord) -> bool:
    if f.analytic_rank is None or g.analytic_rank is None:
        raise ValueError(f"analytic rank missing for {f.label} or {g.label}")
    return f.analytic_rank == 0 and g.analytic_rank >= 1


def filter_tamagawa(label_a: str, label_b: str, table: Mapping[str, TamagawaRecord], p: int) -> str:
    rows = [table.get(label_a), table.get(label_b)]
    if any(r is not None and r.c_bound is not None and math.gcd(r.c_bound, p) > 1 and r.exact for r in rows):
        return FAILS
    if all(r is not None and r.c_bound is not None and math.gcd(r.c_bound, p) == 1 for r in rows):
        return PROVED
    return NEEDS_DATA


def quadratic_ideal(h: PrimeIdealHandle) -> QuadIdeal:
    """The degree-one prime h of a quadratic coefficient field, as an ideal of Q(sqrt(m))."""
    c, b, _ = h.field.defining_poly
    delta = b * b - 4 * c
    m = int(core(delta))
    t = math.isqrt(delta // m)
    s = order_denominator(m)
    q = h.p
    if (s * t) % q == 0:
        raise IndexDividedError(f"{q} divides the index of Z[theta]")
    # omega = (s - 1)/s + (2 theta + b) / (s t)
    r = h.theta_image.coeffs[0]
    rho = Fraction((s - 1) * t + 2 * r + b, s * t)
    rho_mod = rho.numerator * pow(rho.denominator, -1, q) % q
    return QuadIdeal(m, q, rho_mod)


def principality(g: NewformRecord, h: PrimeIdealHandle,
                 flags: Mapping[tuple[str, int, int], PrincipalityFlag]) -> tuple[bool | None, str]:
    """(principal?, note); None when the answer needs side-table data."""
    if g.field.d == 1 or h.f == g.field.d:
        return True, f"({h.p})"
    if g.field.d == 2:
        ideal = quadratic_ideal(h)
        res = is_principal_quadratic(ideal)
        if res is None:
            return False, f"Q(sqrt({ideal.m})): no generator of norm {h.p}"
        a, b = res.witness
        s = order_denominator(ideal.m)
        gen = f"({a}{b:+d}*sqrt({ideal.m}))" + (f"/{s}" if s > 1 else "")
        return True, gen
    flag = flags.get((g.label, h.p, h.index))
    if flag is None or flag.principal is None:
        return None, "no principality data"
    return flag.principal, "side table"


@dataclass(frozen=True)
class VisibilityVerdict:
    p: int
    label_a: str
    label_b: str
    passed: tuple[str, ...]
    status: str  # "Complete" or "Blocked"
    blocked_at: str | None = None
    reason: str | None = None
    row: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def complete(self) -> bool:
        return self.status == "Complete"

    def line(self) -> str:
        out = f"{self.p} | {self.label_a} | {self.label_b} | {self.status}"
        if self.blocked_at is not None:
            out += f" | {self.blocked_at}:{self.reason}"
        return out


def field_name(f: NewformRecord) -> str:
    d = f.field.d
    if d == 1:
        return "Q"
    if d == 2:
        c, b, _ = f.field.defining_poly
        return f"Q(sqrt({int(core(b * b - 4 * c))}))"
    terms = []
    for i, c in reversed(list(enumerate(f.field.defining_poly))):
        if c:
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            coef = str(c) if (i == 0 or abs(c) != 1) else ("-" if c < 0 else "")
            terms.append(f"{coef}{mono}")
    return "Q[x]/(" + "+".join(terms).replace("+-", "-") + ")"


def _bound(table: Mapping[str, TamagawaRecord], label: str) -> str:
    r = table.get(label)
    return "?" if r is None or r.c_bound is None else str(r.c_bound)


def evaluate_pair(pair: CertifiedPair, forms: Mapping[str, NewformRecord],
                  tamagawa: Mapping[str, TamagawaRecord],
                  flags: Mapping[tuple[str, int, int], PrincipalityFlag]) -> VisibilityVerdict:
    p = pair.p
    f, g = forms[pair.label_f], forms[pair.label_g]
    hf, hg = pair.handle_f, pair.handle_g

    def blocked(a, b, passed, where, why):
        return VisibilityVerdict(p, a, b, tuple(passed), "Blocked", where, why)

    if pair.verdict == "Refuted":
        return blocked(f.label, g.label, [], CERTIFICATION, "Refuted")
    if not filter_good_reduction(f.level, g.level, p):
        return blocked(f.label, g.label, [], GOOD_REDUCTION, f"{p} divides a level")
    passed = [GOOD_REDUCTION]
    if filter_rank(f, g):
        A, B, hB = f, g, hg
    elif filter_rank(g, f):
        A, B, hB = g, f, hf
    else:
        return blocked(f.label, g.label, passed, RANK, f"ranks {f.analytic_rank}, {g.analytic_rank}")
    passed.append(RANK)
    handle = handle_for(B, p, hB)
    principal, note = principality(B, handle, flags)
    if principal is None:
        return blocked(A.label, B.label, passed, PRINCIPAL, NEEDS_DATA)
    if not principal:
        return blocked(A.label, B.label, passed, PRINCIPAL, note)
    passed.append(PRINCIPAL)
    row = {
        "p": str(p),
        "A": A.label,
        "B": B.label,
        "K_A": field_name(A),
        "rank_A": str(A.field.d * A.analytic_rank),
        "c_A": _bound(tamagawa, A.label),
        "K_B": field_name(B),
        "rank_B": str(B.field.d * B.analytic_rank),
        "c_B": _bound(tamagawa, B.label),
        "generator": note,
    }
    tam = filter_tamagawa(A.label, B.label, tamagawa, p)
    if tam != PROVED:
        v = blocked(A.label, B.label, passed, TAMAGAWA, tam)
        return VisibilityVerdict(v.p, v.label_a, v.label_b, v.passed, v.status, v.blocked_at, v.reason, row)
    passed.append(TAMAGAWA)
    return VisibilityVerdict(p, A.label, B.label, tuple(passed), "Complete", row=row)


def run_pipeline(pairs: Iterable[CertifiedPair], forms: Mapping[str, NewformRecord],
                 tamagawa: Mapping[str, TamagawaRecord],
                 flags: Mapping[tuple[str, int, int], PrincipalityFlag] | None = None) -> list[VisibilityVerdict]:
    verdicts = [evaluate_pair(pr, forms, tamagawa, flags or {}) for pr in pairs]
    return sorted(verdicts, key=lambda v: (v.p, v.label_a, v.label_b))


COLUMNS = ("p", "A", "B", "K_A", "rank_A", "c_A", "K_B", "rank_B", "c_B")
HEADINGS = ("p", "A", "B", "K_A", "rank(A)", "𝔠(A)", "K_B", "rank(B)", "𝔠(B)")


def render_table(verdicts: Sequence[VisibilityVerdict]) -> str:
    """Complete rows, plus rows held back only by missing Tamagawa data (marked with *)."""
    rows = []
    for v in verdicts:
        if v.complete:
            rows.append(("",) + tuple(v.row[c] for c in COLUMNS))
        elif v.blocked_at == TAMAGAWA and v.reason == NEEDS_DATA:
            rows.append(("*",) + tuple(v.row[c] for c in COLUMNS))
    header = ("",) + HEADINGS
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in [header] + rows]
    return "\n".join(lines) + "\n"


def render_lines(verdicts: Sequence[VisibilityVerdict]) -> str:
    return "".join(v.line() + "\n" for v in verdicts)
