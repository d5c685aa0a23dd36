"""Finite certification of congruences between weight-2 newforms.

For newforms f, g of levels N, M with trivial character and unramified primes
P, Q above p, the mod-P and mod-Q Galois representations have isomorphic
semisimplifications as soon as, under some identification of the residue
fields,

    a_l(f) = a_l(g)             for every prime l <= B with l not dividing NM,
    a_l(f) a_l(g) = l + 1       for every prime l <= B with v_l(NM) = 1,

where B = floor(mu(eta) / 6), eta = lcm(N, M) * prod(S), S the primes dividing
N and M exactly once at which the Atkin-Lehner signs a_l(f), a_l(g) differ, and
mu(n) = [SL_2(Z) : Gamma_0(n)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .formstore import NewformRecord
from .gfpoly import FFElement, frobenius_power, roots_in
from .sieve import CongruenceCandidate, handle_for
from .splitting import PrimeIdealHandle, reduce_eigenvalue
from .util import factor, primes_up_to, valuation


class CertifyError(ValueError):
    pass


def mu(eta: int) -> int:
    """Index of Gamma_0(eta) in SL_2(Z): eta * prod_{p | eta} (1 + 1/p)."""
    if eta < 1:
        raise ValueError("eta must be positive")
    out = eta
    for q in factor(eta):
        out = out // q * (q + 1)
    return out


def compute_S_eta(f: NewformRecord, g: NewformRecord) -> tuple[tuple[int, ...], int]:
    N, M = f.level, g.level
    S = []
    for ell in sorted(factor(math.gcd(N, M))):
        if valuation(N, ell) == 1 and valuation(M, ell) == 1:
            if ell not in f.eigenvalues or ell not in g.eigenvalues:
                raise CertifyError(f"missing a_{ell} for {f.label} or {g.label}")
            # both are Atkin-Lehner signs +-1, compared as rational integers
            if f.a(ell) != g.a(ell):
                S.append(ell)
    eta = math.lcm(N, M) * math.prod(S)
    return tuple(S), eta


def sturm_bound(eta: int) -> int:
    return mu(eta) // 6


@dataclass(frozen=True)
class Proved:
    def __str__(self) -> str:
        return "Proved"


@dataclass(frozen=True)
class Refuted:
    ell: int | None  # None: residue degrees differ, no identification exists
    condition: str  # "3a", "3b" or "degree"

    def __str__(self) -> str:
        return "Refuted"


@dataclass(frozen=True)
class InsufficientData:
    needed: int

    def __str__(self) -> str:
        return "InsufficientData"


Verdict = Proved | Refuted | InsufficientData


@dataclass(frozen=True)
class CongruenceCertificate:
    candidate: CongruenceCandidate
    S: tuple[int, ...]
    eta: int
    sturm_bound: int
    twist: int | None
    checked_good: int
    checked_bad: int
    verdict: Verdict

    def line(self) -> str:
        c = self.candidate
        v = self.verdict
        if isinstance(v, Refuted):
            witness = f"{v.condition}@{v.ell}" if v.ell is not None else v.condition
        elif isinstance(v, InsufficientData):
            witness = f"need {v.needed}"
        else:
            witness = f"3a:{self.checked_good} 3b:{self.checked_bad}"
        return " | ".join(
            [
                str(v),
                str(c.p),
                f"{c.label_f}:{c.handle_f},{c.label_g}:{c.handle_g}",
                ",".join(map(str, self.S)) or "-",
                str(self.eta),
                str(self.sturm_bound),
                "-" if self.twist is None else str(self.twist),
                witness,
            ]
        )


@dataclass(frozen=True)
class CertifiedPair:
    """The fields of a certificate line needed downstream."""

    verdict: str
    p: int
    label_f: str
    handle_f: int
    label_g: str
    handle_g: int
    twist: int | None

    @classmethod
    def from_line(cls, line: str) -> "CertifiedPair":
        parts = [t.strip() for t in line.split("|")]
        if len(parts) != 8:
            raise CertifyError(f"malformed certificate line {line!r}")
        verdict, p, labels, _, _, _, twist, _ = parts
        try:
            (lf, hf), (lg, hg) = (x.rsplit(":", 1) for x in labels.split(","))
            return cls(verdict, int(p), lf, int(hf), lg, int(hg), None if twist == "-" else int(twist))
        except ValueError as exc:
            raise CertifyError(f"malformed certificate line {line!r}") from exc


def _reduce(f: NewformRecord, ell: int, h: PrimeIdealHandle) -> FFElement:
    return reduce_eigenvalue(f.a(ell), h)


def _check_twist(f, hf, g, hg, j, primes_good, primes_bad):
    """First failing (ell, condition) under twist j, or None; conditions checked in order of ell."""
    bad = set(primes_bad)
    for ell in sorted(set(primes_good) | bad):
        x = _reduce(f, ell, hf)
        y = frobenius_power(_reduce(g, ell, hg), j)
        if ell in bad:
            if x * y != hf.residue_field(ell + 1):
                return ell, "3b"
        elif x != y:
            return ell, "3a"
    return None


def certify(
    f: NewformRecord,
    g: NewformRecord,
    handle_f: PrimeIdealHandle,
    handle_g: PrimeIdealHandle,
    candidate: CongruenceCandidate | None = None,
) -> CongruenceCertificate:
    """Check the finite criterion under every Frobenius twist.

    Coefficients are compared up to min(B, available bound).  A twist passing
    all of them gives Proved when B is covered and InsufficientData(B)
    otherwise; when every twist fails, the witness is the least l by which all
    twists have failed.
    """
    if handle_f.p != handle_g.p:
        raise CertifyError("handles lie above different primes")
    if handle_f.e != 1 or handle_g.e != 1:
        raise CertifyError("ramified prime handle")
    if handle_f.field != f.field or handle_g.field != g.field:
        raise CertifyError("handle does not belong to the form's coefficient field")
    p = handle_f.p
    if candidate is None:
        if f.label == g.label:
            raise CertifyError("a form cannot be paired with its own label")
        a, b = sorted([(f.label, handle_f.index), (g.label, handle_g.index)])
        candidate = CongruenceCandidate(p, a[0], b[0], a[1], b[1], 0)
    S, eta = compute_S_eta(f, g)
    B = sturm_bound(eta)
    if handle_f.f != handle_g.f:
        return CongruenceCertificate(candidate, S, eta, B, None, 0, 0, Refuted(None, "degree"))
    N, M = f.level, g.level
    avail = min(f.coeff_bound, g.coeff_bound)
    top = min(B, avail)
    primes = primes_up_to(top)
    good = [ell for ell in primes if (N * M) % ell]
    bad = [ell for ell in primes if valuation(N * M, ell) == 1]
    failures = []
    for j in range(handle_f.f):
        fail = _check_twist(f, handle_f, g, handle_g, j, good, bad)
        if fail is None:
            verdict = Proved() if B <= avail else InsufficientData(B)
            return CongruenceCertificate(candidate, S, eta, B, j, len(good), len(bad), verdict)
        failures.append((fail, j))
    (ell, cond), j = max(failures)
    return CongruenceCertificate(candidate, S, eta, B, j, len(good), len(bad), Refuted(ell, cond))


def certify_candidate(c: CongruenceCandidate, forms: Mapping[str, NewformRecord]) -> CongruenceCertificate:
    f, g = forms[c.label_f], forms[c.label_g]
    return certify(f, g, handle_for(f, c.p, c.handle_f), handle_for(g, c.p, c.handle_g), c)


def irreducibility_witness(f: NewformRecord, handle: PrimeIdealHandle, search_bound: int) -> int | None:
    """Least l not dividing pN with X^2 - a_l X + l irreducible over the residue field; None if none."""
    if search_bound > f.coeff_bound:
        raise CertifyError("search bound exceeds the stored coefficients")
    F = handle.residue_field
    bad = handle.p * f.level
    for ell in primes_up_to(search_bound):
        if bad % ell == 0:
            continue
        a = _reduce(f, ell, handle)
        if not roots_in(F, [F(ell), -a, F.one()]):
            return ell
    return None
