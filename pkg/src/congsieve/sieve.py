"""Hash-based congruence sieve.

For a set L of 15 auxiliary primes, a form f and an unramified prime P above
p, the hash is the tuple of reductions (a_l(f) mod P) for l in L.  Two tuples
that agree after embedding both residue fields into an algebraic closure are
exactly the tuples with the same Frobenius orbit in the canonical model of
F_{p^f}, so the table key is the lexicographically least orbit member.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .formstore import NewformRecord
from .gfpoly import FField, FFElement, ff_make, frobenius_power
from .splitting import (
    CoeffField,
    IndexDividedError,
    PrimeIdealHandle,
    reduce_eigenvalue,
    split_prime,
    unramified_primes_above,
)
from .util import is_prime, primes_up_to

log = logging.getLogger(__name__)

DEFAULT_SETS: tuple[tuple[int, ...], ...] = (
    (419, 431, 577, 587, 599, 617, 733, 773, 823, 859, 877, 883, 887, 941, 983),
    (419, 439, 541, 569, 587, 641, 709, 727, 751, 769, 773, 821, 827, 859, 971),
    (419, 461, 569, 577, 601, 641, 701, 719, 733, 751, 887, 907, 919, 971, 983),
    (439, 461, 617, 631, 691, 733, 739, 757, 787, 811, 827, 919, 937, 947, 983),
    (439, 503, 587, 647, 683, 701, 709, 727, 739, 757, 797, 829, 839, 853, 929),
    (467, 541, 683, 691, 761, 773, 811, 829, 853, 863, 929, 937, 947, 953, 991),
)


class SieveError(ValueError):
    pass


@dataclass(frozen=True)
class PrimeSet:
    primes: tuple[int, ...]

    def __post_init__(self):
        ps = tuple(int(x) for x in self.primes)
        object.__setattr__(self, "primes", ps)
        if len(ps) != 15:
            raise SieveError(f"a prime set has 15 entries, got {len(ps)}")
        if any(b <= a for a, b in zip(ps, ps[1:])):
            raise SieveError("prime set must be strictly increasing")
        bad = [x for x in ps if not is_prime(x)]
        if bad:
            raise SieveError(f"not prime: {bad}")

    def __iter__(self):
        return iter(self.primes)

    def coprime_to(self, n: int) -> bool:
        return all(n % ell for ell in self.primes)


def default_sets() -> list[PrimeSet]:
    return [PrimeSet(s) for s in DEFAULT_SETS]


def parse_sets(text: str) -> list[PrimeSet]:
    """One set per non-empty line, primes separated by commas and/or whitespace."""
    out = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            out.append(PrimeSet(tuple(int(t) for t in line.replace(",", " ").split())))
    return out


# ---------------------------------------------------------------------------
# coverage


@dataclass(frozen=True)
class CoverageVerdict:
    ok: bool
    witness: tuple[int, int] | None = None


def coverage_check(level_max: int, sets: Sequence[PrimeSet]) -> CoverageVerdict:
    """Is every pair of levels in [2, level_max] coprime to all primes of some common set?

    The witness of a failure is (N, N) for the least level N coprime to no set
    if there is one, else the least uncovered pair (N, M), N <= M.
    """
    if level_max < 2:
        raise ValueError("level_max must be >= 2")
    if len(sets) > 62:
        raise ValueError("at most 62 prime sets")
    levels = np.arange(2, level_max + 1, dtype=np.int64)
    masks = np.zeros(levels.shape, dtype=np.int64)
    for i, s in enumerate(sets):
        ok = np.ones(levels.shape, dtype=bool)
        for ell in s:
            ok &= levels % ell != 0
        masks |= ok.astype(np.int64) << i
    distinct, first = np.unique(masks, return_index=True)
    first_level = {int(m): int(levels[i]) for m, i in zip(distinct, first)}
    if 0 in first_level:
        # a level outside every set fails even when paired with itself
        n = first_level[0]
        return CoverageVerdict(False, (n, n))
    witness = None
    ms = sorted(first_level)
    for a in ms:
        for b in ms:
            if a & b == 0:
                n, m = sorted((first_level[a], first_level[b]))
                if witness is None or (n, m) < witness:
                    witness = (n, m)
    return CoverageVerdict(witness is None, witness)


# ---------------------------------------------------------------------------
# hashes


@dataclass(frozen=True, order=True)
class HashKey:
    p: int
    fdeg: int
    payload: bytes


def hash_tuple(f: NewformRecord, h: PrimeIdealHandle, L: PrimeSet) -> list[FFElement]:
    for ell in L:
        if f.level % ell == 0:
            raise SieveError(f"{f.label}: level {f.level} is divisible by {ell} in the prime set")
    return [reduce_eigenvalue(f.a(ell), h) for ell in L]


def _width(p: int) -> int:
    return max(1, (p.bit_length() + 7) // 8)


def _encode(flat: Iterable[int], p: int) -> bytes:
    w = _width(p)
    return b"".join(int(x).to_bytes(w, "big") for x in flat)


def canonical_form(t: Sequence[FFElement], field: FField) -> tuple[bytes, int]:
    """Least serialization over the Frobenius orbit of t, and the first power attaining it."""
    best, best_j = None, 0
    cur = list(t)
    for j in range(field.k):
        if j:
            cur = [frobenius_power(a, 1) for a in cur]
        ser = tuple(c for a in cur for c in a.coeffs)
        if best is None or ser < best:
            best, best_j = ser, j
    return _encode(best or (), field.p), best_j


def canonical_hash_key(t: Sequence[FFElement], field: FField) -> HashKey:
    for a in t:
        if a.parent != field:
            raise SieveError("tuple element outside the given field")
    payload, _ = canonical_form(t, field)
    return HashKey(field.p, field.k, payload)


# ---------------------------------------------------------------------------
# candidates


@dataclass(frozen=True, order=True)
class CongruenceCandidate:
    p: int
    label_f: str
    label_g: str
    handle_f: int
    handle_g: int
    twist: int  # a_l(f) = Frob^twist(a_l(g)) in the canonical residue field
    refined_to: int = 0

    def __post_init__(self):
        if not self.label_f < self.label_g:
            raise SieveError(f"candidate labels out of order: {self.label_f!r} >= {self.label_g!r}")

    def line(self) -> str:
        return " | ".join(
            str(x) for x in (self.p, self.label_f, self.label_g, self.handle_f, self.handle_g, self.twist, self.refined_to)
        )

    @classmethod
    def from_line(cls, line: str) -> "CongruenceCandidate":
        parts = [t.strip() for t in line.split("|")]
        if len(parts) != 7:
            raise SieveError(f"malformed candidate line {line!r}")
        p, lf, lg, hf, hg, tw, rt = parts
        return cls(int(p), lf, lg, int(hf), int(hg), int(tw), int(rt))


def format_candidates(cands: Iterable[CongruenceCandidate]) -> str:
    return "".join(c.line() + "\n" for c in sorted(set(cands)))


def parse_candidates(text: str) -> list[CongruenceCandidate]:
    return [CongruenceCandidate.from_line(l) for l in text.splitlines() if l.strip() and not l.startswith("#")]


# ---------------------------------------------------------------------------
# vectorised reduction tables


def _as_int_array(values: np.ndarray) -> np.ndarray:
    if all(abs(int(x)) < 2**62 for x in values.flat):
        return values.astype(np.int64)
    return values


class FormTable:
    """Eigenvalue coordinates of many forms at a fixed list of primes, grouped by degree."""

    def __init__(self, forms: Sequence[NewformRecord], ells: Sequence[int]):
        self.ells = tuple(sorted(set(ells)))
        self.col = {ell: i for i, ell in enumerate(self.ells)}
        self.forms = sorted(forms, key=lambda r: r.label)
        self.labels = [f.label for f in self.forms]
        self.levels = np.array([f.level for f in self.forms], dtype=np.int64)
        self.hecke = np.array([f.hecke_index or 1 for f in self.forms], dtype=np.int64)
        self.fields: list[CoeffField] = sorted({f.field for f in self.forms}, key=lambda k: (k.d, k.defining_poly))
        fid = {k: i for i, k in enumerate(self.fields)}
        self.field_id = np.array([fid[f.field] for f in self.forms], dtype=np.int64)
        self.by_degree: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for d in sorted({k.d for k in self.fields}):
            rows = np.array([i for i, f in enumerate(self.forms) if f.field.d == d], dtype=np.int64)
            nums = np.zeros((len(rows), len(self.ells), d), dtype=object)
            dens = np.ones((len(rows), len(self.ells)), dtype=object)
            for r, i in enumerate(rows):
                for j, ell in enumerate(self.ells):
                    v = self.forms[i].eigenvalues.get(ell)
                    if v is None:
                        raise SieveError(f"{self.labels[i]}: no eigenvalue at {ell}")
                    den = math.lcm(*(c.denominator for c in v))
                    dens[r, j] = den
                    for k, c in enumerate(v):
                        nums[r, j, k] = c.numerator * (den // c.denominator)
            self.by_degree[d] = (rows, _as_int_array(nums), _as_int_array(dens))
        self._set_masks: dict[tuple[int, ...], np.ndarray] = {}

    def set_mask(self, L: PrimeSet) -> np.ndarray:
        """Forms whose level is coprime to every prime of L."""
        if L.primes not in self._set_masks:
            m = np.ones(len(self.forms), dtype=bool)
            for ell in L:
                m &= self.levels % ell != 0
            self._set_masks[L.primes] = m
        return self._set_masks[L.primes]

    def reduce(self, d: int, p: int) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates mod p (n x n_ells x d) for the degree-d forms, and the p-integral mask."""
        _, nums, dens = self.by_degree[d]
        dm = (dens % p).astype(np.int64)
        good = dm != 0
        inv = np.zeros_like(dm)
        for v in np.unique(dm[good]):
            inv[dm == v] = pow(int(v), -1, p)
        red = (nums % p).astype(np.int64) * inv[:, :, None] % p
        return red, good


@lru_cache(maxsize=4096)
def _frob_matrix(F: FField) -> np.ndarray:
    return np.array(F.frobenius_matrix(), dtype=np.int64)


def _lex_less(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a != b
    first = diff.argmax(axis=1)
    rows = np.arange(a.shape[0])
    return diff.any(axis=1) & (a[rows, first] < b[rows, first])


def canonical_batch(vals: np.ndarray, F: FField) -> tuple[np.ndarray, np.ndarray]:
    """Orbit-minimal flattened tuples (n x len*k) and the Frobenius power reaching each."""
    n = vals.shape[0]
    best = vals.reshape(n, -1)
    best_j = np.zeros(n, dtype=np.int64)
    if F.k > 1:
        fr = _frob_matrix(F)
        cur = vals
        for j in range(1, F.k):
            cur = (cur @ fr) % F.p
            flat = cur.reshape(n, -1)
            lt = _lex_less(flat, best)
            best = np.where(lt[:, None], flat, best)
            best_j[lt] = j
    return best, best_j


class _Block:
    """Reduced tuples at one prime for a batch of (form, handle) pairs of one residue degree."""

    __slots__ = ("vals", "form", "handle", "good")

    def __init__(self, vals, form, handle, good):
        self.vals, self.form, self.handle, self.good = vals, form, handle, good


def _handles(fld: CoeffField, p: int) -> tuple[PrimeIdealHandle, ...]:
    try:
        return unramified_primes_above(fld, p)
    except IndexDividedError as exc:
        log.info("skip field %s at p=%d: %s", fld.defining_poly, p, exc)
        return ()


def _blocks_at(table: FormTable, p: int) -> dict[int, list[_Block]]:
    # p may divide the level: the hashed a_l have l coprime to the level, so
    # their reductions are well defined; the good reduction filter comes later
    usable = table.hecke % p != 0
    blocks: dict[int, list[_Block]] = defaultdict(list)
    for d, (rows, _, _) in table.by_degree.items():
        red, good = table.reduce(d, p)
        ok = usable[rows]
        if d == 1:
            blocks[1].append(_Block(red[ok], rows[ok], np.zeros(int(ok.sum()), dtype=np.int64), good[ok]))
            continue
        fids = table.field_id[rows]
        if d == 2:
            # split primes: theta -> r in F_p; inert primes: theta -> (u0, u1) in F_{p^2}
            nf = len(table.fields)
            kind = np.zeros(nf, dtype=np.int64)
            r = np.zeros((nf, 2), dtype=np.int64)
            u = np.zeros((nf, 2), dtype=np.int64)
            for fi in np.unique(fids):
                hs = _handles(table.fields[fi], p)
                if len(hs) == 2:
                    kind[fi] = 1
                    r[fi] = [h.theta_image.coeffs[0] for h in hs]
                elif len(hs) == 1 and hs[0].f == 2:
                    kind[fi] = 2
                    u[fi] = hs[0].theta_image.coeffs
            k = kind[fids]
            c0, c1 = red[:, :, 0], red[:, :, 1]
            sp = ok & (k == 1)
            for hi in (0, 1):
                v = (c0[sp] + c1[sp] * r[fids[sp], hi][:, None]) % p
                blocks[1].append(_Block(v[:, :, None], rows[sp], np.full(int(sp.sum()), hi), good[sp]))
            ine = ok & (k == 2)
            uu = u[fids[ine]]
            v = np.stack(
                [(c0[ine] + c1[ine] * uu[:, 0:1]) % p, (c1[ine] * uu[:, 1:2]) % p], axis=2
            )
            blocks[2].append(_Block(v, rows[ine], np.zeros(int(ine.sum()), dtype=np.int64), good[ine]))
            continue
        for fi in np.unique(fids):
            sel = ok & (fids == fi)
            if not sel.any():
                continue
            for h in _handles(table.fields[fi], p):
                R = np.array(h.reduction_rows(), dtype=np.int64)
                v = (red[sel] @ R) % p
                blocks[h.f].append(_Block(v, rows[sel], np.full(int(sel.sum()), h.index), good[sel]))
    return blocks


def sieve_prime(table: FormTable, p: int, sets: Sequence[PrimeSet]) -> set[CongruenceCandidate]:
    """All passes at one prime p (one per set), merged."""
    found: set[CongruenceCandidate] = set()
    blocks = _blocks_at(table, p)
    for fdeg, bl in sorted(blocks.items()):
        if not bl:
            continue
        vals = np.concatenate([b.vals for b in bl])
        form = np.concatenate([b.form for b in bl])
        handle = np.concatenate([b.handle for b in bl])
        good = np.concatenate([b.good for b in bl])
        if vals.shape[0] < 2:
            continue
        F = ff_make(p, fdeg)
        for L in sets:
            cols = [table.col[ell] for ell in L]
            rows = table.set_mask(L)[form]
            integral = good[:, cols].all(axis=1)
            for i in sorted({int(form[i]) for i in np.flatnonzero(rows & ~integral)}):
                log.info("%s: eigenvalue denominator divisible by %d; skipped", table.labels[i], p)
            idx = np.flatnonzero(rows & integral)
            if idx.size < 2:
                continue
            keys, js = canonical_batch(vals[np.ix_(idx, cols)], F)
            for cls in _equal_rows(keys):
                entries = [(table.labels[form[idx[m]]], int(handle[idx[m]]), int(js[m])) for m in cls]
                _pairs(entries, p, fdeg, found)
    return _dedupe(found)


_FINGERPRINT = np.random.default_rng(20240101).integers(1, 2**63, size=256, dtype=np.uint64) | np.uint64(1)


def _equal_rows(keys: np.ndarray) -> list[list[int]]:
    """Classes (size >= 2) of identical rows; fingerprints first, exact comparison after."""
    n, w = keys.shape
    if w > len(_FINGERPRINT):
        raise SieveError("tuple too long for the fingerprint table")
    with np.errstate(over="ignore"):
        fp = keys.astype(np.uint64) @ _FINGERPRINT[:w]
    order = np.argsort(fp, kind="stable")
    s = fp[order]
    dup = np.flatnonzero(s[1:] == s[:-1])
    if dup.size == 0:
        return []
    classes: dict[bytes, list[int]] = defaultdict(list)
    for i in sorted({int(order[j]) for j in dup} | {int(order[j + 1]) for j in dup}):
        classes[keys[i].tobytes()].append(i)
    return [c for c in classes.values() if len(c) > 1]


def _pairs(entries, p, fdeg, found):
    for a in range(len(entries)):
        for c in range(a + 1, len(entries)):
            (l1, h1, j1), (l2, h2, j2) = entries[a], entries[c]
            if l1 == l2:
                continue
            if l1 > l2:
                (l1, h1, j1), (l2, h2, j2) = (l2, h2, j2), (l1, h1, j1)
            # Frob^j1 t1 = Frob^j2 t2  =>  t1 = Frob^(j2 - j1) t2
            found.add(CongruenceCandidate(p, l1, l2, h1, h2, (j2 - j1) % fdeg))


def _dedupe(cands: Iterable[CongruenceCandidate]) -> set[CongruenceCandidate]:
    best: dict[tuple, CongruenceCandidate] = {}
    for c in cands:
        k = (c.p, c.label_f, c.label_g, c.handle_f, c.handle_g)
        if k not in best or c.twist < best[k].twist:
            best[k] = c
    return set(best.values())


def sieve_pass(forms: Sequence[NewformRecord], p: int, L: PrimeSet) -> list[CongruenceCandidate]:
    """One (set, prime) pass of the sieve."""
    if not 5 <= p <= 4000 or not is_prime(p):
        raise SieveError(f"p = {p} outside the supported range of primes [5, 4000]")
    table = FormTable(forms, L.primes)
    return sorted(sieve_prime(table, p, [L]))


# ---------------------------------------------------------------------------
# refinement


def _reductions(f: NewformRecord, h: PrimeIdealHandle, ells: Sequence[int]) -> list[FFElement]:
    return [reduce_eigenvalue(f.a(ell), h) for ell in ells]


def handle_for(f: NewformRecord, p: int, index: int) -> PrimeIdealHandle:
    hs = split_prime(f.field, p)
    if not 0 <= index < len(hs):
        raise SieveError(f"{f.label}: no prime #{index} above {p}")
    return hs[index]


def surviving_twists(f: NewformRecord, hf: PrimeIdealHandle, g: NewformRecord, hg: PrimeIdealHandle,
                     ells: Sequence[int]) -> list[int]:
    """Twists j with a_l(f) = Frob^j(a_l(g)) at every l in ells."""
    if hf.f != hg.f:
        return []
    af = _reductions(f, hf, ells)
    ag = _reductions(g, hg, ells)
    out = []
    for j in range(hf.f):
        if all(x == frobenius_power(y, j) for x, y in zip(af, ag)):
            out.append(j)
    return out


def refine(c: CongruenceCandidate, forms: dict[str, NewformRecord], bound: int) -> CongruenceCandidate | None:
    """Check the remaining good primes l <= bound; None if no twist survives."""
    if bound <= 0:
        return replace(c, refined_to=0)
    f, g = forms[c.label_f], forms[c.label_g]
    if bound > min(f.coeff_bound, g.coeff_bound):
        raise SieveError(f"refine bound {bound} exceeds stored coefficients")
    bad = c.p * f.level * g.level
    ells = [ell for ell in primes_up_to(bound) if bad % ell]
    hf, hg = handle_for(f, c.p, c.handle_f), handle_for(g, c.p, c.handle_g)
    twists = surviving_twists(f, hf, g, hg, ells)
    if not twists:
        return None
    return replace(c, twist=twists[0], refined_to=bound)


# ---------------------------------------------------------------------------
# full run


def _sieve_chunk(args):
    forms, primes, sets = args
    table = FormTable(forms, [ell for s in sets for ell in s])
    out = set()
    for p in primes:
        out |= sieve_prime(table, p, sets)
    return out


def run_sieve(forms: Sequence[NewformRecord], primes: Sequence[int], sets: Sequence[PrimeSet],
              refine_bound: int, jobs: int = 1) -> list[CongruenceCandidate]:
    """All passes over (set, p), merged, refined and sorted."""
    primes = sorted(primes)
    if jobs <= 1 or len(primes) < 2:
        raw = _sieve_chunk((forms, primes, sets))
    else:
        chunks = [primes[i::jobs] for i in range(jobs)]
        raw = set()
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            for part in ex.map(_sieve_chunk, [(forms, ch, sets) for ch in chunks if ch]):
                raw |= part
    by_label = {f.label: f for f in forms}
    out = []
    for c in sorted(_dedupe(raw)):
        r = refine(c, by_label, refine_bound)
        if r is None:
            log.info("rejected after refinement: %s", c.line())
        else:
            out.append(r)
    return out
