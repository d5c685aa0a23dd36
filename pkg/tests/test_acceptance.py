"""End-to-end acceptance checks, one test per criterion.

Each test records its outcome in conftest.ACCEPTANCE; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import sympy

import conftest
from congsieve.cli import main
from congsieve.curves import count_points, has_good_reduction, trace_norm
from congsieve.formstore import CurveRecord, InvariantError, parse_dataset
from congsieve.gfpoly import ff_make, frobenius, frobenius_power
from congsieve.prover import InsufficientData, Proved, Refuted, certify, mu
from congsieve.quadratic import in_ideal, is_principal_quadratic, order_denominator, primes_above
from congsieve.sieve import coverage_check, default_sets, run_sieve
from congsieve.splitting import CoeffField, IndexDividedError, split_prime
from congsieve.util import primes_up_to

from conftest import DATA, NoLift, congruent_rational_pair, rational, weil_range


@contextmanager
def criterion(n):
    conftest.ACCEPTANCE[n] = False
    yield
    conftest.ACCEPTANCE[n] = True


# known congruent pairs (p: level, label suffixes), restricted to the levels in the fixture
TABLE_PAIRS = {
    23: ["1755 g l", "1755 h k", "2205 ba q", "2205 n z", "3332 h k", "4510 o q", "5320 i l", "6358 a k",
         "6358 g j", "6650 bu bx", "6942 q s", "7050 bu bv", "7425 bd bl", "7425 bi z", "7560 bb x",
         "7560 bg bj", "7650 c cw", "7650 cj dc", "8085 ba bh", "8775 be t", "8775 bf s", "8820 bd bg",
         "8820 bi bl"],
    29: ["2178 bb x", "2178 p t", "2250 c f", "2250 m n", "2394 w z", "3249 i j", "3249 o p", "4356 r t",
         "4356 u w", "4725 bb bc", "4725 bb x", "5418 bb x", "5742 bk bl", "6426 be bm", "6426 bn bv",
         "6890 q r"],
    31: ["6650 bq bv"],
    59: ["4332 e f", "4332 j k"],
}


def expected_pairs():
    out = set()
    for p, rows in TABLE_PAIRS.items():
        for row in rows:
            level, a, b = row.split()
            out.add((p, *sorted((f"{level}.2.a.{a}", f"{level}.2.a.{b}"))))
    return out


# 1 -------------------------------------------------------------------------


def brute_uncovered(n, m, sets):
    return not any(s.coprime_to(n) and s.coprime_to(m) for s in sets)


def test_criterion_1_coverage():
    with criterion(1):
        t = time.perf_counter()
        sets = default_sets()
        assert coverage_check(10000, sets).ok
        witnesses = 0
        for i in range(len(sets)):
            rest = sets[:i] + sets[i + 1:]
            v = coverage_check(10000, rest)
            if not v.ok:
                witnesses += 1
                assert brute_uncovered(*v.witness, rest)
        assert witnesses > 0
        assert coverage_check(10000, sets[:1]).witness == (419, 419)
        assert time.perf_counter() - t < 5


# 2 -------------------------------------------------------------------------


def test_criterion_2_sieve_recall():
    with criterion(2):
        t = time.perf_counter()
        forms = parse_dataset(DATA / "table_pairs.dat")
        primes = [p for p in primes_up_to(4000) if p >= 23]
        cands = run_sieve(forms, primes, default_sets(), 997)
        elapsed = time.perf_counter() - t
        found = {(c.p, c.label_f, c.label_g) for c in cands}
        assert found == expected_pairs()
        assert all(c.refined_to == 997 for c in cands)
        assert elapsed < 10, f"sieve took {elapsed:.1f}s"


# 3 -------------------------------------------------------------------------

LEVEL_PAIRS = [(35, 35), (77, 77), (143, 143), (6, 10), (14, 21), (11, 143), (209, 209), (4, 9), (221, 221),
               (323, 323), (210, 11), (437, 437), (3 * 5 * 7 * 11, 13), (15, 21)]


def mu_oracle(n):
    out = Fraction(n)
    for q in sympy.factorint(n):
        out *= Fraction(q + 1, q)
    return int(out)


def certify_pair(f, g, p):
    (hf,), (hg,) = split_prime(f.field, p), split_prime(g.field, p)
    return certify(f, g, hf, hg)


def synthetic_pairs(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        N, M = rng.choice(LEVEL_PAIRS)
        p = rng.choice([5, 7, 11, 13, 17, 19, 23, 29, 31])
        if (N * M) % p == 0:
            continue
        try:
            out.append((*congruent_rational_pair(rng, N, M, p), p))
        except NoLift:
            continue
    return out


def test_criterion_3_certifier_soundness():
    with criterion(3):
        pairs = synthetic_pairs(100, 3)
        kinds = set()
        rng = random.Random(33)
        perturbed = 0
        for f, g, p in pairs:
            N, M = f.level, g.level
            S = [q for q in sympy.factorint(math.gcd(N, M))
                 if N % (q * q) and M % (q * q) and f.a(q) != g.a(q)]
            eta = math.lcm(N, M) * math.prod(S)
            B = mu_oracle(eta) // 6
            cert = certify_pair(f, g, p)
            assert (cert.eta, cert.sturm_bound) == (eta, B)
            expected = Proved() if B <= 997 else InsufficientData(B)
            assert cert.verdict == expected
            kinds.add(type(expected))
            # (c) symmetry
            assert certify_pair(g, f, p).verdict == cert.verdict
            # (b) one perturbation below B per pair
            ells = [ell for ell in primes_up_to(min(B, 997)) if (N * M) % (ell * ell)]
            ell = rng.choice(ells)
            af = int(f.a(ell)[0])
            if (N * M) % ell:
                options = [x for x in weil_range(ell) if (x - af) % p]
            else:
                signs = (1, -1) if M % ell == 0 else weil_range(ell)
                options = [x for x in signs if (x * af - ell - 1) % p]
            if not options:
                continue
            vals = {q: int(v[0]) for q, v in g.eigenvalues.items()}
            vals[ell] = rng.choice(options)
            bad = rational(g.label, vals)
            got = certify_pair(f, bad, p).verdict
            assert isinstance(got, Refuted) and got.ell == ell
            assert certify_pair(bad, f, p).verdict == got
            perturbed += 1
        assert kinds == {Proved, InsufficientData}
        assert perturbed >= 50


# 4 -------------------------------------------------------------------------


def test_criterion_4_mu():
    with criterion(4):
        assert (mu(1), mu(11), mu(4332)) == (1, 12, 9120)
        rng = random.Random(4)
        done = 0
        while done < 1000:
            a, b = rng.randint(1, 10**6), rng.randint(1, 10**6)
            if math.gcd(a, b) != 1:
                continue
            assert mu(a * b) == mu(a) * mu(b) == mu_oracle(a * b)
            done += 1


# 5 -------------------------------------------------------------------------


def field_tables(F):
    elems = list(F.elements())
    index = {e: i for i, e in enumerate(elems)}
    add = np.array([[index[a + b] for b in elems] for a in elems])
    mul = np.array([[index[a * b] for b in elems] for a in elems])
    return elems, index, add, mul


def check_field_exhaustively(p, k):
    F = ff_make(p, k)
    elems, index, add, mul = field_tables(F)
    n = len(elems)
    assert n == p**k
    zero, one = index[F.zero()], index[F.one()]
    assert (add == add.T).all() and (mul == mul.T).all()
    assert (add[:, zero] == np.arange(n)).all() and (mul[:, one] == np.arange(n)).all()
    assert all((add[i] == zero).sum() == 1 for i in range(n))
    assert all((mul[i] == one).sum() == 1 for i in range(n) if i != zero)
    for a in elems:
        if a != F.zero():
            assert a * a.inverse() == F.one()
    # associativity and distributivity over all triples, by table lookup
    ab = np.arange(n)
    A, B, C = np.meshgrid(ab, ab, ab, indexing="ij")
    assert (add[add[A, B], C] == add[A, add[B, C]]).all()
    assert (mul[mul[A, B], C] == mul[A, mul[B, C]]).all()
    assert (mul[A, add[B, C]] == add[mul[A, B], mul[A, C]]).all()
    # Frobenius: a -> a^p is a ring automorphism of order k
    fr = np.array([index[frobenius(a)] for a in elems])
    assert sorted(fr) == list(range(n))
    assert (fr[add] == add[fr[:, None], fr[None, :]]).all()
    assert (fr[mul] == mul[fr[:, None], fr[None, :]]).all()
    for a in elems:
        assert frobenius(a) == a**p and frobenius_power(a, k) == a


def fixture_fields():
    fields = {}
    for name in ("table_pairs.dat", "pair1058.dat", "level9603.dat"):
        for f in parse_dataset(DATA / name):
            fields[f.field.defining_poly] = f.field
    for fld in (CoeffField((-1, -3, 0, 1), 81), CoeffField((1, 1, -3, -1, 1), 725),
                CoeffField((5, 0, -5, 0, 1), 2000)):
        fields[fld.defining_poly] = fld
    return list(fields.values())


def test_criterion_5_fields_and_splitting():
    with criterion(5):
        t = time.perf_counter()
        for p, k in [(p, k) for p in (2, 3, 5, 7) for k in range(1, 7) if p**k <= 64]:
            check_field_exhaustively(p, k)
        for fld in fixture_fields():
            for p in primes_up_to(500):
                try:
                    hs = split_prime(fld, p)
                except IndexDividedError:
                    continue
                assert sum(h.e * h.f for h in hs) == fld.d
        sqrt2 = CoeffField((-2, 0, 1), 8)
        for p in (2, 5, 7):
            squares = {x * x % p for x in range(p)}
            shape = [(h.e, h.f) for h in split_prime(sqrt2, p)]
            if p == 2:
                assert shape == [(2, 1)]
            elif 2 % p in squares:
                assert shape == [(1, 1), (1, 1)]
            else:
                assert shape == [(1, 2)]
        assert time.perf_counter() - t < 30


# 6 -------------------------------------------------------------------------


def brute_count(curve, ell, ext):
    """Double loop over (x, y) on y^2 + h y = f, plus the points at infinity v^2 + h_3 v = f_6."""
    F = ff_make(ell, ext)
    elems = list(F.elements())

    def ev(coeffs, x):
        acc = F.zero()
        for c in reversed(coeffs):
            acc = acc * x + F(c % ell)
        return acc

    lhs = {}
    for y in elems:
        lhs[y] = y * y
    n = 0
    for x in elems:
        fx, hx = ev(curve.f_coeffs, x), ev(curve.h_coeffs, x)
        for y in elems:
            if lhs[y] + hx * y == fx:
                n += 1
    f6 = F(curve.f_coeffs[6] % ell) if len(curve.f_coeffs) > 6 else F.zero()
    h3 = F(curve.h_coeffs[3] % ell) if len(curve.h_coeffs) > 3 else F.zero()
    return n + sum(1 for v in elems if v * v + h3 * v == f6)


def good_random_curves(count, seed):
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        deg = rng.choice((5, 6))
        f = [rng.randint(-9, 9) for _ in range(deg)] + [rng.choice((-3, -2, -1, 1, 2, 3))]
        h = [rng.randint(-2, 2) for _ in range(rng.randint(0, 4))]
        try:
            c = CurveRecord(f"r{len(out)}", tuple(f), tuple(h))
        except InvariantError:
            continue
        if all(has_good_reduction(c, ell) for ell in (3, 5, 7, 11, 13)):
            out.append(c)
    return out


def test_criterion_6_point_counts():
    with criterion(6):
        for c in good_random_curves(20, 6):
            for ell in (3, 5, 7, 11, 13):
                for ext in (1, 2):
                    assert count_points(c, ell, ext) == brute_count(c, ell, ext)
        c = CurveRecord("t", (1, 0, 0, 0, 0, 1))
        assert count_points(c, 3) == 4
        assert trace_norm(4, count_points(c, 3, 2), 3)[0] == 0


# 7 -------------------------------------------------------------------------


def test_criterion_7_principality():
    with criterion(7):
        t = time.perf_counter()
        target = next(i for i in primes_above(2, 7) if in_ideal(3, 1, i))
        assert is_principal_quadratic(target).witness == (3, 1)
        (above2,) = primes_above(10, 2)
        assert is_principal_quadratic(above2) is None
        rng = random.Random(7)
        squarefree = [m for m in range(2, 10**4) if sympy.ntheory.factor_.core(m) == m]
        done = 0
        while done < 200:
            m = rng.choice(squarefree)
            s = order_denominator(m)
            b = rng.randint(-20, 20)
            a = rng.randint(-10**4, 10**4)
            if s == 2 and (a - b) % 2:
                continue
            n = abs(a * a - m * b * b)
            if n % (s * s) or not 2 <= n // (s * s) <= 4000 or not sympy.isprime(n // (s * s)):
                continue
            q = n // (s * s)
            (ideal,) = [i for i in primes_above(m, q) if in_ideal(a, b, i)][:1]
            res = is_principal_quadratic(ideal)
            assert res is not None
            wa, wb = res.witness
            assert abs(wa * wa - m * wb * wb) == s * s * q and in_ideal(wa, wb, ideal)
            done += 1
        assert time.perf_counter() - t < 60


# 8 -------------------------------------------------------------------------


def pipeline(tmp_path, jobs, tamagawa):
    out = tmp_path / f"pipeline{jobs}{tamagawa.stem}"
    data = DATA / "pair1058.dat"
    common = ["--dataset", str(data), "--jobs", str(jobs), "--out", str(out)]
    assert main(["sieve", "--p-max", "5", *common]) == 0
    assert main(["certify", str(out / "candidates.txt"), *common]) == 0
    code = main(["visibility", str(out / "certificates.txt"), "--tamagawa", str(tamagawa), *common])
    return code, out


def test_criterion_8_pipeline(tmp_path):
    with criterion(8):
        code, out = pipeline(tmp_path, 1, DATA / "tamagawa1058.txt")
        assert code == 0
        assert (out / "visibility.txt").read_text(encoding="utf-8") == "5 | 1058.2.a.e | 1058.2.a.a | Complete\n"
        rows = (out / "visibility_table.txt").read_text(encoding="utf-8").splitlines()
        assert len(rows) == 2
        assert rows[1].split() == ["5", "1058.2.a.e", "1058.2.a.a", "Q", "0", "1", "Q", "2", "2"]
        code, out = pipeline(tmp_path, 1, DATA / "tamagawa1058_unknown.txt")
        assert code == 1
        assert (out / "visibility.txt").read_text(encoding="utf-8") == \
            "5 | 1058.2.a.e | 1058.2.a.a | Blocked | Tamagawa:NeedsData\n"
        row = (out / "visibility_table.txt").read_text(encoding="utf-8").splitlines()[1]
        assert row.startswith("*") and row.split()[-1] == "?"


# 9 -------------------------------------------------------------------------


def full_run(tmp_path, jobs):
    out = tmp_path / f"jobs{jobs}"
    common = ["--jobs", str(jobs), "--out", str(out)]
    assert main(["cover", *common]) == 0
    assert main(["sieve", "--dataset", str(DATA / "table_pairs.dat"), "--p-min", "23", *common]) == 0
    _, piped = pipeline(tmp_path / f"p{jobs}", jobs, DATA / "tamagawa1058.txt")
    return {
        "cover": (out / "cover.txt").read_bytes(),
        "sieve": (out / "candidates.txt").read_bytes(),
        **{name: (piped / name).read_bytes()
           for name in ("candidates.txt", "certificates.txt", "visibility.txt", "visibility_table.txt")},
    }


def test_criterion_9_determinism(tmp_path):
    with criterion(9):
        one = full_run(tmp_path, 1)
        eight = full_run(tmp_path, 8)
        assert one == eight
        assert one["sieve"] and one["cover"]
