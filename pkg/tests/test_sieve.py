import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from congsieve.formstore import parse_dataset
from congsieve.gfpoly import FFElement, ff_make, frobenius_power
from congsieve.sieve import (
    DEFAULT_SETS,
    CongruenceCandidate,
    HashKey,
    PrimeSet,
    SieveError,
    canonical_batch,
    canonical_form,
    canonical_hash_key,
    coverage_check,
    default_sets,
    format_candidates,
    handle_for,
    hash_tuple,
    parse_candidates,
    parse_sets,
    refine,
    run_sieve,
    sieve_pass,
)
from congsieve.splitting import split_prime

from conftest import (
    DATA,
    SQRT2,
    congruent_rational_pair,
    conjugate_partner,
    quadratic,
    random_rational_values,
    random_sqrt2_values,
    rational,
)

L0 = default_sets()[0]


def brute_uncovered(n, m, sets):
    return not any(s.coprime_to(n) and s.coprime_to(m) for s in sets)


def test_prime_set_validation():
    with pytest.raises(SieveError):
        PrimeSet(DEFAULT_SETS[0][:14])
    with pytest.raises(SieveError):
        PrimeSet(tuple(reversed(DEFAULT_SETS[0])))
    with pytest.raises(SieveError):
        PrimeSet(DEFAULT_SETS[0][:14] + (999,))
    text = "# comment\n" + "\n".join(", ".join(map(str, s)) for s in DEFAULT_SETS[:2]) + "\n\n"
    assert parse_sets(text) == default_sets()[:2]


def test_coverage_default_sets():
    assert coverage_check(10000, default_sets()).ok


def test_coverage_single_set():
    v = coverage_check(10000, [L0])
    assert not v.ok and v.witness == (419, 419)


def test_coverage_small_levels():
    assert coverage_check(100, default_sets()).ok
    assert coverage_check(100, [L0]).ok


def test_coverage_witnesses_when_a_set_is_removed():
    sets = default_sets()
    failures = 0
    for i in range(len(sets)):
        rest = sets[:i] + sets[i + 1:]
        v = coverage_check(10000, rest)
        if not v.ok:
            failures += 1
            assert brute_uncovered(*v.witness, rest)
    assert failures > 0


SMALL_PRIMES = [q for q in range(2, 200) if all(q % d for d in range(2, q))]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 250), st.lists(st.integers(0, 2**32), min_size=1, max_size=4))
def test_coverage_matches_pairwise_brute_force(level_max, seeds):
    sets = [PrimeSet(tuple(sorted(random.Random(s).sample(SMALL_PRIMES, 15)))) for s in seeds]
    v = coverage_check(level_max, sets)
    uncovered = [(n, m) for n in range(2, level_max + 1) for m in range(n, level_max + 1)
                 if brute_uncovered(n, m, sets)]
    if not uncovered:
        assert v.ok
        return
    assert not v.ok
    diag = [n for n, m in uncovered if n == m]
    assert v.witness == ((diag[0], diag[0]) if diag else uncovered[0])


def test_hash_tuple_rational(level11):
    (h,) = split_prime(level11.field, 13)
    t = hash_tuple(level11, h, L0)
    assert [a.coeffs[0] for a in t] == [int(level11.a(ell)[0]) % 13 for ell in L0]


def test_hash_tuple_level_419_rejected():
    f = rational("419.2.a.a", random_rational_values(random.Random(0), 419))
    (h,) = split_prime(f.field, 13)
    with pytest.raises(SieveError, match="419"):
        hash_tuple(f, h, L0)


def test_hash_tuple_zero_form():
    f = rational("1.2.a.a", {ell: 0 for ell in range(1000)})
    (h,) = split_prime(f.field, 7)
    assert all(a.is_zero() for a in hash_tuple(f, h, L0))


def test_canonical_key_trivial_orbit():
    F = ff_make(11, 1)
    t = [F(3), F(10), F(0)]
    key = canonical_hash_key(t, F)
    assert key == HashKey(11, 1, bytes([3, 10, 0]))


def test_canonical_key_wide_encoding():
    F = ff_make(3001, 1)
    key = canonical_hash_key([F(3000), F(1)], F)
    assert key.payload == (3000).to_bytes(2, "big") + (1).to_bytes(2, "big")


def test_canonical_key_frobenius_invariant():
    F = ff_make(7, 3)
    rng = random.Random(3)
    t = [F(tuple(rng.randrange(7) for _ in range(3))) for _ in range(15)]
    for j in range(3):
        assert canonical_hash_key([frobenius_power(a, j) for a in t], F) == canonical_hash_key(t, F)


def test_conjugate_form_swaps_split_handles():
    f = quadratic("7.2.a.a", SQRT2, random_sqrt2_values(random.Random(5), 7))
    hs = split_prime(SQRT2, 17)
    assert len(hs) == 2
    keys = [canonical_hash_key(hash_tuple(f, h, L0), h.residue_field) for h in hs]
    conj = quadratic("7.2.a.b", SQRT2, {ell: (int(c0), -int(c1)) for ell, (c0, c1) in f.eigenvalues.items()})
    assert canonical_hash_key(hash_tuple(conj, hs[1], L0), hs[1].residue_field) == keys[0]
    assert canonical_hash_key(hash_tuple(conj, hs[0], L0), hs[0].residue_field) == keys[1]


def _orbit_equal(t1, t2, k):
    return any(all(frobenius_power(a, j) == b for a, b in zip(t1, t2)) for j in range(k))


elem = st.tuples(st.integers(0, 6), st.integers(0, 6))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([5, 7]), st.lists(elem, min_size=1, max_size=4), st.lists(elem, min_size=4, max_size=4),
       st.integers(0, 3))
def test_canonical_key_distinguishes_orbits(p, raw1, raw2, mode):
    F = ff_make(p, 2)
    t1 = [F((a % p, b % p)) for a, b in raw1]
    if mode == 0:
        t2 = [frobenius_power(a, 1) for a in t1]
    elif mode == 1:
        t2 = list(t1)
        t2[0] = t2[0] + F.one()
    else:
        t2 = [F((a % p, b % p)) for a, b in raw2[: len(t1)]]
    same = canonical_hash_key(t1, F) == canonical_hash_key(t2, F)
    assert same == _orbit_equal(t1, t2, 2)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([(5, 2), (7, 2), (3, 3), (5, 4)]), st.integers(0, 2**32))
def test_vectorised_keys_match_scalar(pk, seed):
    p, k = pk
    F = ff_make(p, k)
    rng = np.random.default_rng(seed)
    vals = rng.integers(0, p, size=(6, 5, k))
    flat, best_j = canonical_batch(vals, F)
    for r in range(vals.shape[0]):
        t = [FFElement(F, tuple(int(x) for x in vals[r, i])) for i in range(vals.shape[1])]
        payload, j = canonical_form(t, F)
        assert bytes(flat[r].astype(np.uint8)) == payload
        assert best_j[r] == j


def test_candidate_line_roundtrip():
    c = CongruenceCandidate(59, "4332.2.a.e", "4332.2.a.f", 0, 0, 0, 997)
    assert c.line() == "59 | 4332.2.a.e | 4332.2.a.f | 0 | 0 | 0 | 997"
    assert parse_candidates(format_candidates([c, c])) == [c]
    with pytest.raises(SieveError):
        CongruenceCandidate(59, "4332.2.a.f", "4332.2.a.e", 0, 0, 0)


@pytest.fixture(scope="module")
def level4332():
    return [f for f in parse_dataset(DATA / "table_pairs.dat") if f.level == 4332]


def test_sieve_pass_finds_the_59_pair(level4332):
    found = set()
    for L in default_sets():
        found |= set(sieve_pass(level4332, 59, L))
    assert CongruenceCandidate(59, "4332.2.a.e", "4332.2.a.f", 0, 1, 0) in found


def test_refine_keeps_the_59_pair(level4332):
    forms = {f.label: f for f in level4332}
    c = CongruenceCandidate(59, "4332.2.a.e", "4332.2.a.f", 0, 1, 0)
    assert refine(c, forms, 997) == CongruenceCandidate(59, "4332.2.a.e", "4332.2.a.f", 0, 1, 0, 997)
    # both fields split at 59; the other pairing of primes is not congruent
    assert refine(CongruenceCandidate(59, "4332.2.a.e", "4332.2.a.f", 0, 0, 0), forms, 997) is None


def test_prime_dividing_the_level_is_still_sieved():
    # 29 divides 5742; the hashed a_l have l prime to the level, so the pair is visible
    forms = [f for f in parse_dataset(DATA / "table_pairs.dat") if f.level == 5742]
    found = run_sieve(forms, [29], default_sets(), 997)
    assert {(c.label_f, c.label_g) for c in found} == {("5742.2.a.bk", "5742.2.a.bl")}


def test_sieve_pass_needs_two_forms(level11):
    assert sieve_pass([level11], 7, L0) == []
    with pytest.raises(SieveError):
        sieve_pass([level11], 4001, L0)
    with pytest.raises(SieveError):
        sieve_pass([level11], 3, L0)


def _pair(seed, p, N=35, M=35):
    return congruent_rational_pair(random.Random(seed), N, M, p)


def test_perturbation_outside_the_set_is_still_a_candidate():
    p = 11
    f, g = _pair(1, p)
    # move a_2 of g to a value that is not congruent mod p; 2 is not in the set
    vals = {ell: int(v[0]) for ell, v in g.eigenvalues.items()}
    vals[2] = next(x for x in range(-2, 3) if (x - int(f.a(2)[0])) % p)
    g2 = rational(g.label, vals)
    assert sieve_pass([f, g2], p, L0) == [CongruenceCandidate(p, f.label, g.label, 0, 0, 0)]


def test_refine_rejects_a_violation_at_503():
    p = 13
    f, g = _pair(2, p)
    vals = {ell: int(v[0]) for ell, v in g.eigenvalues.items()}
    vals[503] = int(f.a(503)[0]) + (1 if int(f.a(503)[0]) < 40 else -1)
    g2 = rational(g.label, vals)
    forms = {f.label: f, g2.label: g2}
    c = CongruenceCandidate(p, f.label, g.label, 0, 0, 0)
    assert refine(c, forms, 997) is None
    assert refine(c, forms, 500).refined_to == 500
    assert refine(c, forms, 0) == c
    with pytest.raises(SieveError):
        refine(c, forms, 2000)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([5, 7, 11, 13, 17, 23, 29, 31, 59]),
       st.sampled_from([(35, 35), (11, 11), (14, 21), (143, 11), (6, 10)]))
def test_completeness_for_lifted_pairs(seed, p, levels):
    N, M = levels
    if N % p == 0 or M % p == 0:
        return
    try:
        f, g = congruent_rational_pair(random.Random(seed), N, M, p)
    except ValueError:
        return
    found = sieve_pass([f, g], p, L0)
    lf, lg = sorted((f.label, g.label))
    assert CongruenceCandidate(p, lf, lg, 0, 0, 0) in found


@settings(max_examples=10, deadline=None)
@given(st.permutations(range(6)))
def test_sieve_pass_ignores_input_order(order):
    forms = [*_pair(3, 7), *_pair(4, 7, 6, 10), rational("77.2.a.a", random_rational_values(random.Random(5), 77)),
             quadratic("7.2.a.a", SQRT2, random_sqrt2_values(random.Random(6), 7))]
    base = sieve_pass(forms, 7, L0)
    assert sieve_pass([forms[i] for i in order], 7, L0) == base


def test_frobenius_twist_at_an_inert_prime():
    p = 11  # inert in Q(sqrt 2)
    f = quadratic("15.2.a.a", SQRT2, random_sqrt2_values(random.Random(8), 15))
    g = conjugate_partner(random.Random(9), f, "15.2.a.b", p)
    assert sieve_pass([f, g], p, L0) == [CongruenceCandidate(p, f.label, g.label, 0, 0, 1)]
    forms = {f.label: f, g.label: g}
    assert refine(sieve_pass([f, g], p, L0)[0], forms, 997).twist == 1


def test_split_prime_pairs_swapped_handles():
    p = 17  # split in Q(sqrt 2)
    f = quadratic("15.2.a.a", SQRT2, random_sqrt2_values(random.Random(8), 15))
    g = conjugate_partner(random.Random(9), f, "15.2.a.b", p)
    got = sieve_pass([f, g], p, L0)
    assert got == [CongruenceCandidate(p, f.label, g.label, 0, 1, 0), CongruenceCandidate(p, f.label, g.label, 1, 0, 0)]


def test_run_sieve_is_independent_of_jobs():
    forms = [*_pair(10, 11), *_pair(11, 7, 6, 10), *_pair(12, 7, 11, 143)]
    primes = [5, 7, 11, 13, 17, 19, 23]
    one = run_sieve(forms, primes, default_sets()[:2], 997, jobs=1)
    two = run_sieve(forms, primes, default_sets()[:2], 997, jobs=3)
    assert one == two
    assert {(c.p, c.label_f, c.label_g, c.refined_to) for c in one} >= {
        (11, "35.2.a.a", "35.2.a.b", 997), (7, "10.2.a.b", "6.2.a.a", 997), (7, "11.2.a.a", "143.2.a.b", 997)
    }


def test_handle_for_bounds(level11):
    assert handle_for(level11, 13, 0).p == 13
    with pytest.raises(SieveError):
        handle_for(level11, 13, 1)

