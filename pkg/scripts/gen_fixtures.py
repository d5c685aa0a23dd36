"""Regenerate the newform fixture datasets from scratch with PARI/GP.

Requires the optional ``cypari2`` dependency (``pip install .[fixtures]``).
The library itself never imports PARI; this script only produces the
``congsieve-dataset v1`` files under ``tests/data``.

For every requested level the new subspace of S_2(Gamma_0(N)) is split into
Galois orbits of dimension <= 2.  Orbits are labelled the LMFDB way: sorted by
dimension, then lexicographically by the trace form (Tr a_1, Tr a_2, ...).
Analytic ranks are the order of vanishing at s = 1 of the L-function of one
real embedding; the root number is the sign for which the functional equation
checks out.

Two backends give the same orbits, fields and labels, possibly with a different
choice of conjugate root: ``--method mf`` (mfsplit and mfcoefs) and
``--method ms`` (modular symbols, one Hecke matrix per prime).  The second is
much faster when the new space is large, e.g. at levels 8775 and 9603.

    python scripts/gen_fixtures.py --levels 1058 4332 --out tests/data/x.dat
    python scripts/gen_fixtures.py --levels 9603 --method ms --no-rank --out tests/data/level9603.dat
"""

from __future__ import annotations

import argparse
import sys
import time
from fractions import Fraction
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from congsieve.formstore import NewformRecord, save_dataset  # noqa: E402
from congsieve.splitting import CoeffField  # noqa: E402
from congsieve.util import primes_up_to  # noqa: E402

COEFF_BOUND = 997
NMAX = 1000


def letters(i: int) -> str:
    # a..z, ba, bb, ... (LMFDB base-26 with a = 0)
    s = ""
    while True:
        s = chr(ord("a") + i % 26) + s
        i //= 26
        if i == 0:
            return s


# a_n for n <= B from the prime eigenvalues v[l] by the Hecke recursion
_GP_AN = """
an_from_primes(v, N, B) = {
  my(a = vector(B));
  a[1] = 1;
  for (n = 2, B,
    my(f = factor(n), r = 1);
    for (i = 1, #f~,
      my(l = f[i, 1], k = f[i, 2], x0 = 1, x1 = v[l], x2);
      if (N % l == 0,
        r *= v[l]^k,
        for (j = 2, k, x2 = v[l] * x1 - l * x0; x0 = x1; x1 = x2);
        r *= x1));
    a[n] = r);
  concat([0], a);
}
"""


def _mf_orbits(pari, N: int, maxdim: int) -> None:
    """Set A = [[P, a], ...] with a[n + 1] = a_n as polynomials in y mod P."""
    pari(f"mf=mfinit([{N},2],0); S=mfsplit(mf,{maxdim}); vF=S[1]; vK=S[2]; M=mfcoefs(mf,{NMAX});")
    pari("A=vector(#vK,i,my(c=M*vF[,i]); c=c/c[2]; [vK[i], vector(#c,n,lift(c[n]))]);")


def _ms_orbits(pari, N: int, maxdim: int) -> None:
    """Same output as _mf_orbits, from modular symbols.

    One Hecke matrix per prime on the sum of the small orbits; in each 2-dimensional
    block T_l = x + y T_g for a fixed non-scalar T_g, so a_l = x + y lambda_g.
    """
    pari(_GP_AN)
    pari(f"M=msinit({N},2,1); W=mssplit(M,msnew(M),{maxdim});")
    pari("H=Mat(concat(vector(#W,i,W[i][1]))); D=vector(#W,i,#W[i][1]); Off=vector(#W,i,sum(j=1,i-1,D[j]));")
    pari(f"Tl=vector({NMAX}); forprime(l=2,{NMAX},Tl[l]=mshecke(M,l,H));")
    pari(f"""A=vector(#W,i,
      my(o=Off[i], d=D[i], blk=(l)->Tl[l][o+1..o+d,o+1..o+d], v=vector({NMAX}), P, g, phi);
      if(d==1, P=y; forprime(l=2,{NMAX},v[l]=Mod(blk(l)[1,1],y)),
        g=0; forprime(l=2,{NMAX}, if(!g && blk(l)!=blk(l)[1,1]*matid(2), g=l));
        my(Bg=blk(g), r=polredbest(charpoly(Bg,y),1)); P=r[1]; phi=r[2];
        forprime(l=2,{NMAX},
          my(B=blk(l), c=if(Bg[1,2], B[1,2]/Bg[1,2], B[2,1]/Bg[2,1]));
          v[l]=(B[1,1]-c*Bg[1,1])+c*phi));
      [P, apply(lift, an_from_primes(v, {N}, {NMAX}))]);""")


def orbits_at_level(pari, N: int, maxdim: int, want_rank: bool, method: str = "mf"):
    (_ms_orbits if method == "ms" else _mf_orbits)(pari, N, maxdim)
    count = int(pari("#A"))
    orbits = []
    for i in range(1, count + 1):
        d = int(pari(f"poldegree(A[{i}][1])"))
        if d == 1:
            traces = [int(x) for x in pari(f"A[{i}][2]")[1:]]
        else:
            traces = [int(x) for x in pari(f"my(P=A[{i}][1]); apply(t->trace(Mod(t,P)), A[{i}][2])")[1:]]
        orbits.append((d, traces, i))
    orbits.sort(key=lambda o: (o[0], o[1]))

    records = []
    for idx, (d, traces, i) in enumerate(orbits):
        label = f"{N}.2.a.{letters(idx)}"
        pari(f"P=A[{i}][1]; a=A[{i}][2];")
        if d == 1:
            poly = [0, 1]
            disc = 1
        else:
            poly = [int(x) for x in pari("Vecrev(P)")]
            disc = int(pari("nfdisc(P)"))
        eig = {}
        for ell in primes_up_to(COEFF_BOUND):
            if d == 1:
                eig[ell] = (Fraction(str(pari(f"a[{ell + 1}]"))),)
            else:
                coords = pari(f"Vecrev(a[{ell + 1}],{d})")
                eig[ell] = tuple(Fraction(str(x)) for x in coords)
        rank = analytic_rank(pari, N, d) if want_rank else 0
        records.append(
            NewformRecord(
                label=label,
                level=N,
                field=CoeffField(tuple(poly), disc),
                eigenvalues=eig,
                coeff_bound=COEFF_BOUND,
                analytic_rank=rank,
            )
        )
        print(f"  {label} d={d} poly={poly} rank={rank}", file=sys.stderr)
    return records


def analytic_rank(pari, N: int, d: int) -> int:
    if d == 1:
        pari("an=vector(#a-1,n,a[n+1]*1.);")
    else:
        pari("r=polroots(P)[1]; an=vector(#a-1,n,real(subst(a[n+1],y,r)));")
    best = None
    for eps in (1, -1):
        pari(f"L=lfuncreate([an,0,[0,1],2,{N},{eps}]);")
        err = int(pari("lfuncheckfeq(L)"))
        if best is None or err < best[0]:
            best = (err, eps)
    if best[0] > -20:
        raise RuntimeError(f"functional equation check failed at level {N}: {best}")
    pari(f"L=lfuncreate([an,0,[0,1],2,{N},{best[1]}]);")
    return int(pari("lfunorderzero(L)"))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--levels", type=int, nargs="+", required=True)
    ap.add_argument("--maxdim", type=int, default=2)
    ap.add_argument("--no-rank", action="store_true")
    ap.add_argument("--method", choices=["mf", "ms"], default="mf",
                    help="mf: mfsplit and mfcoefs; ms: modular symbols, faster at large levels")
    ap.add_argument("--only", nargs="*", default=None, help="keep only these labels")
    ap.add_argument("--out", type=Path, required=True)
    args = ap.parse_args(argv)

    import cypari2

    pari = cypari2.Pari()
    pari.allocatemem(3 * 10**9)
    pari.default("realprecision", 19)

    records = []
    for N in args.levels:
        t = time.time()
        print(f"level {N}", file=sys.stderr)
        recs = orbits_at_level(pari, N, args.maxdim, not args.no_rank, args.method)
        if args.only:
            recs = [r for r in recs if r.label in args.only]
        records.extend(recs)
        print(f"  done in {time.time() - t:.1f}s", file=sys.stderr)
    save_dataset(records, args.out)


if __name__ == "__main__":
    main()
