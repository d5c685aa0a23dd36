"""Command line entry point: cover, sieve, certify, match, visibility.

Exit codes: 0 success, 1 domain failure (coverage witness, refuted or blocked
pairs, unmatched curves), 2 usage or configuration error, 3 invalid data.
"""

from __future__ import annotations

import argparse
import math
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .curves import Ambiguous, CurveError, NoMatch, has_good_reduction, match_form, point_count
from .formstore import DatasetError, index_by_label, load_curves, load_principality, load_tamagawa, parse_dataset, parse_label
from .prover import CertifiedPair, CertifyError, certify_candidate
from .sieve import PrimeSet, SieveError, coverage_check, default_sets, parse_candidates, parse_sets, run_sieve
from .util import primes_up_to
from .visibility import render_lines, render_table, run_pipeline

EXIT_OK, EXIT_DOMAIN, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3
P_MIN, P_MAX = 5, 4000
LEVEL_MAX = 10000

log = logging.getLogger("congsieve")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    dataset: Path | None = None
    tamagawa: Path | None = None
    curves: Path | None = None
    principality: Path | None = None
    p_min: int = P_MIN
    p_max: int = P_MAX
    sets: list[PrimeSet] = field(default_factory=default_sets)
    refine_bound: int = 997
    out: Path | None = None
    jobs: int = 1

    def validate(self) -> None:
        if self.p_min < P_MIN:
            raise ConfigError(f"--p-min must be at least {P_MIN}")
        if self.p_max > P_MAX or self.p_max < self.p_min:
            raise ConfigError(f"--p-max must lie in [p-min, {P_MAX}]")
        if self.jobs < 1:
            raise ConfigError("--jobs must be positive")
        if self.refine_bound < 0:
            raise ConfigError("--refine-bound must be non-negative")

    def primes(self) -> list[int]:
        return [p for p in primes_up_to(self.p_max) if p >= self.p_min]


class _JsonFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps({"level": record.levelname, "logger": record.name, "event": record.getMessage()})


def _setup_logging() -> None:
    path = os.environ.get("CONGSIEVE_LOG")
    root = logging.getLogger("congsieve")
    root.setLevel(logging.INFO)
    root.propagate = False
    for h in list(root.handlers):
        root.removeHandler(h)
        h.close()
    if path:
        h = logging.FileHandler(path, encoding="utf-8")
        h.setFormatter(_JsonFormatter())
        root.addHandler(h)
    else:
        root.addHandler(logging.NullHandler())


def _emit(cfg: RunConfig, name: str, text: str) -> None:
    if cfg.out is None:
        sys.stdout.write(text)
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / name).write_text(text, encoding="utf-8")


def _load_forms(cfg: RunConfig):
    if cfg.dataset is None:
        raise ConfigError("--dataset is required")
    forms = parse_dataset(cfg.dataset)
    short = [f.label for f in forms if f.coeff_bound < cfg.refine_bound]
    if short:
        raise ConfigError(f"--refine-bound {cfg.refine_bound} exceeds the coefficients of {short[0]}")
    return forms


def cmd_cover(cfg: RunConfig, level_max: int = LEVEL_MAX) -> int:
    verdict = coverage_check(level_max, cfg.sets)
    if verdict.ok:
        _emit(cfg, "cover.txt", f"covered | {level_max} | {len(cfg.sets)} sets\n")
        return EXIT_OK
    n, m = verdict.witness
    _emit(cfg, "cover.txt", f"uncovered | {level_max} | {n} | {m}\n")
    return EXIT_DOMAIN


def cmd_sieve(cfg: RunConfig) -> int:
    forms = _load_forms(cfg)
    cands = run_sieve(forms, cfg.primes(), cfg.sets, cfg.refine_bound, jobs=cfg.jobs)
    _emit(cfg, "candidates.txt", "".join(c.line() + "\n" for c in cands))
    return EXIT_OK


def _certify_chunk(args):
    forms, cands = args
    by_label = index_by_label(forms)
    return [certify_candidate(c, by_label).line() for c in cands]


def cmd_certify(cfg: RunConfig, candidates: Path) -> int:
    forms = _load_forms(cfg)
    cands = sorted(parse_candidates(candidates.read_text(encoding="utf-8")))
    labels = {f.label for f in forms}
    for c in cands:
        if c.label_f not in labels or c.label_g not in labels:
            raise ConfigError(f"candidate {c.line()} names a form outside the dataset")
    if cfg.jobs > 1 and len(cands) > 1:
        chunks = [cands[i::cfg.jobs] for i in range(cfg.jobs)]
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            lines = [l for part in ex.map(_certify_chunk, [(forms, ch) for ch in chunks if ch]) for l in part]
    else:
        lines = _certify_chunk((forms, cands))
    lines.sort(key=_cert_key)
    _emit(cfg, "certificates.txt", "".join(l + "\n" for l in lines))
    refuted = any(CertifiedPair.from_line(l).verdict == "Refuted" for l in lines)
    return EXIT_DOMAIN if refuted else EXIT_OK


def _cert_key(line: str):
    c = CertifiedPair.from_line(line)
    return c.p, c.label_f, c.label_g, c.handle_f, c.handle_g


def cmd_match(cfg: RunConfig, primes: Sequence[int] | None = None) -> int:
    forms = [f for f in _load_forms(cfg) if f.field.d == 2]
    if cfg.curves is None:
        raise ConfigError("--curves is required")
    curves = load_curves(cfg.curves)
    out, status = [], EXIT_OK
    for curve in sorted(curves, key=lambda c: c.label):
        try:
            level = parse_label(curve.label)[0]
            cands = [f for f in forms if f.level == level]
        except ValueError:
            cands = forms
        bad = 2 * math.prod(f.level for f in cands)
        probe = list(primes) if primes else [l for l in primes_up_to(200) if bad % l and has_good_reduction(curve, l)][:3]
        counts = [point_count(curve, ell) for ell in probe]
        out.extend(pc.line(curve.label) + "\n" for pc in counts)
        res = match_form(curve, cands, probe)
        if isinstance(res, Ambiguous):
            out.append(f"{curve.label} | match | Ambiguous:{','.join(res.labels)}\n")
            status = EXIT_DOMAIN
        elif isinstance(res, NoMatch):
            out.append(f"{curve.label} | match | NoMatch\n")
            status = EXIT_DOMAIN
        else:
            out.append(f"{curve.label} | match | {res}\n")
    _emit(cfg, "match.txt", "".join(out))
    return status


def cmd_visibility(cfg: RunConfig, certificates: Path) -> int:
    forms = index_by_label(_load_forms(cfg))
    tam = load_tamagawa(cfg.tamagawa) if cfg.tamagawa else {}
    flags = load_principality(cfg.principality) if cfg.principality else {}
    pairs = [
        CertifiedPair.from_line(l)
        for l in certificates.read_text(encoding="utf-8").splitlines()
        if l.strip() and not l.startswith("#")
    ]
    verdicts = run_pipeline(pairs, forms, tam, flags)
    table, lines = render_table(verdicts), render_lines(verdicts)
    if cfg.out is None:
        sys.stdout.write(table + "\n" + lines)
    else:
        _emit(cfg, "visibility_table.txt", table)
        _emit(cfg, "visibility.txt", lines)
    return EXIT_OK if all(v.complete for v in verdicts) else EXIT_DOMAIN


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dataset", type=Path)
    common.add_argument("--tamagawa", type=Path)
    common.add_argument("--curves", type=Path)
    common.add_argument("--principality", type=Path, help="principality flags for fields of degree > 2")
    common.add_argument("--p-min", type=int, default=P_MIN)
    common.add_argument("--p-max", type=int, default=P_MAX)
    common.add_argument("--refine-bound", type=int, default=997)
    common.add_argument("--sets", default="default", help="'default' or a file with one prime set per line")
    common.add_argument("--out", type=Path, help="output directory (default: stdout)")
    common.add_argument("--jobs", type=int, default=1)

    ap = argparse.ArgumentParser(prog="congsieve", description="Congruences between weight-2 newforms.")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("cover", parents=[common], help="check that the prime sets cover all level pairs")
    p.add_argument("--level-max", type=int, default=LEVEL_MAX)
    sub.add_parser("sieve", parents=[common], help="hash sieve for congruent pairs")
    p = sub.add_parser("certify", parents=[common], help="certify sieve candidates")
    p.add_argument("candidates", type=Path)
    p = sub.add_parser("match", parents=[common], help="match genus-2 curves to newform orbits")
    p.add_argument("--primes", type=int, nargs="+")
    p = sub.add_parser("visibility", parents=[common], help="filter certified pairs for visible Sha")
    p.add_argument("certificates", type=Path)
    return ap


def _config(args) -> RunConfig:
    if args.sets == "default":
        sets = default_sets()
    else:
        sets = parse_sets(Path(args.sets).read_text(encoding="utf-8"))
        if not sets:
            raise ConfigError(f"no prime sets in {args.sets}")
    cfg = RunConfig(
        dataset=args.dataset,
        tamagawa=args.tamagawa,
        curves=args.curves,
        principality=args.principality,
        p_min=args.p_min,
        p_max=args.p_max,
        sets=sets,
        refine_bound=args.refine_bound,
        out=args.out,
        jobs=args.jobs,
    )
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        cfg = _config(args)
        if args.command == "cover":
            return cmd_cover(cfg, args.level_max)
        if args.command == "sieve":
            return cmd_sieve(cfg)
        if args.command == "certify":
            return cmd_certify(cfg, args.candidates)
        if args.command == "match":
            return cmd_match(cfg, args.primes)
        return cmd_visibility(cfg, args.certificates)
    except DatasetError as exc:
        print(f"congsieve: invalid data\n{exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, SieveError, CertifyError, CurveError, OSError, KeyError) as exc:
        print(f"congsieve: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
