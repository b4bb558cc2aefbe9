"""rs-subspace-repair command line.

Exit codes: 0 success, 1 verification failure or infeasible parameters,
2 usage, parse or guard errors.
"""

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import galois

from .debug import DEBUG
from .gfield import FieldCtx, make_field_ctx
from .goodpair import (
    BAD_SCAN_GUARD,
    DEFAULT_TRIALS,
    GoodPair,
    InfeasibleParams,
    NotWeaklyGood,
    SchemeParams,
    SearchFailure,
    bad_set,
    corollary_bound,
    explicit_pair_mrm22,
    feasible,
    search_good_pair,
)
from .repair import (
    RepairScheme,
    SchemeError,
    composite_scheme_subfield,
    cut_set_bound,
    dm_scheme,
    execute_repair,
    naive_bandwidth,
    naive_repair,
    scheme_from_pair,
    simulate,
    verify_gw,
)
from .rscode import RsCode, random_codeword, shorten
from .subspace import GuardExceeded, Subspace, iter_subspaces, random_subspace, span, subfield_subspace
from .util import CODEWORD_STREAM, SUBSPACE_STREAM, format_bits, log, trial_rng

CONSTRUCTIONS = ("pair", "prop6", "prop7", "dm")


@dataclass
class RunConfig:
    command: str
    p: int = 2
    e: int = 1
    m: int = 4
    d: int = 2
    s: int = 1
    r: int = 2
    a: int = 1
    seed: int = 0
    trials: int = DEFAULT_TRIALS
    guard: int = BAD_SCAN_GUARD
    json_path: Optional[Path] = None
    out: Optional[Path] = None
    pair: Optional[Path] = None
    scheme: Optional[Path] = None
    construction: Optional[str] = None
    shorten: int = 0
    node: int = 0
    codewords: int = 3
    sample: int = 0

    @property
    def q(self) -> int:
        return self.p**self.e

    @property
    def params(self) -> SchemeParams:
        return SchemeParams(self.q, self.m, self.d, self.s, self.r)

    @property
    def ctx(self) -> FieldCtx:
        return make_field_ctx(self.p, self.e, self.m)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        p, e = args.p, args.e
        if args.q is not None:
            if not galois.is_prime_power(args.q):
                raise ValueError(f"q must be a prime power, got {args.q}")
            primes, exponents = galois.factors(args.q)
            p, e = int(primes[0]), int(exponents[0])
        if args.seed < 0 or args.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        cfg = cls(
            command=args.command,
            p=p,
            e=e,
            m=args.m,
            d=args.d,
            s=args.s,
            r=args.r,
            a=args.a,
            seed=args.seed,
            trials=args.trials,
            guard=args.guard,
            json_path=args.json,
            out=getattr(args, "out", None),
            pair=getattr(args, "pair", None),
            scheme=getattr(args, "scheme", None),
            construction=getattr(args, "construction", None),
            shorten=getattr(args, "shorten", 0),
            node=getattr(args, "node", 0),
            codewords=getattr(args, "codewords", 3),
            sample=getattr(args, "sample", 0),
        )
        # malformed scheme parameters are a usage error for every subcommand
        SchemeParams(cfg.q, cfg.m, cfg.d, cfg.s, cfg.r)
        if cfg.trials < 1 or cfg.codewords < 0 or cfg.sample < 0:
            raise ValueError("trials must be positive, codewords and sample non-negative")
        return cfg


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--q", type=int, default=None, help="base field order (overrides --p/--e)")
    parser.add_argument("--p", type=int, default=2, help="characteristic (default: 2)")
    parser.add_argument("--e", type=int, default=1, help="q = p^e (default: 1)")
    parser.add_argument("--m", type=int, default=4, help="extension degree (default: 4)")
    parser.add_argument("--d", type=int, default=2, help="dim U (default: 2)")
    parser.add_argument("--s", type=int, default=1, help="codimension exponent (default: 1)")
    parser.add_argument("--r", type=int, default=2, help="dim V, symbols per helper (default: 2)")
    parser.add_argument("--a", type=int, default=1, help="U is F_(q^a)-linear (default: 1)")
    parser.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    parser.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help=f"search trials (default: {DEFAULT_TRIALS})")
    parser.add_argument("--guard", type=int, default=BAD_SCAN_GUARD, help="enumeration guard")
    parser.add_argument("--json", type=Path, default=None, help="write a machine-readable report here")


def _add_scheme_source(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scheme", type=Path, default=None, help="scheme file written by build")
    parser.add_argument("--pair", type=Path, default=None, help="pair file written by search")
    parser.add_argument("--construction", choices=CONSTRUCTIONS, default=None)
    parser.add_argument("--shorten", type=int, default=0, help="shorten by this many positions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rs-subspace-repair",
        description="Repair schemes for Reed-Solomon codes on subspaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub_feasible = sub.add_parser("feasible", help="classify parameters and print the success bound")
    _add_common(sub_feasible)

    sub_search = sub.add_parser("search", help="search for a good pair")
    _add_common(sub_search)
    sub_search.add_argument("--out", type=Path, default=None, help="write the pair here")

    sub_build = sub.add_parser("build", help="build a repair scheme")
    _add_common(sub_build)
    _add_scheme_source(sub_build)
    sub_build.add_argument("--out", type=Path, default=None, help="write the scheme here")

    sub_verify = sub.add_parser("verify", help="check a scheme against the dual-codeword criterion")
    _add_common(sub_verify)
    _add_scheme_source(sub_verify)

    sub_repair = sub.add_parser("repair", help="repair one node of a random codeword")
    _add_common(sub_repair)
    _add_scheme_source(sub_repair)
    sub_repair.add_argument("--node", type=int, default=0)
    sub_repair.add_argument("--out", type=Path, default=None, help="write the transcript here")

    sub_simulate = sub.add_parser("simulate", help="repair every node of random codewords")
    _add_common(sub_simulate)
    _add_scheme_source(sub_simulate)
    sub_simulate.add_argument("--codewords", type=int, default=3)

    sub_table = sub.add_parser("table1", help="bandwidth comparison for the [14,10] and [64,48] codes")
    _add_common(sub_table)
    sub_table.add_argument("--codewords", type=int, default=2)

    sub_bad = sub.add_parser("badscan", help="exact Bad(U) census at tiny parameters")
    _add_common(sub_bad)
    sub_bad.add_argument("--sample", type=int, default=0, help="sample this many U instead of all")
    return parser


def _read_json(path: Path) -> Any:
    try:
        with open(path) as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc


def _write_json(path: Optional[Path], data: Any) -> None:
    if path is None:
        return
    with open(path, "w") as f:
        json.dump(data, f, indent=1)
        f.write("\n")


def _initial_subspace(cfg: RunConfig) -> Subspace:
    ctx = cfg.ctx
    rng = trial_rng(cfg.seed, SUBSPACE_STREAM)
    if cfg.a > 1:
        if cfg.d % cfg.a:
            raise ValueError(f"a={cfg.a} must divide d={cfg.d}")
        return subfield_subspace(ctx, cfg.a, cfg.d // cfg.a, rng)
    return random_subspace(ctx, cfg.d, rng)


def _feasibility_note(params: SchemeParams, a: int) -> None:
    report = feasible(params, a)
    if DEBUG:
        log(f"feasibility of {params}: {report.verdict.value}")
    if not report.ok:
        print(f"note: parameters are outside the search guarantee ({report.reason})")


def _scheme_for(cfg: RunConfig) -> RepairScheme:
    """Load --scheme, or build from --pair / --construction, then shorten."""
    if cfg.scheme is not None:
        try:
            return RepairScheme.from_dict(_read_json(cfg.scheme))
        except SchemeError as exc:
            raise ValueError(f"cannot load scheme: {exc}") from exc
    ctx = cfg.ctx
    pair = GoodPair.from_dict(_read_json(cfg.pair)) if cfg.pair is not None else None
    construction = cfg.construction or ("pair" if pair is not None else None)
    if construction == "pair" and pair is not None:
        _feasibility_note(pair.params, pair.U.subfield_degree or 1)
    elif construction == "prop6":
        _feasibility_note(cfg.params, 1)
    if construction == "pair":
        if pair is None:
            raise ValueError("construction pair needs --pair")
        scheme = scheme_from_pair(pair)
    elif construction == "prop6":
        scheme = scheme_from_pair(explicit_pair_mrm22(ctx, cfg.d, cfg.r, cfg.s))
    elif construction == "prop7":
        scheme = composite_scheme_subfield(ctx, cfg.d, cfg.s)
    elif construction == "dm":
        if pair is not None:
            code = RsCode.on_subspace(pair.U, pair.params.s)
        else:
            code = RsCode.on_subspace(span(ctx, ctx.basis.elems[: cfg.d]), cfg.s)
        scheme = dm_scheme(code)
    else:
        raise ValueError("need --scheme, --pair or --construction")
    if cfg.shorten:
        _, scheme = shorten(scheme.code, scheme=scheme, t=cfg.shorten)
    return scheme


def _codewords(scheme: RepairScheme, cfg: RunConfig) -> list:
    rng = trial_rng(cfg.seed, CODEWORD_STREAM)
    return [random_codeword(scheme.code, rng) for _ in range(cfg.codewords)]


def cmd_feasible(cfg: RunConfig) -> int:
    report = feasible(cfg.params, cfg.a)
    floor = corollary_bound(report.verdict)
    print(f"params: q={cfg.q} m={cfg.m} d={cfg.d} s={cfg.s} r={cfg.r} a={cfg.a}")
    print(f"verdict: {report.verdict.value} ({report.reason})")
    print(f"success probability >= {report.bound} ({float(report.bound):.4f})")
    if floor is not None:
        print(f"uniform floor: {floor}")
    _write_json(cfg.json_path, {**report.to_dict(), "params": cfg.params.to_dict()})
    return 0 if report.ok else 1


def cmd_search(cfg: RunConfig) -> int:
    U = _initial_subspace(cfg)
    try:
        result = search_good_pair(U, cfg.params, trials=cfg.trials, seed=cfg.seed)
    except InfeasibleParams as exc:
        print(f"[error] {exc}")
        return 1
    if isinstance(result, SearchFailure):
        print(f"no good pair in {result.trials} trials (success bound {result.bound})")
        _write_json(cfg.json_path, {"found": False, **result.to_dict()})
        return 1
    print(f"good pair after {result.trials} trials: rank(M2) = {result.rank_m2}")
    _write_json(cfg.out, result.to_dict())
    _write_json(cfg.json_path, {"found": True, "trials": result.trials, "rank_M2": result.rank_m2})
    return 0


def _scheme_summary(scheme: RepairScheme) -> dict:
    code = scheme.code
    return {
        "construction": scheme.construction,
        "n": code.n,
        "k": code.k,
        "m": scheme.ctx.m,
        "r": scheme.r,
        "bits": scheme.bandwidth,
    }


def cmd_build(cfg: RunConfig) -> int:
    scheme = _scheme_for(cfg)
    summary = _scheme_summary(scheme)
    print(
        f"{scheme.construction}: [{summary['n']},{summary['k']}] code, r={scheme.r}, "
        f"bandwidth {format_bits(scheme.bandwidth)} bits"
    )
    _write_json(cfg.out, scheme.to_dict())
    _write_json(cfg.json_path, summary)
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    scheme = _scheme_for(cfg)
    verdict = verify_gw(scheme)
    if verdict.ok:
        print(f"ok: {verdict.nodes_checked} nodes, max helper rank {verdict.max_helper_rank} <= r={scheme.r}")
    else:
        where = f"node {verdict.node}" + ("" if verdict.helper is None else f", helper {verdict.helper}")
        print(f"FAIL at {where}: {verdict.reason}")
    _write_json(cfg.json_path, verdict.to_dict())
    return 0 if verdict.ok else 1


def cmd_repair(cfg: RunConfig) -> int:
    scheme = _scheme_for(cfg)
    if cfg.node not in scheme.nodes:
        raise ValueError(f"node {cfg.node} is not covered by the scheme")
    codeword = random_codeword(scheme.code, trial_rng(cfg.seed, CODEWORD_STREAM))
    transcript = execute_repair(scheme, codeword, cfg.node)
    ok = bool(transcript.value == codeword[cfg.node])
    print(
        f"node {cfg.node}: {'exact' if ok else 'MISMATCH'}, "
        f"{len(transcript.helpers)} helpers, {format_bits(transcript.bits)} bits"
    )
    _write_json(cfg.out, transcript.to_dict(scheme.ctx))
    _write_json(cfg.json_path, {"node": cfg.node, "success": ok, "bits": transcript.bits})
    return 0 if ok else 1


def cmd_simulate(cfg: RunConfig) -> int:
    scheme = _scheme_for(cfg)
    report = simulate(scheme, _codewords(scheme, cfg))
    bits = ", ".join(format_bits(b) for b in sorted(report.bits))
    print(f"{len(report.rows)} repairs, {report.failures} failures, {bits} bits per repair")
    _write_json(cfg.json_path, {**report.to_dict(), "scheme": _scheme_summary(scheme)})
    return 0 if report.failures == 0 else 1


def _simulated_bits(scheme: RepairScheme, codewords: list) -> Any:
    report = simulate(scheme, codewords)
    if report.failures or len(report.bits) != 1:
        raise SchemeError(f"{scheme.construction}: {report.failures} failed repairs")
    return report.bits.pop()


def _naive_bits(code: RsCode, codewords: list) -> Any:
    for c in codewords:
        for i in range(code.n):
            if naive_repair(code, c, i).value != c[i]:
                raise SchemeError("naive repair mismatch")
    return naive_bandwidth(code)


def table1_rows(seed: int = 0, codewords: int = 2, trials: int = DEFAULT_TRIALS) -> list[dict]:
    """Bandwidths of the [14,10] code over GF(2^8) and the [64,48] code over GF(2^15)."""
    rows = []
    rng = trial_rng(seed, CODEWORD_STREAM)

    ctx8 = make_field_ctx(2, 1, 8)
    composite = composite_scheme_subfield(ctx8, 4, 2)
    code14, composite14 = shorten(composite.code, scheme=composite, t=2)
    words14 = [random_codeword(code14, rng) for _ in range(codewords)]
    dm14 = dm_scheme(code14)
    rows.append(_row("composite", code14, composite14.r, _simulated_bits(composite14, words14)))
    rows.append(_row("naive", code14, ctx8.m, _naive_bits(code14, words14)))
    rows.append(
        _row(
            "dm",
            code14,
            None,
            54,
            note=f"reported for an imbalanced variant (out of scope); uniform scheme gives {dm14.bandwidth}",
        )
    )

    ctx15 = make_field_ctx(2, 1, 15)
    U = subfield_subspace(ctx15, 3, 2, trial_rng(seed, SUBSPACE_STREAM))
    result = search_good_pair(U, SchemeParams(2, 15, 6, 4, 5), trials=trials, seed=seed)
    if isinstance(result, SearchFailure):
        raise SchemeError(f"no good pair for the [64,48] code in {trials} trials")
    pair_scheme = scheme_from_pair(result)
    code64 = pair_scheme.code
    words64 = [random_codeword(code64, rng) for _ in range(codewords)]
    rows.append(_row("good-pair", code64, pair_scheme.r, _simulated_bits(pair_scheme, words64)))
    rows.append(_row("naive", code64, ctx15.m, _naive_bits(code64, words64)))
    dm64 = dm_scheme(code64)
    rows.append(_row("dm", code64, dm64.r, _simulated_bits(dm64, words64)))
    return rows


def _row(name: str, code: RsCode, r: Optional[int], bits: Any, note: str = "") -> dict:
    q, m = code.ctx.q, code.ctx.m
    return {
        "scheme": name,
        "q": q,
        "m": m,
        "n": code.n,
        "k": code.k,
        "r": r,
        "bits": bits,
        "cut_set": round(cut_set_bound(code.n, code.k, m, q), 3),
        "note": note,
    }


def cmd_table1(cfg: RunConfig) -> int:
    rows = table1_rows(seed=cfg.seed, codewords=cfg.codewords, trials=cfg.trials)
    print(f"{'scheme':<10} {'q':>2} {'m':>3} {'n':>3} {'k':>3} {'r':>3} {'b':>4} {'cut-set':>8}")
    for row in rows:
        r = "-" if row["r"] is None else str(row["r"])
        line = (
            f"{row['scheme']:<10} {row['q']:>2} {row['m']:>3} {row['n']:>3} {row['k']:>3} "
            f"{r:>3} {format_bits(row['bits']):>4} {row['cut_set']:>8.3f}"
        )
        if row["note"]:
            line += f"  # {row['note']}"
        print(line)
    _write_json(cfg.json_path, {"rows": rows})
    return 0


def cmd_badscan(cfg: RunConfig) -> int:
    ctx = cfg.ctx
    params = cfg.params
    if cfg.sample:
        rng = trial_rng(cfg.seed, SUBSPACE_STREAM)
        spaces = [random_subspace(ctx, cfg.d, rng) for _ in range(cfg.sample)]
    else:
        spaces = list(iter_subspaces(ctx, cfg.d, guard=cfg.guard))
    expect_empty = cfg.r >= cfg.m - cfg.s
    counts = []
    for U in spaces:
        report = bad_set(U, cfg.s, cfg.r, guard=cfg.guard)
        counts.append({"U": U.key, "count": report.count, "within_bound": report.within_bound})
    dichotomy = all((c["count"] == 0) == expect_empty for c in counts)
    bounded = all(c["within_bound"] for c in counts)
    values = sorted({c["count"] for c in counts})
    print(f"{len(counts)} subspaces of dim {cfg.d}: |Bad(U)| in {values}")
    print(f"expected {'empty' if expect_empty else 'nonempty'}: {'ok' if dichotomy else 'VIOLATED'}")
    print(f"counting bound: {'ok' if bounded else 'VIOLATED'}")
    _write_json(
        cfg.json_path,
        {"params": params.to_dict(), "counts": counts, "dichotomy": dichotomy, "bounded": bounded},
    )
    return 0 if dichotomy and bounded else 1


COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "feasible": cmd_feasible,
    "search": cmd_search,
    "build": cmd_build,
    "verify": cmd_verify,
    "repair": cmd_repair,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "badscan": cmd_badscan,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.from_args(args)
        if DEBUG:
            log(f"running {cfg.command} with {cfg}")
        return COMMANDS[cfg.command](cfg)
    except NotWeaklyGood as exc:
        print(f"[error] {exc}")
        return 1
    except GuardExceeded as exc:
        print(f"[error] {exc}")
        return 2
    except (SchemeError, ValueError) as exc:
        print(f"[error] {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
