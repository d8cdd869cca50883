"""Command-line entry point.

Exit codes: 0 on success or a passing check, 1 when a check runs and fails,
2 on usage, input or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

from . import __version__
from .census import CACHE_VERSION, CensusTooLarge, load_census, run_census
from .certificates import (
    ASPHERICITY_THRESHOLD,
    DEFAULT_MAX_VERTICES,
    densest_subcomplex,
    tetrahedron_boundaries,
    union_bound_value,
)
from .complex import ComplexFormatError, read_complex
from .homology import h1
from .sampler import RNG_NAME, RNG_VERSION, SampleRecord, sample_many
from .torsion_stats import (
    MIN_SAMPLES,
    TooFewSamples,
    compare_exact,
    compare_to_cohen_lenstra,
    expected_torsion_bounds,
)
from .census import torsion_distribution

RECORD_FORMAT_VERSION = 1
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    seeds: list[int] = field(default_factory=list)
    versions: dict = field(default_factory=dict)
    started: str = ""
    wall_time_s: float = 0.0
    outputs: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(asdict(self), indent=2) + "\n")


def _versions() -> dict:
    return {
        "hypertrees": __version__,
        "rng": f"{RNG_NAME}/v{RNG_VERSION}",
        "sample_record_format": RECORD_FORMAT_VERSION,
        "census_cache_format": CACHE_VERSION,
    }


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def _emit(args, obj, text: str | None = None) -> None:
    if args.json or text is None:
        print(json.dumps(obj, indent=2))
    else:
        print(text)


def _threshold(s: str | None) -> Fraction | None:
    if s is None:
        return None
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad threshold {s!r}; use e.g. 1.5 or 47/46")


# ---------------------------------------------------------------- commands


def cmd_sample(args, man: RunManifest) -> int:
    if args.n < 3:
        raise UsageError("n must be at least 3")
    if args.count < 0:
        raise UsageError("count must be non-negative")
    threads = max(1, min(args.threads, args.count or 1))
    recs = sample_many(args.n, args.count, method=args.method, seed=args.seed, threads=threads,
                       mh_steps=args.mh_steps, backend=args.backend, timing=args.timing)
    man.seeds = [args.seed + j for j in range(threads)]
    man.extra = {"n": args.n, "count": args.count, "method": args.method, "mh_steps": args.mh_steps,
                 "threads": threads}
    lines = "".join(_dump(r.to_json()) + "\n" for r in recs)
    if args.out in (None, "-"):
        sys.stdout.write(lines)
    else:
        with open(args.out, "a") as fh:
            fh.write(lines)
        man.outputs.append(args.out)
    return EXIT_OK


def cmd_census(args, man: RunManifest) -> int:
    try:
        res = (load_census(args.n, cap=args.cap, threads=args.threads, use_cache=not args.no_cache)
               if args.n <= 6 else run_census(args.n, cap=args.cap, threads=args.threads))
    except CensusTooLarge as exc:
        raise UsageError(str(exc))
    summary = {
        "n": res.n,
        "total": res.total,
        "kalai_sum": str(res.kalai_sum),
        "kalai_expected": str(res.kalai_expected),
        "pass": res.passed,
        "histogram": [{"torsion_factors": list(k), "count": c, "weighted_count": w}
                      for k, c, w in res.histogram_rows()],
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        jpath = out / f"census-n{args.n}.json"
        cpath = out / f"census-n{args.n}.csv"
        jpath.write_text(_dump(res.to_json()) + "\n")
        rows = ["torsion_factors,count,weighted_count"]
        for k, c, w in res.histogram_rows():
            rows.append(f"{' '.join(map(str, k)) or '1'},{c},{w}")
        cpath.write_text("\n".join(rows) + "\n")
        man.outputs += [str(jpath), str(cpath)]
    text = "\n".join(
        [f"N({res.n}) = {res.total}", f"sum |H1|^2 = {res.kalai_sum} (expected {res.kalai_expected})"]
        + [f"  torsion {list(k) or [1]}: {c} complexes, weight {w}" for k, c, w in res.histogram_rows()]
    )
    _emit(args, summary, text)
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_verify(args, man: RunManifest) -> int:
    try:
        res = (load_census(args.n, threads=args.threads, use_cache=not args.no_cache)
               if args.n <= 6 else run_census(args.n, cap=args.cap, threads=args.threads))
    except CensusTooLarge as exc:
        raise UsageError(str(exc))
    k = (args.n - 2) * (args.n - 3) // 2
    obj = {"n": args.n, "total": res.total, "kalai_sum": str(res.kalai_sum),
           "kalai_expected": str(res.kalai_expected), "pass": res.passed}
    rel = "=" if res.passed else "!="
    _emit(args, obj, f"{res.kalai_sum} {rel} {args.n}^{k}  ({'pass' if res.passed else 'FAIL'}; {res.total} 2-trees)")
    return EXIT_OK if res.passed else EXIT_FAIL


def cmd_homology(args, man: RunManifest) -> int:
    c = read_complex(args.file)
    betti, tors = h1(c)
    obj = {"n": c.n, "faces": len(c), "betti1": betti, "factors": list(tors.invariant_factors),
           "order": tors.order if betti == 0 else None}
    text = " ".join(map(str, tors.invariant_factors)) or "0"
    if betti:
        text = f"Z^{betti}" + ("" if tors.is_trivial else " + " + text)
    _emit(args, obj, text)
    return EXIT_OK


def _scan_one(c, args, thr: Fraction | None, cid: str | None):
    rep = densest_subcomplex(c, args.max_vertices, threshold=thr, budget=args.budget, complex_id=cid)
    if args.aspherical:
        rep.tetrahedra = tetrahedron_boundaries(c)
    return rep


def cmd_scan(args, man: RunManifest) -> int:
    thr = _threshold(args.threshold)
    if thr is None and args.aspherical:
        thr = ASPHERICITY_THRESHOLD
    if args.max_vertices < 3:
        raise UsageError("--max-vertices must be at least 3")
    path = Path(args.file)
    if path.suffix == ".jsonl":
        reports = []
        for i, line in enumerate(path.read_text().splitlines()):
            if line.strip():
                rec = SampleRecord.from_json(json.loads(line))
                reports.append(_scan_one(rec.faces, args, thr, f"{path.name}:{i + 1}"))
        passed = sum(1 for r in reports if r.passed)
        obj = {"reports": [r.to_json() for r in reports], "count": len(reports),
               "passed": passed if thr is not None else None,
               "exhaustive": all(r.exhaustive for r in reports)}
        print(json.dumps(obj, indent=2))
        return EXIT_OK
    c = read_complex(path)
    rep = _scan_one(c, args, thr, path.name)
    print(json.dumps(rep.to_json(), indent=2))
    if rep.passed is False:
        return EXIT_FAIL
    return EXIT_OK


def cmd_torsion_dist(args, man: RunManifest) -> int:
    if args.census is not None:
        res = load_census(args.census, threads=args.threads)
        cmp = compare_exact(torsion_distribution(res), args.p)
        man.extra = {"census_n": args.census}
    else:
        if not args.file:
            raise UsageError("give a JSONL sample file or --census N")
        groups = []
        with open(args.file) as fh:
            for line in fh:
                if line.strip():
                    groups.append(SampleRecord.from_json(json.loads(line)).torsion)
        try:
            cmp = compare_to_cohen_lenstra(groups, args.p, min_samples=args.min_samples)
        except TooFewSamples as exc:
            raise UsageError(str(exc))
        man.extra = {"samples": len(groups)}
    if args.out:
        Path(args.out).write_text(cmp.to_csv())
        man.outputs.append(args.out)
    if args.json:
        print(json.dumps(cmp.to_json(), indent=2))
    elif not args.out:
        sys.stdout.write(cmp.to_csv())
    else:
        print(f"TV distance {cmp.tv:.6g} ({cmp.samples or 'exact'} samples)")
    return EXIT_OK


def cmd_bounds(args, man: RunManifest) -> int:
    b = expected_torsion_bounds(args.n)
    ub = union_bound_value(args.n, args.max_vertices)
    obj = {"n": args.n, "log_expected_torsion": {"stated_lower": b.stated_lower, "proof_lower": b.proof_lower,
                                                 "trivial_upper": b.trivial_upper},
           "union_bound": {"max_vertices": args.max_vertices, "value": float(ub)}}
    text = (f"log E|H1| bounds at n={args.n}: stated lower {b.stated_lower:.6g}, "
            f"square-root lower {b.proof_lower:.6g}, upper {b.trivial_upper:.6g}\n"
            f"union bound (C'={args.max_vertices}): {float(ub):.6g}")
    _emit(args, obj, text)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--manifest", help="write the run manifest here (default: next to file outputs)")

    ap = argparse.ArgumentParser(prog="hypertrees", description="Random 2-dimensional hypertrees workbench.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="sample 2-trees to JSONL")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("-c", "--count", type=int, default=1)
    p.add_argument("--method", choices=["dpp", "mh"], default="dpp")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mh-steps", type=int, default=1000, help="burn-in and thinning for --method mh")
    p.add_argument("--backend", choices=["rational", "float"], default=None)
    p.add_argument("--timing", action="store_true", help="record per-sample wall time (output no longer reproducible)")
    p.add_argument("-o", "--out", help="append records here (default stdout)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("census", parents=[common], help="exhaustive census of 2-trees")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--cap", type=int, default=6)
    p.add_argument("--no-cache", action="store_true")
    p.add_argument("-o", "--out", help="directory for census-n<N>.json and .csv")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("verify", parents=[common], help="check sum |H1|^2 = n^C(n-2,2)")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--cap", type=int, default=6)
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("homology", parents=[common], help="H_1 of a complex file")
    p.add_argument("file")
    p.set_defaults(func=cmd_homology)

    p = sub.add_parser("scan", parents=[common], help="densest-subcomplex certificate")
    p.add_argument("file", help="complex file, or .jsonl of sample records")
    p.add_argument("--threshold", help="e.g. 1.5 or 47/46")
    p.add_argument("--max-vertices", type=int, default=DEFAULT_MAX_VERTICES)
    p.add_argument("--budget", type=int, default=None, help="max subsets to visit")
    p.add_argument("--aspherical", action="store_true", help="also look for tetrahedron boundaries")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("torsion-dist", parents=[common], help="compare to Cohen-Lenstra")
    p.add_argument("file", nargs="?")
    p.add_argument("-p", type=int, default=2)
    p.add_argument("--census", type=int, default=None, help="use the exact census law at this n")
    p.add_argument("--min-samples", type=int, default=MIN_SAMPLES)
    p.add_argument("-o", "--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_torsion_dist)

    p = sub.add_parser("bounds", parents=[common], help="expected-torsion and union bounds")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--max-vertices", type=int, default=DEFAULT_MAX_VERTICES)
    p.set_defaults(func=cmd_bounds)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    man = RunManifest(command=args.command, argv=argv, versions=_versions(),
                      started=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    t0 = time.perf_counter()
    try:
        code = args.func(args, man)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ComplexFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    man.wall_time_s = round(time.perf_counter() - t0, 3)
    target = args.manifest or (man.outputs[0] + ".manifest.json" if man.outputs else None)
    if target:
        try:
            man.write(Path(target))
        except OSError as exc:
            print(f"error: cannot write manifest: {exc}", file=sys.stderr)
            return EXIT_USAGE
    return code


if __name__ == "__main__":
    sys.exit(main())
