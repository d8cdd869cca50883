"""Exhaustive enumeration of 2-trees on small vertex sets.

The search walks triangles in lexicographic order and only extends sets
whose (reduced) boundary columns are independent over Q, keeping an
integer echelon basis per depth.  A branch is cut as soon as the current
set plus everything still available cannot reach full rank.
"""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from pathlib import Path
from typing import Iterable, Iterator

from .complex import Complex2, reduced_columns, triangle_index
from .homology import TorsionGroup
from .linalg import _bareiss, _dense_snf, rank_over_q, IntMatrix

log = logging.getLogger(__name__)

DEFAULT_CAP = 6
HARD_CAP = 7
CACHE_FORMAT = "hypertrees-census"
CACHE_VERSION = 1
CACHE_ENV = "HYPERTREES_CACHE"


class CensusTooLarge(RuntimeError):
    pass


def cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV)
    return Path(root) if root else Path.home() / ".cache" / "hypertrees"


def _check_cap(n: int, cap: int) -> None:
    if n < 3:
        raise ValueError("a 2-tree needs at least 3 vertices")
    if n > max(cap, DEFAULT_CAP) or n > HARD_CAP:
        raise CensusTooLarge(
            f"census at n={n} refused (cap {cap}); there are C({comb(n, 3)}, {comb(n - 1, 2)}) "
            f"= {comb(comb(n, 3), comb(n - 1, 2)):.3e} candidate face sets and a weighted "
            f"total of {n}^{comb(n - 2, 2)} = {n ** comb(n - 2, 2):.3e}"
        )
    if n == HARD_CAP:
        warnings.warn(
            f"census at n={n} visits on the order of 1e8-1e9 independent sets; expect hours",
            RuntimeWarning,
            stacklevel=3,
        )


def _dense_columns(n: int) -> list[list[int]]:
    r = comb(n - 1, 2)
    out = []
    for col in reduced_columns(n):
        v = [0] * r
        for i, s in col:
            v[i] = s
        out.append(v)
    return out


def _suffix_ranks(cols: list[list[int]]) -> list[int]:
    n = len(cols)
    out = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        m = IntMatrix.from_dense([list(row) for row in zip(*cols[i:])])
        out[i] = rank_over_q(m)
    return out


def _reduce(v: list[int], basis: list[tuple[int, list[int]]]) -> list[int] | None:
    for piv, b in basis:
        x = v[piv]
        if x:
            p = b[piv]
            v = [p * a - x * c for a, c in zip(v, b)]
            g = 0
            for a in v:
                if a:
                    g = math.gcd(g, a)
            if g > 1:
                v = [a // g for a in v]
    return v if any(v) else None


def _leaf_order(cols: list[list[int]], chosen: list[int]) -> tuple[int, tuple[int, ...]]:
    mat = [list(row) for row in zip(*(cols[i] for i in chosen))]
    _, det = _bareiss([row[:] for row in mat])
    order = abs(det)
    if order == 1:
        return 1, ()
    diag = _dense_snf(mat)
    return order, tuple(sorted(d for d in diag if d > 1))


def _search(n: int, first: int | None = None) -> Iterator[tuple[int, int, tuple[int, ...]]]:
    """Yield ``(mask, |H_1|, torsion factors)`` in lexicographic order of face sets.

    If ``first`` is given, only sets whose smallest triangle is ``first``.
    """
    cols = _dense_columns(n)
    total = len(cols)
    r = comb(n - 1, 2)
    suffix = _suffix_ranks(cols)
    chosen: list[int] = []
    basis: list[tuple[int, list[int]]] = []

    def rec(start: int):
        depth = len(chosen)
        if depth == r:
            order, tors = _leaf_order(cols, chosen)
            mask = 0
            for i in chosen:
                mask |= 1 << i
            yield mask, order, tors
            return
        stop = total - (r - depth) + 1
        if depth == 0 and first is not None:
            candidates = [first] if first < stop else []
        else:
            candidates = range(start, stop)
        for i in candidates:
            if depth + suffix[i] < r:
                break
            v = _reduce(cols[i], basis)
            if v is None:
                continue
            piv = next(k for k, a in enumerate(v) if a)
            chosen.append(i)
            basis.append((piv, v))
            yield from rec(i + 1)
            chosen.pop()
            basis.pop()

    yield from rec(0)


def enumerate_2trees(n: int, *, cap: int = DEFAULT_CAP) -> Iterator[Complex2]:
    """Every 2-tree on ``[n]`` exactly once, in lexicographic order of face sets."""
    _check_cap(n, cap)
    for mask, _, _ in _search(n):
        yield Complex2(n, mask)


@dataclass
class CensusResult:
    n: int
    total: int
    kalai_sum: int
    histogram: Counter = field(default_factory=Counter)
    records: list[tuple[int, tuple[int, ...]]] | None = None

    @property
    def kalai_expected(self) -> int:
        return self.n ** comb(self.n - 2, 2)

    @property
    def passed(self) -> bool:
        return self.kalai_sum == self.kalai_expected and sum(self.histogram.values()) == self.total

    def weighted_count(self, factors: tuple[int, ...]) -> int:
        return self.histogram[factors] * math.prod(factors) ** 2

    def histogram_rows(self) -> list[tuple[tuple[int, ...], int, int]]:
        return [(k, v, self.weighted_count(k)) for k, v in sorted(self.histogram.items())]

    def to_json(self) -> dict:
        out = {
            "format": CACHE_FORMAT,
            "version": CACHE_VERSION,
            "n": self.n,
            "total": self.total,
            "kalai_sum": str(self.kalai_sum),
            "histogram": [[list(k), v] for k, v in sorted(self.histogram.items())],
        }
        if self.records is not None:
            out["records"] = [[format(m, "x"), list(f)] for m, f in self.records]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CensusResult":
        if obj.get("format") != CACHE_FORMAT or obj.get("version") != CACHE_VERSION:
            raise ValueError("unsupported census file format/version")
        recs = obj.get("records")
        return cls(
            n=obj["n"],
            total=obj["total"],
            kalai_sum=int(obj["kalai_sum"]),
            histogram=Counter({tuple(k): v for k, v in obj["histogram"]}),
            records=None if recs is None else [(int(m, 16), tuple(f)) for m, f in recs],
        )


def _branch(args) -> list[tuple[int, int, tuple[int, ...]]]:
    n, first = args
    return list(_search(n, first))


def _stream(n: int, threads: int) -> Iterator[tuple[int, int, tuple[int, ...]]]:
    if threads <= 1:
        yield from _search(n)
        return
    # subtrees keyed by the smallest triangle; map() preserves submission order
    firsts = range(comb(n, 3))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for chunk in pool.map(_branch, [(n, f) for f in firsts]):
            yield from chunk


def run_census(n: int, *, cap: int = DEFAULT_CAP, threads: int = 1, keep_records: bool | None = None) -> CensusResult:
    _check_cap(n, cap)
    if keep_records is None:
        keep_records = n <= DEFAULT_CAP
    total = 0
    ksum = 0
    hist: Counter = Counter()
    records = [] if keep_records else None
    for mask, order, tors in _stream(n, threads):
        total += 1
        ksum += order * order
        hist[tors] += 1
        if records is not None:
            records.append((mask, tors))
    return CensusResult(n, total, ksum, hist, records)


def load_census(n: int, *, cap: int = DEFAULT_CAP, threads: int = 1, use_cache: bool = True) -> CensusResult:
    """Census with per-complex records, read from or written to the disk cache."""
    path = cache_dir() / f"census-n{n}.v{CACHE_VERSION}.json"
    if use_cache and path.exists():
        try:
            res = CensusResult.from_json(json.loads(path.read_text()))
            if res.n == n and res.records is not None:
                return res
        except (ValueError, KeyError, json.JSONDecodeError):
            log.warning("ignoring unreadable census cache %s", path)
    res = run_census(n, cap=cap, threads=threads, keep_records=True)
    if use_cache:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(res.to_json()))
            tmp.replace(path)
        except OSError as exc:
            log.warning("could not write census cache %s: %s", path, exc)
    return res


def verify_kalai(n: int, **kw) -> CensusResult:
    """Full census; ``result.passed`` says whether the weighted sum is ``n^C(n-2,2)``."""
    return load_census(n, **kw) if n <= DEFAULT_CAP else run_census(n, **kw)


def _face_mask(n: int, faces: Iterable) -> int:
    mask = 0
    for f in faces:
        idx = f if isinstance(f, int) else triangle_index(sorted(f), n)
        mask |= 1 << idx
    return mask


def containment_counts(n: int, faces: Iterable, weighted: bool = False, census: CensusResult | None = None) -> tuple[int, Fraction]:
    """Number (or ``|H_1|^2``-weight) of 2-trees containing all ``faces``, and its probability.

    ``faces`` may mix triangle indices and 1-based triples.
    """
    census = census or load_census(n)
    mask = _face_mask(n, faces)
    count = 0
    for m, tors in census.records:
        if m & mask == mask:
            count += math.prod(tors) ** 2 if weighted else 1
    denom = census.kalai_expected if weighted else census.total
    return count, Fraction(count, denom)


def count_bound_check(n: int, census: CensusResult | None = None) -> tuple[int, float, float]:
    """``(N(n), (en/3)^C(n-1,2), N/bound)``; asserts the counting bound."""
    census = census or verify_kalai(n)
    bound = (math.e * n / 3) ** comb(n - 1, 2)
    assert census.total <= bound
    return census.total, bound, census.total / bound


def trivial_h1_probability(n: int, census: CensusResult | None = None) -> tuple[Fraction, float]:
    """Exact ``P(H_1 = 0)`` under the torsion-squared measure and the bound ``(e/3)^C(n-1,2) n^(n-2)``."""
    census = census or verify_kalai(n)
    p = Fraction(census.histogram[()], census.kalai_expected)
    bound = (math.e / 3) ** comb(n - 1, 2) * n ** (n - 2)
    return p, bound


def torsion_distribution(census: CensusResult) -> dict[TorsionGroup, Fraction]:
    """Exact law of ``H_1`` under the torsion-squared measure."""
    return {
        TorsionGroup(k): Fraction(census.weighted_count(k), census.kalai_expected)
        for k in sorted(census.histogram)
    }
