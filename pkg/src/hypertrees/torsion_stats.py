"""Torsion statistics: automorphism orders, Cohen-Lenstra comparison, expected torsion."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, Mapping

from sympy import isprime

from .homology import TorsionGroup

MIN_SAMPLES = 10_000
TAIL_EPS = 1e-15


class TooFewSamples(ValueError):
    def __init__(self, got: int, need: int):
        super().__init__(f"need at least {need} samples for a Cohen-Lenstra comparison, got {got}")
        self.got = got
        self.need = need


@dataclass(frozen=True, order=True)
class PGroupPartition:
    """``+_i Z/p^lambda_i`` with ``lambda`` weakly decreasing; ``()`` is the trivial group."""

    p: int
    parts: tuple[int, ...] = ()

    def __post_init__(self):
        if not isprime(self.p):
            raise ValueError(f"{self.p} is not prime")
        parts = tuple(int(x) for x in self.parts)
        if any(x <= 0 for x in parts):
            raise ValueError("partition parts must be positive")
        if any(a < b for a, b in zip(parts, parts[1:])):
            raise ValueError("partition must be weakly decreasing")
        object.__setattr__(self, "parts", parts)

    @property
    def order(self) -> int:
        return self.p ** sum(self.parts)

    @classmethod
    def of(cls, g: TorsionGroup, p: int) -> "PGroupPartition":
        return cls(p, g.sylow(p))

    def __str__(self) -> str:
        if not self.parts:
            return "0"
        return " + ".join(f"Z/{self.p ** e}" for e in self.parts)


def aut_order(g: PGroupPartition) -> int:
    """``|Aut(+ Z/p^lambda_i)|`` by the closed form for finite abelian p-groups.

    With exponents sorted ascending ``e_1 <= ... <= e_m``, ``d_k`` the last and
    ``c_k`` the first index carrying the value ``e_k``::

        prod_k (p^d_k - p^(k-1)) * prod_j p^(e_j (m - d_j)) * prod_i p^((e_i - 1)(m - c_i + 1))
    """
    p = g.p
    e = sorted(g.parts)
    m = len(e)
    out = 1
    for k in range(1, m + 1):
        ek = e[k - 1]
        d = max(l for l in range(1, m + 1) if e[l - 1] == ek)
        c = min(l for l in range(1, m + 1) if e[l - 1] == ek)
        out *= p**d - p ** (k - 1)
        out *= p ** (ek * (m - d))
        out *= p ** ((ek - 1) * (m - c + 1))
    return out


def cl_constant(p: int) -> float:
    """``prod_{k>=1} (1 - p^-k)``, stopped once the next factor is within 1e-15 of 1."""
    out = 1.0
    k = 1
    while True:
        t = float(p) ** -k
        if t < TAIL_EPS:
            return out
        out *= 1.0 - t
        k += 1


def cohen_lenstra_pmf(p: int, g: PGroupPartition) -> float:
    if g.p != p:
        raise ValueError("prime mismatch")
    return cl_constant(p) / aut_order(g)


def partitions(total: int) -> Iterable[tuple[int, ...]]:
    """Partitions of ``total`` as weakly decreasing tuples."""
    def rec(rest, cap):
        if rest == 0:
            yield ()
            return
        for x in range(min(rest, cap), 0, -1):
            for tail in rec(rest - x, x):
                yield (x,) + tail
    yield from rec(total, total)


def cl_mass(p: int, max_size: int) -> float:
    """Cohen-Lenstra mass of all groups with ``sum(lambda) <= max_size``."""
    return sum(cohen_lenstra_pmf(p, PGroupPartition(p, lam))
               for s in range(max_size + 1) for lam in partitions(s))


@dataclass
class DistributionComparison:
    p: int
    empirical: dict[PGroupPartition, float]
    cohen_lenstra: dict[PGroupPartition, float]
    tv: float
    samples: int | None
    z: dict[PGroupPartition, float | None] = field(default_factory=dict)

    @property
    def unobserved_cl_mass(self) -> float:
        return 1.0 - sum(self.cohen_lenstra.values())

    def rows(self) -> list[tuple[int, str, float, float, float | None]]:
        return [(self.p, str(g), self.empirical[g], self.cohen_lenstra[g], self.z.get(g))
                for g in sorted(self.empirical, key=lambda g: (sum(g.parts), g.parts))]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["p", "partition", "empirical", "cohen_lenstra", "z"])
        for p, g, e, c, z in self.rows():
            w.writerow([p, g, f"{e:.12g}", f"{c:.12g}", "" if z is None else f"{z:.6g}"])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "samples": self.samples,
            "tv": self.tv,
            "unobserved_cl_mass": self.unobserved_cl_mass,
            "rows": [{"partition": g, "empirical": e, "cohen_lenstra": c, "z": z}
                     for _, g, e, c, z in self.rows()],
        }


def _compare(p: int, pmf: Mapping[PGroupPartition, float], samples: int | None) -> DistributionComparison:
    cl = {g: cohen_lenstra_pmf(p, g) for g in pmf}
    tv = 0.5 * (sum(abs(pmf[g] - cl[g]) for g in pmf) + (1.0 - sum(cl.values())))
    z: dict[PGroupPartition, float | None] = {}
    for g in pmf:
        if samples:
            se = math.sqrt(cl[g] * (1 - cl[g]) / samples)
            z[g] = (pmf[g] - cl[g]) / se
        else:
            z[g] = None
    return DistributionComparison(p, dict(pmf), cl, tv, samples, z)


def compare_to_cohen_lenstra(samples: Iterable[TorsionGroup], p: int, *, min_samples: int = MIN_SAMPLES) -> DistributionComparison:
    """Empirical Sylow-p law of a sample stream against the Cohen-Lenstra pmf."""
    counts: Counter = Counter()
    total = 0
    for g in samples:
        counts[PGroupPartition.of(g, p)] += 1
        total += 1
    if total < min_samples:
        raise TooFewSamples(total, min_samples)
    return _compare(p, {g: c / total for g, c in counts.items()}, total)


def compare_exact(dist: Mapping[TorsionGroup, Fraction], p: int) -> DistributionComparison:
    """Same comparison for an exact law (e.g. from a census); z-scores are undefined."""
    agg: dict[PGroupPartition, Fraction] = {}
    for g, w in dist.items():
        key = PGroupPartition.of(g, p)
        agg[key] = agg.get(key, Fraction(0)) + Fraction(w)
    return _compare(p, {g: float(w) for g, w in agg.items()}, None)


@dataclass(frozen=True)
class TorsionBounds:
    """Natural logs of the two lower-bound variants and the upper bound for ``E|H_1|``."""

    n: int
    stated_lower: float
    proof_lower: float
    trivial_upper: float

    def as_values(self) -> tuple[float, float, float]:
        return math.exp(self.stated_lower), math.exp(self.proof_lower), math.exp(self.trivial_upper)


def expected_torsion_bounds(n: int) -> TorsionBounds:
    """``(3/e)^C(n-2,2) (3/(en))^(n-2)``, its square root, and ``sqrt(3)^C(n-1,2)`` (log scale)."""
    if n < 3:
        raise ValueError("n must be at least 3")
    stated = comb(n - 2, 2) * math.log(3 / math.e) + (n - 2) * math.log(3 / (math.e * n))
    upper = comb(n - 1, 2) * 0.5 * math.log(3)
    return TorsionBounds(n, stated, stated / 2, upper)


def power_mean_check(xs) -> tuple[float, float, bool]:
    """``sum x^3 >= k^(-1/2) (sum x^2)^(3/2)`` for non-negative ``x``."""
    xs = [float(x) for x in xs]
    if not xs:
        raise ValueError("empty input")
    if any(x < 0 or math.isnan(x) for x in xs):
        raise ValueError("inputs must be non-negative")
    lhs = math.fsum(x**3 for x in xs)
    rhs = math.fsum(x * x for x in xs) ** 1.5 / math.sqrt(len(xs))
    # allow for rounding when the two sides coincide
    return lhs, rhs, lhs >= rhs * (1 - 1e-12)


def wilson_interval(successes: int, total: int, z: float = 1.96) -> tuple[float, float, float]:
    """``(estimate, lo, hi)`` for a binomial proportion."""
    if total <= 0:
        raise ValueError("no trials")
    ph = successes / total
    den = 1 + z * z / total
    mid = (ph + z * z / (2 * total)) / den
    half = z * math.sqrt(ph * (1 - ph) / total + z * z / (4 * total * total)) / den
    return ph, max(0.0, mid - half), min(1.0, mid + half)


def log_mean_interval(values: Iterable[int], z: float = 1.96) -> tuple[float, float, float]:
    """``log`` of the sample mean with a delta-method interval."""
    xs = [float(v) for v in values]
    k = len(xs)
    if k < 2:
        raise ValueError("need at least two values")
    mean = math.fsum(xs) / k
    var = math.fsum((x - mean) ** 2 for x in xs) / (k - 1)
    half = z * math.sqrt(var / k) / mean
    return math.log(mean), math.log(mean) - half, math.log(mean) + half
