"""Integral first homology of 2-complexes with complete 1-skeleton."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb, prod

from sympy import factorint

from .complex import Complex2, boundary_matrix, is_2tree
from .linalg import smith_normal_form


class NotA2TreeError(ValueError):
    """Raised when an operation defined only on 2-trees gets something else."""


def p_valuation(d: int, p: int) -> int:
    k = 0
    while d % p == 0:
        d //= p
        k += 1
    return k


@dataclass(frozen=True)
class TorsionGroup:
    """A finite abelian group ``Z/d1 + ... + Z/dk`` with ``d1 | ... | dk``, all ``di >= 2``."""

    invariant_factors: tuple[int, ...] = ()

    def __post_init__(self):
        fs = tuple(int(d) for d in self.invariant_factors)
        if any(d < 1 for d in fs):
            raise ValueError("invariant factors must be positive")
        fs = tuple(sorted(d for d in fs if d > 1))
        for a, b in zip(fs, fs[1:]):
            if b % a:
                raise ValueError(f"{fs} is not a divisibility chain")
        object.__setattr__(self, "invariant_factors", fs)

    @property
    def order(self) -> int:
        return prod(self.invariant_factors)

    @property
    def is_trivial(self) -> bool:
        return not self.invariant_factors

    def sylow(self, p: int) -> tuple[int, ...]:
        """Partition ``lambda`` with Sylow-p part ``+ Z/p^lambda_i``, weakly decreasing."""
        parts = [p_valuation(d, p) for d in self.invariant_factors]
        return tuple(sorted((k for k in parts if k), reverse=True))

    @cached_property
    def partitions(self) -> dict[int, tuple[int, ...]]:
        primes: set[int] = set()
        for d in self.invariant_factors:
            primes.update(factorint(d))
        return {p: self.sylow(p) for p in sorted(primes)}

    @classmethod
    def from_partitions(cls, parts: dict[int, tuple[int, ...]]) -> "TorsionGroup":
        width = max((len(lam) for lam in parts.values()), default=0)
        factors = [1] * width
        for p, lam in parts.items():
            for i, e in enumerate(sorted(lam)):
                factors[width - len(lam) + i] *= p**e
        return cls(tuple(factors))

    def __str__(self) -> str:
        if self.is_trivial:
            return "0"
        return " + ".join(f"Z/{d}" for d in self.invariant_factors)


def h1(c: Complex2) -> tuple[int, TorsionGroup]:
    """``(betti_1, torsion of H_1)`` from the Smith form of the face boundaries.

    The cycle group of the complete graph is a saturated summand of the edge
    chains, so the cokernel of the boundary restricted to the faces splits as
    ``Z^(n-1)`` (the boundaries of edges) plus ``H_1``; the rank of ``H_1`` is
    ``C(n-1, 2) - rank`` and its torsion is the invariant factors above 1.
    """
    if not len(c):
        return comb(c.n - 1, 2) if c.n >= 1 else 0, TorsionGroup()
    snf = smith_normal_form(boundary_matrix(c.n, c.faces))
    return comb(c.n - 1, 2) - snf.rank, TorsionGroup(snf.torsion)


def h1_order(c: Complex2) -> int:
    """``|H_1(c)|`` for a 2-tree."""
    if not is_2tree(c):
        raise NotA2TreeError("H_1 is infinite unless the complex is a 2-tree")
    betti, tors = h1(c)
    assert betti == 0
    return tors.order
