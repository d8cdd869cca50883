"""Triangles, 2-complexes with complete 1-skeleton, boundary operators and file I/O.

Vertex labels in the public API (triples, files, JSON) are 1-based, matching
the vertex set ``[n] = {1, ..., n}``.  Internally, edges and triangles are
addressed by their 0-based rank in lexicographic order.

Sign convention for the boundary of a triangle ``i < j < k``::

    d[i, j, k] = [j, k] - [i, k] + [i, j]

so that, with edges in lexicographic order, the three nonzero entries of a
column read ``(+1, -1, +1)`` from top to bottom.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Iterable, Sequence

from .linalg import IntMatrix, rank_over_q


class ComplexFormatError(ValueError):
    """Raised when a complex file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@lru_cache(maxsize=None)
def triangles(n: int) -> tuple[tuple[int, int, int], ...]:
    """All 1-based triples of ``[n]`` in lexicographic order."""
    return tuple(combinations(range(1, n + 1), 3))


@lru_cache(maxsize=None)
def edges(n: int) -> tuple[tuple[int, int], ...]:
    return tuple(combinations(range(1, n + 1), 2))


@lru_cache(maxsize=None)
def _triangle_ranks(n: int) -> dict[tuple[int, int, int], int]:
    return {t: i for i, t in enumerate(triangles(n))}


@lru_cache(maxsize=None)
def _edge_ranks(n: int) -> dict[tuple[int, int], int]:
    return {e: i for i, e in enumerate(edges(n))}


def triangle_index(triple: Sequence[int], n: int) -> int:
    """Lexicographic rank of the increasing triple ``(i, j, k)`` of ``[n]``."""
    t = tuple(int(v) for v in triple)
    if len(t) != 3 or not (1 <= t[0] < t[1] < t[2] <= n):
        raise ValueError(f"{triple!r} is not an increasing triple of [1, {n}]")
    return _triangle_ranks(n)[t]


def index_triangle(index: int, n: int) -> tuple[int, int, int]:
    if not 0 <= index < comb(n, 3):
        raise ValueError(f"triangle index {index} out of range for n={n}")
    return triangles(n)[index]


def edge_index(pair: Sequence[int], n: int) -> int:
    e = tuple(int(v) for v in pair)
    if len(e) != 2 or not (1 <= e[0] < e[1] <= n):
        raise ValueError(f"{pair!r} is not an increasing pair of [1, {n}]")
    return _edge_ranks(n)[e]


@lru_cache(maxsize=None)
def boundary_columns(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Sparse columns of the full boundary: ``(edge_rank, sign)`` per triangle."""
    er = _edge_ranks(n)
    cols = []
    for i, j, k in triangles(n):
        cols.append(((er[i, j], 1), (er[i, k], -1), (er[j, k], 1)))
    return tuple(cols)


@lru_cache(maxsize=None)
def reduced_columns(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Boundary columns with the rows of edges through vertex 1 deleted.

    The remaining ``C(n-1, 2)`` rows index the cycles ``[1,j] + [j,k] - [1,k]``,
    which form an integral basis of the cycle group, so this matrix has the
    same rank and the same torsion cokernel as the full boundary restricted to
    the cycle space.  Row ``r`` is the ``r``-th edge of ``{2..n}``.
    """
    er = _edge_ranks(n - 1)

    def row(a: int, b: int) -> int:
        return er[a - 1, b - 1]

    cols = []
    for i, j, k in triangles(n):
        if i == 1:
            cols.append(((row(j, k), 1),))
        else:
            cols.append(((row(i, j), 1), (row(i, k), -1), (row(j, k), 1)))
    return tuple(cols)


@dataclass(frozen=True)
class Complex2:
    """A 2-complex on ``[n]`` with complete 1-skeleton.

    ``mask`` is a bitset over the ``C(n, 3)`` triangle ranks.
    """

    n: int
    mask: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.mask < 0 or self.mask >> comb(self.n, 3):
            raise ValueError("face index out of range")

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "Complex2":
        mask = 0
        total = comb(n, 3)
        for i in indices:
            if not 0 <= i < total:
                raise ValueError(f"triangle index {i} out of range for n={n}")
            mask |= 1 << i
        return cls(n, mask)

    @classmethod
    def from_triples(cls, n: int, triples: Iterable[Sequence[int]]) -> "Complex2":
        return cls.from_indices(n, (triangle_index(sorted(t), n) for t in triples))

    @property
    def faces(self) -> tuple[int, ...]:
        out = []
        m, i = self.mask, 0
        while m:
            if m & 1:
                out.append(i)
            m >>= 1
            i += 1
        return tuple(out)

    def triples(self) -> list[tuple[int, int, int]]:
        tri = triangles(self.n)
        return [tri[i] for i in self.faces]

    def __len__(self) -> int:
        return self.mask.bit_count()

    def __contains__(self, index: int) -> bool:
        return bool(self.mask >> index & 1)

    def relabel(self, perm: Sequence[int]) -> "Complex2":
        """Apply the vertex permutation ``v -> perm[v-1]`` (1-based values)."""
        return Complex2.from_triples(
            self.n, (tuple(sorted(perm[v - 1] for v in t)) for t in self.triples())
        )

    def to_json(self) -> dict:
        return {"n": self.n, "faces": [list(t) for t in self.triples()]}

    @classmethod
    def from_json(cls, obj: dict) -> "Complex2":
        n = int(obj["n"])
        return _from_rows(n, ((None, t) for t in obj["faces"]))


def boundary_matrix(n: int, faces: Iterable[int] | None = None) -> IntMatrix:
    """The edge-by-triangle boundary matrix, restricted to ``faces`` if given.

    Rows are the ``C(n, 2)`` edges in lexicographic order; columns follow the
    order of ``faces`` (all triangles in lexicographic order by default).
    """
    if n < 3:
        raise ValueError("boundary_matrix needs n >= 3")
    cols = boundary_columns(n)
    idx = range(len(cols)) if faces is None else list(faces)
    entries = {}
    for c, f in enumerate(idx):
        if not 0 <= f < len(cols):
            raise ValueError(f"triangle index {f} out of range for n={n}")
        for r, s in cols[f]:
            entries[r, c] = s
    return IntMatrix(comb(n, 2), len(idx), entries)


def vertex_boundary(n: int) -> IntMatrix:
    """The vertex-by-edge boundary ``d[a, b] = b - a``."""
    entries = {}
    for c, (a, b) in enumerate(edges(n)):
        entries[a - 1, c] = -1
        entries[b - 1, c] = 1
    return IntMatrix(n, comb(n, 2), entries)


def reduced_boundary(c: Complex2) -> IntMatrix:
    cols = reduced_columns(c.n)
    entries = {}
    for j, f in enumerate(c.faces):
        for r, s in cols[f]:
            entries[r, j] = s
    return IntMatrix(comb(c.n - 1, 2), len(c), entries)


def is_2tree(c: Complex2) -> bool:
    """True iff ``c`` has ``C(n-1, 2)`` faces with rationally independent boundaries."""
    if c.n < 3:
        return False
    r = comb(c.n - 1, 2)
    if len(c) != r:
        return False
    return rank_over_q(reduced_boundary(c)) == r


def cone(n: int, apex: int = 1) -> Complex2:
    """The cone 2-tree: every triangle through ``apex``."""
    return Complex2.from_triples(
        n, (sorted((apex, j, k)) for j, k in combinations([v for v in range(1, n + 1) if v != apex], 2))
    )


def rp2() -> Complex2:
    """The 6-vertex real projective plane (labels as in the standard picture)."""
    return Complex2.from_triples(6, RP2_TRIPLES)


RP2_TRIPLES = (
    (1, 2, 3), (1, 2, 5), (1, 3, 6), (1, 4, 5), (1, 4, 6),
    (2, 3, 4), (2, 4, 6), (2, 5, 6), (3, 4, 5), (3, 5, 6),
)


# ---------------------------------------------------------------- file I/O

_HEADER = re.compile(r"^n\s*=\s*(\d+)$")


def _from_rows(n: int, rows) -> Complex2:
    total = 0
    seen: dict[int, int | None] = {}
    for lineno, triple in rows:
        if len(triple) != 3:
            raise ComplexFormatError("expected three vertex labels", lineno)
        try:
            vs = [int(v) for v in triple]
        except (TypeError, ValueError):
            raise ComplexFormatError(f"non-integer vertex label in {triple!r}", lineno) from None
        if any(not 1 <= v <= n for v in vs):
            raise ComplexFormatError(f"vertex out of range [1, {n}] in {triple!r}", lineno)
        if len(set(vs)) != 3:
            raise ComplexFormatError(f"degenerate triangle {triple!r}", lineno)
        idx = triangle_index(sorted(vs), n)
        if idx in seen:
            raise ComplexFormatError(f"duplicate triangle {sorted(vs)}", lineno)
        seen[idx] = lineno
        total |= 1 << idx
    return Complex2(n, total)


def parse_complex(text: str) -> Complex2:
    """Parse the text format (``n=<int>`` header, one triangle per line) or JSON."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            return Complex2.from_json(json.loads(stripped))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ComplexFormatError(f"bad JSON complex: {exc}") from None
    n = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if n is None:
            m = _HEADER.match(line)
            if not m:
                raise ComplexFormatError("expected header 'n=<int>'", lineno)
            n = int(m.group(1))
            if n < 3:
                raise ComplexFormatError("n must be at least 3", lineno)
            continue
        rows.append((lineno, line.split()))
    if n is None:
        raise ComplexFormatError("missing header 'n=<int>'")
    return _from_rows(n, rows)


def read_complex(path: str | Path) -> Complex2:
    return parse_complex(Path(path).read_text())


def format_complex(c: Complex2) -> str:
    lines = [f"n={c.n}"] + [" ".join(map(str, t)) for t in c.triples()]
    return "\n".join(lines) + "\n"


def write_complex(c: Complex2, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(c.to_json()) + "\n")
    else:
        path.write_text(format_complex(c))
