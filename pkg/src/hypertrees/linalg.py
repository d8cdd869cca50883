"""Exact integer linear algebra: rational rank, determinants and Smith normal form.

Everything here works on Python integers; no floating point is involved.
Small matrices are handled densely.  Above ``DENSE_LIMIT`` entries the
matrix is first reduced by sparse elimination on unit pivots (chosen to keep
fill-in low), which is unimodular and therefore preserves both the rank and
the invariant factors; the small residual matrix is then finished densely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

DENSE_LIMIT = 64 * 64


@dataclass(frozen=True)
class IntMatrix:
    """Sparse integer matrix: ``entries`` maps ``(row, col)`` to a nonzero int."""

    nrows: int
    ncols: int
    entries: Mapping[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), v in self.entries.items():
            if not (0 <= i < self.nrows and 0 <= j < self.ncols):
                raise IndexError(f"entry ({i}, {j}) outside {self.shape}")
            v = int(v)
            if v:
                clean[i, j] = v
        object.__setattr__(self, "entries", clean)

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    @classmethod
    def from_dense(cls, rows) -> "IntMatrix":
        rows = [[int(v) for v in r] for r in rows]
        ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise ValueError("ragged matrix")
        entries = {(i, j): v for i, r in enumerate(rows) for j, v in enumerate(r) if v}
        return cls(len(rows), ncols, entries)

    def to_dense(self) -> list[list[int]]:
        out = [[0] * self.ncols for _ in range(self.nrows)]
        for (i, j), v in self.entries.items():
            out[i][j] = v
        return out

    def __array__(self, dtype=None, copy=None):
        return np.array(self.to_dense(), dtype=dtype if dtype is not None else object)

    def transpose(self) -> "IntMatrix":
        return IntMatrix(self.ncols, self.nrows, {(j, i): v for (i, j), v in self.entries.items()})

    def __matmul__(self, other: "IntMatrix") -> "IntMatrix":
        if self.ncols != other.nrows:
            raise ValueError("shape mismatch")
        by_row: dict[int, list[tuple[int, int]]] = {}
        for (k, j), v in other.entries.items():
            by_row.setdefault(k, []).append((j, v))
        acc: dict[tuple[int, int], int] = {}
        for (i, k), a in self.entries.items():
            for j, b in by_row.get(k, ()):
                acc[i, j] = acc.get((i, j), 0) + a * b
        return IntMatrix(self.nrows, other.ncols, acc)

    def columns(self, cols: Sequence[int]) -> "IntMatrix":
        pos = {c: k for k, c in enumerate(cols)}
        return IntMatrix(
            self.nrows, len(cols),
            {(i, pos[j]): v for (i, j), v in self.entries.items() if j in pos},
        )

    def is_zero(self) -> bool:
        return not self.entries


MatrixLike = Union[IntMatrix, Sequence[Sequence[int]], np.ndarray]


def as_intmatrix(m: MatrixLike) -> IntMatrix:
    if isinstance(m, IntMatrix):
        return m
    arr = np.asarray(m, dtype=object)
    if arr.ndim != 2:
        if arr.size == 0:
            return IntMatrix(0, 0)
        raise ValueError("expected a 2-d matrix")
    for v in arr.flat:
        if isinstance(v, (float, np.floating)) and v != int(v):
            raise TypeError("IntMatrix entries must be integers")
    return IntMatrix.from_dense(arr.tolist())


@dataclass(frozen=True)
class SnfResult:
    """Nonzero diagonal of the Smith normal form, ``d1 | d2 | ... | d_rank``."""

    invariant_factors: tuple[int, ...]

    @property
    def rank(self) -> int:
        return len(self.invariant_factors)

    @property
    def torsion(self) -> tuple[int, ...]:
        return tuple(d for d in self.invariant_factors if d > 1)


# ------------------------------------------------------------------ dense kernels


def _bareiss(a: list[list[int]]) -> tuple[int, int]:
    """Fraction-free elimination in place; returns ``(rank, signed last pivot)``.

    For a square nonsingular input the returned pivot is the determinant.
    """
    nr = len(a)
    nc = len(a[0]) if nr else 0
    prev = 1
    sign = 1
    r = 0
    for c in range(nc):
        if r == nr:
            break
        piv = None
        for i in range(r, nr):
            if a[i][c]:
                piv = i
                break
        if piv is None:
            continue
        if piv != r:
            a[r], a[piv] = a[piv], a[r]
            sign = -sign
        p = a[r][c]
        row_r = a[r]
        for i in range(r + 1, nr):
            row_i = a[i]
            f = row_i[c]
            for j in range(c + 1, nc):
                row_i[j] = (p * row_i[j] - f * row_r[j]) // prev
            row_i[c] = 0
        prev = p
        r += 1
    return r, sign * prev


def _dense_snf(a: list[list[int]]) -> list[int]:
    """Nonzero Smith invariants of a dense matrix (destroys ``a``)."""
    nr = len(a)
    nc = len(a[0]) if nr else 0
    diag = []
    t = 0
    while t < nr and t < nc:
        best = None
        for i in range(t, nr):
            row = a[i]
            for j in range(t, nc):
                v = row[j]
                if v and (best is None or abs(v) < best[0]):
                    best = (abs(v), i, j)
                    if best[0] == 1:
                        break
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, i, j = best
        a[t], a[i] = a[i], a[t]
        if j != t:
            for row in a:
                row[t], row[j] = row[j], row[t]
        while True:
            p = a[t][t]
            dirty = False
            for i in range(t + 1, nr):
                v = a[i][t]
                if v:
                    q = v // p
                    row_i, row_t = a[i], a[t]
                    for j in range(t, nc):
                        row_i[j] -= q * row_t[j]
                    if row_i[t]:
                        dirty = True
            row_t = a[t]
            for j in range(t + 1, nc):
                v = row_t[j]
                if v:
                    q = v // p
                    for row in a:
                        row[j] -= q * row[t]
                    if row_t[j]:
                        dirty = True
            if dirty:
                # move the smallest remainder in row/column t onto the diagonal
                cand = [(abs(a[i][t]), i, t) for i in range(t, nr) if a[i][t]]
                cand += [(abs(a[t][j]), t, j) for j in range(t, nc) if a[t][j]]
                _, i, j = min(cand)
                a[t], a[i] = a[i], a[t]
                if j != t:
                    for row in a:
                        row[t], row[j] = row[j], row[t]
                continue
            bad = None
            for i in range(t + 1, nr):
                for j in range(t + 1, nc):
                    if a[i][j] % p:
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            row_b, row_t = a[bad], a[t]
            for j in range(t, nc):
                row_t[j] += row_b[j]
        diag.append(abs(a[t][t]))
        t += 1
    return diag


# ------------------------------------------------------------------ sparse kernel


def _unit_eliminate(m: IntMatrix) -> tuple[int, list[list[int]]]:
    """Eliminate unit pivots sparsely.

    Returns the number of unit pivots consumed and the dense residual matrix
    on the rows/columns that survive.  Each pivot is chosen among entries
    equal to +-1 in the shortest available column, breaking ties by the
    shortest row, which keeps fill-in low on boundary matrices.
    """
    rows: dict[int, dict[int, int]] = {}
    cols: dict[int, set[int]] = {}
    for (i, j), v in m.entries.items():
        rows.setdefault(i, {})[j] = v
        cols.setdefault(j, set()).add(i)

    units = 0
    while True:
        best = None
        for j, rs in cols.items():
            if best is not None and len(rs) >= best[0]:
                continue
            for i in rs:
                if abs(rows[i][j]) == 1:
                    key = (len(rs), len(rows[i]))
                    if best is None or key < best[:2]:
                        best = (key[0], key[1], i, j)
            if best is not None and best[0] == 1:
                break
        if best is None:
            break
        _, _, pi, pj = best
        prow = rows.pop(pi)
        u = prow[pj]
        for i in list(cols[pj]):
            if i == pi:
                continue
            row = rows[i]
            f = row[pj] * u
            for j, v in prow.items():
                nv = row.get(j, 0) - f * v
                if nv:
                    if j not in row:
                        cols[j].add(i)
                    row[j] = nv
                else:
                    if j in row:
                        del row[j]
                        cols[j].discard(i)
            if not row:
                del rows[i]
        for j in prow:
            cols[j].discard(pi)
        del cols[pj]
        for j in [j for j, rs in cols.items() if not rs]:
            del cols[j]
        units += 1

    ri = sorted(rows)
    ci = sorted(cols)
    cpos = {j: k for k, j in enumerate(ci)}
    dense = [[0] * len(ci) for _ in ri]
    for r, i in enumerate(ri):
        for j, v in rows[i].items():
            dense[r][cpos[j]] = v
    return units, dense


def _is_small(m: IntMatrix) -> bool:
    return m.nrows * m.ncols <= DENSE_LIMIT


# ------------------------------------------------------------------ public API


def rank_over_q(m: MatrixLike) -> int:
    """Rank over the rationals by fraction-free elimination."""
    m = as_intmatrix(m)
    if m.is_zero():
        return 0
    if _is_small(m):
        return _bareiss(m.to_dense())[0]
    units, rest = _unit_eliminate(m)
    if not rest or not rest[0]:
        return units
    return units + _bareiss(rest)[0]


def determinant(m: MatrixLike) -> int:
    """Exact determinant (Bareiss)."""
    m = as_intmatrix(m)
    if m.nrows != m.ncols:
        raise ValueError("determinant of a non-square matrix")
    if m.nrows == 0:
        return 1
    a = m.to_dense()
    r, d = _bareiss(a)
    return d if r == m.nrows else 0


def smith_normal_form(m: MatrixLike) -> SnfResult:
    """Invariant factors of an integer matrix."""
    m = as_intmatrix(m)
    if m.is_zero():
        return SnfResult(())
    if _is_small(m):
        diag = _dense_snf(m.to_dense())
        units = 0
    else:
        units, rest = _unit_eliminate(m)
        diag = _dense_snf(rest) if rest and rest[0] else []
    factors = [1] * units + sorted(diag)
    return SnfResult(tuple(factors))


def adjugate(m: MatrixLike) -> tuple[int, list[list[int]]]:
    """``(det, adj)`` for a square nonsingular integer matrix, ``adj = det * m^-1``.

    Computed by exact Gauss-Jordan on ``[m | det * I]`` with integer rows,
    dividing only where division is exact.
    """
    m = as_intmatrix(m)
    n = m.nrows
    if n != m.ncols:
        raise ValueError("adjugate of a non-square matrix")
    det = determinant(m)
    if det == 0:
        raise ValueError("matrix is singular")
    from fractions import Fraction

    a = [[Fraction(v) for v in row] + [Fraction(det if i == j else 0) for j in range(n)]
         for i, row in enumerate(m.to_dense())]
    for c in range(n):
        piv = next(i for i in range(c, n) if a[i][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        p = a[c][c]
        a[c] = [v / p for v in a[c]]
        for i in range(n):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    adj = []
    for i in range(n):
        row = []
        for v in a[i][n:]:
            if v.denominator != 1:
                raise ArithmeticError("non-integral adjugate")
            row.append(v.numerator)
        adj.append(row)
    return det, adj


def gcd_all(values: Iterable[int]) -> int:
    g = 0
    for v in values:
        g = gcd(g, v)
    return g
