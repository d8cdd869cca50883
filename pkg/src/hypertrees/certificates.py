"""Density witnesses: densest small induced subcomplexes and the union bound.

For a fixed vertex set ``W`` the induced subcomplex has the most faces of any
subcomplex on ``W``, so maximizing ``f2/f0`` over subcomplexes with at most
``C'`` vertices reduces to scanning vertex subsets of size ``<= C'``.

The scan is a depth-first enumeration over vertices in descending-degree
order.  It keeps, for every vertex ``x``, the number of pairs ``{a, b}`` of
the current set ``W`` with ``{a, b, x}`` a face, so the face count of
``W + x`` is read off in O(1) and extending ``W`` costs one update per face
through the new vertex and an old one.  Subtrees are cut when even a
complete 2-skeleton on the remaining slots could not beat the incumbent.
Ties in ``f2/f0`` go to the lexicographically smallest vertex set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np
from numba import njit

from .complex import Complex2

HYPERBOLICITY_THRESHOLD = Fraction(3, 2)
ASPHERICITY_THRESHOLD = Fraction(47, 46)
DEFAULT_MAX_VERTICES = 12
INDUCED_NOTE = (
    "induced subcomplexes only: for a fixed vertex set the induced subcomplex "
    "contains every subcomplex on it, so it has the largest f2/f0"
)


@dataclass
class DensityReport:
    complex_id: str | None
    max_vertices: int
    vertices: tuple[int, ...]
    f0: int
    f2: int
    threshold: Fraction | None
    exhaustive: bool = True
    visited: int = 0
    pruned: int = 0
    tetrahedra: list[tuple[int, int, int, int]] | None = None
    note: str = INDUCED_NOTE

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.f2, self.f0) if self.f0 else Fraction(0)

    @property
    def passed(self) -> bool | None:
        """No scanned subset reaches the threshold (and no tetrahedron boundary, if checked)."""
        if self.threshold is None:
            return None
        ok = self.ratio < self.threshold
        if self.tetrahedra is not None:
            ok = ok and not self.tetrahedra
        return ok

    def to_json(self) -> dict:
        out = {
            "complex_id": self.complex_id,
            "max_vertices": self.max_vertices,
            "vertices": list(self.vertices),
            "f0": self.f0,
            "f2": self.f2,
            "ratio": str(self.ratio),
            "ratio_float": float(self.ratio),
            "threshold": None if self.threshold is None else str(self.threshold),
            "pass": self.passed,
            "exhaustive": self.exhaustive,
            "scan": {"visited": self.visited, "pruned": self.pruned},
            "note": self.note,
        }
        if self.tetrahedra is not None:
            out["tetrahedron_boundaries"] = [list(t) for t in self.tetrahedra]
        return out


def pair_masks(c: Complex2) -> np.ndarray:
    """``pm[a, b]`` = bitmask of vertices ``x`` (0-based) with ``{a, b, x}`` a face."""
    if c.n > 62:
        raise ValueError("density scan supports n <= 62")
    pm = np.zeros((c.n, c.n), dtype=np.int64)
    for i, j, k in c.triples():
        a, b, x = i - 1, j - 1, k - 1
        pm[a, b] |= 1 << x
        pm[b, a] |= 1 << x
        pm[a, x] |= 1 << b
        pm[x, a] |= 1 << b
        pm[b, x] |= 1 << a
        pm[x, b] |= 1 << a
    return pm


def induced_faces(c: Complex2, vertices: Sequence[int]) -> int:
    vs = set(vertices)
    return sum(1 for t in c.triples() if vs.issuperset(t))


@njit(cache=True)
def _lex_less(a, la, b, lb):
    m = min(la, lb)
    for i in range(m):
        if a[i] != b[i]:
            return a[i] < b[i]
    return la < lb


@njit(cache=True)
def _sorted_labels(stack, depth, labels, out):
    for i in range(depth):
        out[i] = labels[stack[i]]
    out[:depth].sort()


@njit(cache=True)
def _consider(stack, k, labels, g, best, best_len, best_f2, best_k, cur):
    """Compare ``g/k`` with the incumbent; returns the new ``(best_len, best_f2, best_k)``."""
    lhs = g * best_k
    rhs = best_f2 * k
    if lhs > rhs:
        _sorted_labels(stack, k, labels, best)
        return k, g, k
    if lhs == rhs:
        _sorted_labels(stack, k, labels, cur)
        if _lex_less(cur, k, best, best_len):
            best[:k] = cur[:k]
            return k, g, k
    return best_len, best_f2, best_k


@njit(cache=True)
def _scan(link, nlink, labels, cmax, budget, mcap, seed, seed_f2, bounded):
    """Depth-first scan of vertex sets of size ``<= cmax`` (positions, not labels).

    ``link[v, i] = (a, b)`` lists the faces ``{v, a, b}``.  ``mcap[j]`` bounds
    the faces spanned by any ``j`` vertices and ``seed``/``seed_f2`` give a
    known set to start from (empty when ``seed_f2 == 0``).
    """
    n = link.shape[0]
    A = np.zeros((cmax + 1, n), dtype=np.int64)
    C = np.zeros((n, n), dtype=np.int64)
    stack = np.zeros(cmax + 1, dtype=np.int64)
    nxt = np.zeros(cmax + 1, dtype=np.int64)
    fs = np.zeros(cmax + 1, dtype=np.int64)
    cur = np.zeros(cmax + 1, dtype=np.int64)
    best = np.zeros(cmax + 1, dtype=np.int64)
    hist = np.zeros(cmax + 2, dtype=np.int64)
    top = np.zeros((cmax + 1, n), dtype=np.int64)
    tmp = np.zeros(n, dtype=np.int64)
    best_len = 0
    best_f2 = 0
    best_k = 1
    if seed_f2 > 0:
        best_len = seed.shape[0]
        best[:best_len] = seed
        best_f2 = seed_f2
        best_k = best_len
    visited = 0
    pruned = 0
    complete = True
    W = np.int64(0)
    d = 0
    nxt[0] = 0
    while d >= 0:
        if nxt[d] >= n:
            d -= 1
            if d >= 0:
                v = stack[d]
                W &= ~(np.int64(1) << v)
                for i in range(nlink[v]):
                    a = link[v, i, 0]
                    b = link[v, i, 1]
                    C[a, b] -= 1
                    C[b, a] -= 1
            continue
        if budget > 0 and visited >= budget:
            complete = False
            break
        Ad = A[d]
        k = d + 1
        if k == cmax:
            # leaves: every remaining vertex closes a set of the maximum size
            hi = -1
            for v in range(nxt[d], n):
                if Ad[v] > hi:
                    hi = Ad[v]
            visited += n - nxt[d]
            g = fs[d] + hi
            if g > 0 and g * best_k >= best_f2 * k:
                for v in range(nxt[d], n):
                    if Ad[v] == hi:
                        stack[d] = v
                        best_len, best_f2, best_k = _consider(
                            stack, k, labels, g, best, best_len, best_f2, best_k, cur)
            nxt[d] = n
            continue
        v = nxt[d]
        nxt[d] += 1
        visited += 1
        g = fs[d] + Ad[v]
        stack[d] = v
        if g > 0:
            best_len, best_f2, best_k = _consider(
                stack, k, labels, g, best, best_len, best_f2, best_k, cur)
        if v >= n - 1:
            continue
        slots = min(cmax - k, n - 1 - v)
        # cheap cut: a full 2-skeleton on the remaining slots
        base = k * (k - 1) * (k - 2) // 6
        hopeless = True
        for j in range(1, slots + 1):
            s = k + j
            if (g + s * (s - 1) * (s - 2) // 6 - base) * best_k >= best_f2 * s:
                hopeless = False
                break
        if hopeless:
            pruned += 1
            continue
        An = A[d + 1]
        An[:] = Ad
        vb = np.int64(1) << v
        for i in range(nlink[v]):
            a = link[v, i, 0]
            b = link[v, i, 1]
            if W & (np.int64(1) << a):
                An[b] += 1
            if W & (np.int64(1) << b):
                An[a] += 1
            C[a, b] += 1
            C[b, a] += 1
        W |= vb
        if bounded and slots > 1 and best_f2 > 0:
            # f2(W + X) <= f2(W) + sum_X A[x] + (1/2) sum_X top_{j-1} C[x, X] + mcap[j]
            lo = v + 1
            nc = n - lo
            for x in range(lo, n):
                hist[:] = 0
                for y in range(lo, n):
                    if y != x:
                        cv = C[x, y]
                        if cv > k:
                            cv = k
                        hist[cv] += 1
                acc = 0
                m = 0
                top[0, x] = 0
                val = k
                while m < slots - 1 and val >= 0:
                    if hist[val] > 0:
                        hist[val] -= 1
                        acc += val
                        m += 1
                        top[m, x] = acc
                    else:
                        val -= 1
                while m < slots - 1:
                    m += 1
                    top[m, x] = acc
            hopeless = True
            for j in range(slots, 0, -1):
                for x in range(lo, n):
                    tmp[x - lo] = 2 * An[x] + top[j - 1, x]
                tmp[:nc].sort()
                ub2 = 2 * g + 2 * mcap[j]
                for t in range(j):
                    ub2 += tmp[nc - 1 - t]
                s = k + j
                if ub2 * best_k >= 2 * best_f2 * s:
                    hopeless = False
                    break
            if hopeless:
                pruned += 1
                W &= ~vb
                for i in range(nlink[v]):
                    a = link[v, i, 0]
                    b = link[v, i, 1]
                    C[a, b] -= 1
                    C[b, a] -= 1
                continue
        fs[d + 1] = g
        d += 1
        nxt[d] = v + 1
    return best[:best_len].copy(), best_f2, best_k, visited, pruned, complete


def _degree_order(c: Complex2) -> np.ndarray:
    deg = [0] * c.n
    for t in c.triples():
        for v in t:
            deg[v - 1] += 1
    return np.array(sorted(range(c.n), key=lambda v: (-deg[v], v)), dtype=np.int64)


def densest_subcomplex(c: Complex2, max_vertices: int = DEFAULT_MAX_VERTICES, *,
                       threshold: Fraction | None = None, budget: int | None = None,
                       complex_id: str | None = None, bounded: bool = True) -> DensityReport:
    """Vertex set of size ``<= max_vertices`` maximizing induced ``f2/f0``.

    ``budget`` caps the number of visited subsets; if it is hit the report is
    flagged non-exhaustive and describes the best set seen so far.
    ``bounded=False`` turns off the face-count bound (plain enumeration).
    """
    if max_vertices < 3:
        raise ValueError("max_vertices must be at least 3")
    order = _degree_order(c)
    pos = np.empty(c.n, dtype=np.int64)
    pos[order] = np.arange(c.n)
    links: list[list[tuple[int, int]]] = [[] for _ in range(c.n)]
    for t in c.triples():
        p = [int(pos[v - 1]) for v in t]
        links[p[0]].append((p[1], p[2]))
        links[p[1]].append((p[0], p[2]))
        links[p[2]].append((p[0], p[1]))
    width = max(1, max((len(l) for l in links), default=0))
    link = np.zeros((c.n, width, 2), dtype=np.int64)
    nlink = np.zeros(c.n, dtype=np.int64)
    for v, l in enumerate(links):
        if l:
            link[v, :len(l)] = l
        nlink[v] = len(l)
    labels = order + 1
    cmax = min(max_vertices, c.n)
    remaining = budget or 0
    # iterative deepening: the exact optimum for C' = m caps the faces on m vertices
    mcap = np.array([comb(j, 3) for j in range(cmax + 1)], dtype=np.int64)
    seed = np.zeros(0, dtype=np.int64)
    f2 = 0
    visited = pruned = 0
    complete = True
    stages = range(3, cmax + 1) if bounded else (cmax,)
    for m in stages:
        seed, f2, k, vis, pru, complete = _scan(link, nlink, labels, m, remaining, mcap, seed, f2, bounded)
        visited += int(vis)
        pruned += int(pru)
        if not complete:
            break
        if remaining:
            remaining = max(1, remaining - int(vis))
        if f2:
            mcap[m] = min(mcap[m], (f2 * m) // k)
    best = seed
    verts = tuple(int(v) for v in best)
    return DensityReport(
        complex_id=complex_id,
        max_vertices=max_vertices,
        vertices=verts,
        f0=len(verts),
        f2=int(f2) if verts else 0,
        threshold=threshold,
        exhaustive=bool(complete),
        visited=int(visited),
        pruned=int(pruned),
    )


def tetrahedron_boundaries(c: Complex2) -> list[tuple[int, int, int, int]]:
    """All 4-sets of vertices spanning all four triangles of a tetrahedron."""
    pm = pair_masks(c)
    found = set()
    for i, j, k in c.triples():
        a, b, x = i - 1, j - 1, k - 1
        m = int(pm[a, b]) & int(pm[a, x]) & int(pm[b, x])
        while m:
            low = m & -m
            d = low.bit_length() - 1
            found.add(tuple(sorted((i, j, k, d + 1))))
            m ^= low
    return sorted(found)


def hyperbolicity_certificate(c: Complex2, max_vertices: int = DEFAULT_MAX_VERTICES, **kw) -> DensityReport:
    """Densest-subcomplex scan against ``f2/f0 < 3/2``."""
    return densest_subcomplex(c, max_vertices, threshold=HYPERBOLICITY_THRESHOLD, **kw)


def asphericity_certificate(c: Complex2, max_vertices: int = DEFAULT_MAX_VERTICES, **kw) -> DensityReport:
    """Scan against ``f2/f0 < 47/46`` plus an explicit tetrahedron-boundary search.

    Passing means no small subcomplex is dense enough to be (or contain) an
    obstruction of that density; it is a necessary-condition check, not a
    proof that the complex is aspherical.
    """
    rep = densest_subcomplex(c, max_vertices, threshold=ASPHERICITY_THRESHOLD, **kw)
    rep.tetrahedra = tetrahedron_boundaries(c)
    return rep


def density_certificates(c: Complex2, max_vertices: int = DEFAULT_MAX_VERTICES,
                         max_vertices_aspherical: int | None = None, **kw) -> tuple[DensityReport, DensityReport]:
    """Both certificates, sharing one scan when the two size bounds agree."""
    c2 = max_vertices if max_vertices_aspherical is None else max_vertices_aspherical
    hyp = hyperbolicity_certificate(c, max_vertices, **kw)
    if c2 == max_vertices:
        asph = replace(hyp, threshold=ASPHERICITY_THRESHOLD, tetrahedra=tetrahedron_boundaries(c))
    else:
        asph = asphericity_certificate(c, c2, **kw)
    return hyp, asph


def face_deletion_witness(c: Complex2, vertices: Sequence[int], threshold: Fraction = HYPERBOLICITY_THRESHOLD) -> list[tuple[int, int, int]]:
    """Faces on ``vertices`` numbering exactly ``ceil(threshold * |vertices|)``.

    Starts from the induced faces and deletes one face at a time; requires
    the induced subcomplex to meet the threshold.
    """
    vs = set(vertices)
    faces = [t for t in c.triples() if vs.issuperset(t)]
    target = math.ceil(threshold * len(vs))
    if len(faces) < target:
        raise ValueError(f"{len(faces)} faces on {len(vs)} vertices is below the threshold")
    while len(faces) > target:
        faces.pop()
    return faces


def brute_force_densest(c: Complex2, max_vertices: int) -> tuple[Fraction, tuple[int, ...]]:
    """Reference scan over every vertex subset (small ``n`` only)."""
    tri = c.triples()
    best, best_set = Fraction(0), ()
    for k in range(1, min(max_vertices, c.n) + 1):
        for W in combinations(range(1, c.n + 1), k):
            s = set(W)
            f2 = sum(1 for t in tri if s.issuperset(t))
            if not f2:
                continue
            r = Fraction(f2, k)
            if r > best or (r == best and W < best_set):
                best, best_set = r, W
    return best, best_set


def union_bound_terms(n: int, max_vertices: int) -> list[Fraction]:
    """``C(n,k) C(C(k,3), ceil(3k/2)) (3/n)^ceil(3k/2)`` for ``k = 1..max_vertices``."""
    terms = []
    for k in range(1, max_vertices + 1):
        m = -(-3 * k // 2)
        terms.append(comb(n, k) * comb(comb(k, 3), m) * Fraction(3, n) ** m)
    return terms


def union_bound_value(n: int, max_vertices: int) -> Fraction:
    """Exact union bound on some ``<= C'``-vertex subcomplex reaching density ``3/2``."""
    if n < 1 or max_vertices < 1:
        raise ValueError("n and max_vertices must be positive")
    return sum(union_bound_terms(n, max_vertices), Fraction(0))
