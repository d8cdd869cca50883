"""Sampling 2-trees from the torsion-squared (determinantal) measure.

Kernel
------
The measure is the projection DPP on triangles whose kernel is the
orthogonal projection onto the row space of the boundary ``B``.  On the
complete 2-skeleton ``B B^T + d1^T d1 = n I`` on edges, and ``B B^T`` acts as
``n`` on cycles, so the projection is ``K = B^T B / n``: ``3/n`` on the
diagonal, ``+-1/n`` for triangles sharing an edge and ``0`` otherwise.
:func:`build_kernel` checks this against the projection computed from
scratch before trusting the three orbit values.

Exact sampler
-------------
Chain-rule sampling with the integer Gram matrix ``G = B^T B = n K``.  After
choosing a set ``S`` the conditional diagonal is ``det G[S+i] / (n det G[S])``;
these determinants are updated with the fraction-free (Bareiss) recurrence,
so every probability is an exact ratio of integers and each draw is an exact
integer draw.  The final ``det G[S]`` equals ``|H_1(T)|^2 n^(n-2)``.

RNG
---
``numpy.random.Generator`` with the ``PCG64`` bit generator, seeded with the
integer seed (stream version ``RNG_VERSION``).  Exact draws below ``2**63``
use ``Generator.integers``; larger bounds concatenate 64-bit words from
``Generator.integers(0, 2**64, dtype=uint64)`` (most significant first),
mask to the bound's bit length and reject values ``>= bound``.
"""

from __future__ import annotations

import math
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb, isqrt
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .complex import (
    Complex2,
    boundary_columns,
    cone,
    is_2tree,
    reduced_boundary,
    reduced_columns,
    triangle_index,
    triangles,
)
from .homology import TorsionGroup, h1
from .linalg import adjugate, determinant

RNG_NAME = "numpy.PCG64"
RNG_VERSION = 1
RATIONAL_MAX_N = 12
FLOAT_MAX_N = 50


class ResourceError(MemoryError):
    """The requested kernel does not fit the backend's budget."""


class NumericalFailure(RuntimeError):
    """The float sampler kept producing non-bases."""


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in ``[0, bound)`` for arbitrarily large ``bound``."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    if bound <= 1 << 63:
        return int(rng.integers(bound))
    bits = bound.bit_length()
    words = (bits + 63) // 64
    while True:
        x = 0
        for w in rng.integers(0, 1 << 64, size=words, dtype=np.uint64):
            x = (x << 64) | int(w)
        x &= (1 << bits) - 1
        if x < bound:
            return x


# ---------------------------------------------------------------- kernel


@lru_cache(maxsize=None)
def _gram_neighbours(n: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Off-diagonal nonzeros of ``B^T B``: triangles sharing an edge, with sign."""
    cols = boundary_columns(n)
    by_edge: dict[int, list[tuple[int, int]]] = {}
    for t, col in enumerate(cols):
        for e, s in col:
            by_edge.setdefault(e, []).append((t, s))
    out = []
    for t, col in enumerate(cols):
        nb = []
        for e, s in col:
            for u, su in by_edge[e]:
                if u != t:
                    nb.append((u, s * su))
        out.append(tuple(sorted(nb)))
    return tuple(out)


def _gram_column(n: int, j: int) -> list[int]:
    v = [0] * comb(n, 3)
    v[j] = 3
    for i, s in _gram_neighbours(n)[j]:
        v[i] = s
    return v


def _gram_sparse(n: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for j, nb in enumerate(_gram_neighbours(n)):
        rows.append(j), cols.append(j), vals.append(3.0)
        for i, s in nb:
            rows.append(i), cols.append(j), vals.append(float(s))
    size = comb(n, 3)
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size))


def _exact_projection(n: int) -> list[list[Fraction]]:
    """``P = R^T (R R^T)^-1 R`` for the full-row-rank reduced boundary ``R``."""
    r = comb(n - 1, 2)
    cols = reduced_columns(n)
    N = len(cols)
    gram = [[Fraction(0)] * r for _ in range(r)]
    by_row: dict[int, list[tuple[int, int]]] = {}
    for t, col in enumerate(cols):
        for e, s in col:
            by_row.setdefault(e, []).append((t, s))
    for t, col in enumerate(cols):
        for e, s in col:
            for f, s2 in col:
                gram[e][f] += s * s2
    # Gauss-Jordan inverse
    a = [row[:] + [Fraction(int(i == j)) for j in range(r)] for i, row in enumerate(gram)]
    for c in range(r):
        piv = next(i for i in range(c, r) if a[i][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        p = a[c][c]
        a[c] = [v / p for v in a[c]]
        for i in range(r):
            if i != c and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[c])]
    inv = [row[r:] for row in a]
    P = [[Fraction(0)] * N for _ in range(N)]
    for s_ in range(N):
        for t_ in range(s_, N):
            acc = Fraction(0)
            for e, x in cols[s_]:
                ie = inv[e]
                for f, y in cols[t_]:
                    acc += x * y * ie[f]
            P[s_][t_] = P[t_][s_] = acc
    return P


@dataclass(frozen=True)
class DppKernel:
    """Projection kernel on the ``C(n, 3)`` triangles, stored by its orbit values.

    ``diagonal`` is ``K[s, s]``; ``adjacent`` is ``|K[s, t]|`` for triangles
    sharing an edge (the sign is the product of the edge's incidence signs);
    ``distant`` is ``|K[s, t]|`` for triangles sharing at most one vertex.
    """

    n: int
    backend: str
    diagonal: Fraction
    adjacent: Fraction
    distant: Fraction

    @property
    def size(self) -> int:
        return comb(self.n, 3)

    @property
    def rank(self) -> int:
        return comb(self.n - 1, 2)

    @property
    def trace(self) -> Fraction:
        return self.diagonal * self.size

    def _cast(self, x: Fraction):
        return x if self.backend == "rational" else float(x)

    def entry(self, i: int, j: int):
        if i == j:
            return self._cast(self.diagonal)
        for u, s in _gram_neighbours(self.n)[i]:
            if u == j:
                return self._cast(s * self.adjacent)
        return self._cast(self.distant)

    def gram_column(self, j: int) -> list[int]:
        """Column ``j`` of ``n K`` (integers)."""
        return _gram_column(self.n, j)

    def submatrix(self, faces: Sequence[int]) -> list[list]:
        return [[self.entry(i, j) for j in faces] for i in faces]

    def dense(self):
        """Full matrix: Fractions for the rational backend, float ndarray otherwise."""
        if self.backend == "rational":
            return [[self.entry(i, j) for j in range(self.size)] for i in range(self.size)]
        return (_gram_sparse(self.n) / self.n).toarray()


def _orbit_values(n: int, P: list[list[Fraction]]) -> tuple[Fraction, Fraction, Fraction]:
    """Check that ``P`` is ``B^T B / n`` exactly and return its orbit values."""
    tri = triangles(n)
    nb = _gram_neighbours(n)
    diag = {P[i][i] for i in range(len(P))}
    if len(diag) != 1:
        raise ArithmeticError("kernel diagonal is not constant")
    adj, dist = set(), set()
    for i in range(len(P)):
        signs = dict(nb[i])
        for j in range(len(P)):
            if i == j:
                continue
            shared = len(set(tri[i]) & set(tri[j]))
            if shared == 2:
                adj.add(P[i][j] * signs[j])
            else:
                dist.add(abs(P[i][j]))
    if len(adj) > 1 or len(dist) > 1:
        raise ArithmeticError("kernel is not constant on orbits")
    # n = 3 has a single triangle, so the off-diagonal orbits are empty
    d = diag.pop()
    a = adj.pop() if adj else Fraction(1, n)
    z = dist.pop() if dist else Fraction(0)
    if (d, a, z) != (Fraction(3, n), Fraction(1, n), Fraction(0)):
        raise ArithmeticError(f"kernel orbit values {(d, a, z)} differ from B^T B / n")
    return d, a, z


@lru_cache(maxsize=None)
def build_kernel(n: int, backend: str | None = None) -> DppKernel:
    """Projection kernel of the torsion-squared measure on ``[n]``.

    The rational backend recomputes the projection exactly from the reduced
    boundary and confirms its orbit structure (``n <= 12``).  The float
    backend checks ``K^2 = K`` to ``1e-9`` with sparse products.
    """
    if n < 3:
        raise ValueError("kernel needs n >= 3")
    backend = backend or ("rational" if n <= 10 else "float")
    if backend == "rational":
        if n > RATIONAL_MAX_N:
            raise ResourceError(f"rational kernel limited to n <= {RATIONAL_MAX_N}")
        d, a, z = _orbit_values(n, _exact_projection(n))
        return DppKernel(n, backend, d, a, z)
    if backend == "float":
        if n > FLOAT_MAX_N:
            raise ResourceError(f"float kernel limited to n <= {FLOAT_MAX_N}")
        K = _gram_sparse(n) / n
        err = abs(K @ K - K).max()
        if err > 1e-9 or abs(K.diagonal().sum() - comb(n - 1, 2)) > 1e-9:
            raise ArithmeticError(f"float kernel is not a projection (error {err:.2e})")
        return DppKernel(n, backend, Fraction(3, n), Fraction(1, n), Fraction(0))
    raise ValueError(f"unknown backend {backend!r}")


def _as_indices(n: int, faces: Iterable) -> list[int]:
    out = []
    for f in faces:
        out.append(f if isinstance(f, (int, np.integer)) else triangle_index(sorted(f), n))
    if len(set(out)) != len(out):
        raise ValueError("faces must be distinct")
    return [int(f) for f in out]


def containment_probability(k: DppKernel, faces: Iterable) -> tuple[Fraction, Fraction]:
    """``P(faces subset of T) = det K[faces]`` and the product-of-marginals bound ``(3/n)^|faces|``."""
    idx = _as_indices(k.n, faces)
    gram = [[int(k.entry(i, j) * k.n) if k.backend == "rational" else None for j in idx] for i in idx]
    if k.backend != "rational":
        g = _gram_neighbours(k.n)
        gram = [[3 if i == j else dict(g[i]).get(j, 0) for j in idx] for i in idx]
    det = determinant(gram) if idx else 1
    return Fraction(det, k.n ** len(idx)), Fraction(3, k.n) ** len(idx)


# ---------------------------------------------------------------- records


@dataclass
class SampleRecord:
    n: int
    seed: int
    method: str
    faces: Complex2
    h1_factors: tuple[int, ...]
    h1_order: int
    ms: float | None = None

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "method": self.method,
            "faces": [list(t) for t in self.faces.triples()],
            "h1_factors": list(self.h1_factors),
            "h1_order": self.h1_order,
            "ms": None if self.ms is None else round(self.ms, 3),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampleRecord":
        n = int(obj["n"])
        return cls(
            n=n,
            seed=int(obj["seed"]),
            method=obj["method"],
            faces=Complex2.from_triples(n, obj["faces"]),
            h1_factors=tuple(obj["h1_factors"]),
            h1_order=int(obj["h1_order"]),
            ms=obj.get("ms"),
        )

    @property
    def torsion(self) -> TorsionGroup:
        return TorsionGroup(self.h1_factors)


def _torsion_of(c: Complex2, order: int | None = None) -> TorsionGroup:
    if order == 1:
        return TorsionGroup()
    betti, tors = h1(c)
    if betti:
        raise ArithmeticError("sampled complex is not a 2-tree")
    return tors


# ---------------------------------------------------------------- DPP


def _sample_exact(k: DppKernel, rng: np.random.Generator) -> tuple[Complex2, int]:
    n, N, r = k.n, k.size, k.rank
    w = [3] * N
    d = 1
    history: list[tuple[int, list[int], int, int]] = []
    chosen = []
    for t in range(r):
        total = sum(w)
        assert total == n * (r - t) * d
        u = randbelow(rng, total)
        acc = 0
        for s, ws in enumerate(w):
            acc += ws
            if u < acc:
                break
        v = _gram_column(n, s)
        for sk, col, dk1, dk in history:
            x = v[sk]
            v = [(dk1 * a - c * x) // dk for a, c in zip(v, col)]
        d_new = w[s]
        w = [(d_new * a - c * c) // d for a, c in zip(w, v)]
        history.append((s, v, d_new, d))
        d = d_new
        chosen.append(s)
    scale = n ** (n - 2)
    sq, rem = divmod(d, scale)
    order = isqrt(sq)
    if rem or order * order != sq:
        raise ArithmeticError("final Gram determinant is not |H1|^2 n^(n-2)")
    return Complex2.from_indices(n, chosen), order


def _sample_float(k: DppKernel, rng: np.random.Generator) -> Complex2:
    n, N, r = k.n, k.size, k.rank
    nb = _gram_neighbours(n)
    C = np.zeros((N, r))
    w = np.full(N, 3.0 / n)
    chosen = []
    for t in range(r):
        p = np.clip(w, 0.0, None)
        cdf = np.cumsum(p)
        s = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        s = min(s, N - 1)
        v = np.zeros(N)
        v[s] = 3.0
        for i, sg in nb[s]:
            v[i] = sg
        v /= n
        if t:
            v -= C[:, :t] @ C[s, :t]
        C[:, t] = v / math.sqrt(v[s])
        w -= C[:, t] ** 2
        w[s] = 0.0
        chosen.append(s)
    return Complex2.from_indices(n, chosen)


def sample_dpp(k: DppKernel, rng: np.random.Generator, *, seed: int = -1, retries: int = 20) -> SampleRecord:
    """One 2-tree from the kernel's determinantal measure."""
    t0 = time.perf_counter()
    if k.backend == "rational":
        c, order = _sample_exact(k, rng)
        tors = _torsion_of(c, order)
    else:
        for _ in range(retries):
            c = _sample_float(k, rng)
            if is_2tree(c):
                break
        else:
            raise NumericalFailure(f"float DPP sampler failed {retries} times at n={k.n}")
        tors = _torsion_of(c)
    ms = (time.perf_counter() - t0) * 1e3
    return SampleRecord(k.n, seed, "dpp", c, tors.invariant_factors, tors.order, ms)


# ---------------------------------------------------------------- Metropolis-Hastings


@dataclass
class MhState:
    complex: Complex2
    order: int
    steps: int = 0
    accepted: int = 0
    valid: int = 0
    occupancy: Counter = field(default_factory=Counter)
    batches: list[Counter] = field(default_factory=list)
    tracked: list[tuple[int, int]] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.steps if self.steps else 0.0

    def batch_means(self, predicate) -> tuple[float, float]:
        """Time-average of ``predicate(order)`` and its batch-means standard error."""
        vals = []
        for b in self.batches:
            tot = sum(b.values())
            if tot:
                vals.append(sum(c for o, c in b.items() if predicate(o)) / tot)
        total = sum(self.occupancy.values())
        mean = sum(c for o, c in self.occupancy.items() if predicate(o)) / total
        if len(vals) < 2:
            return mean, float("nan")
        return mean, float(np.std(vals, ddof=1) / math.sqrt(len(vals)))

    def face_marginal(self) -> tuple[float, float]:
        """Fraction of steps containing the tracked face, with batch-means standard error."""
        if not self.tracked:
            raise ValueError("no face was tracked")
        hits = sum(h for h, _ in self.tracked)
        total = sum(t for _, t in self.tracked)
        vals = [h / t for h, t in self.tracked if t]
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("nan")
        return hits / total, se


class MhChain:
    """Basis-exchange Metropolis chain targeting ``|H_1|^2``.

    A move picks ``sigma`` in ``T`` and ``tau`` outside ``T`` uniformly and
    proposes ``T - sigma + tau``.  With ``M`` the reduced boundary of ``T``,
    ``|H_1(T)| = |det M|``; the exchanged determinant is row ``sigma`` of
    ``adj(M)`` against the column of ``tau`` (Laplace expansion), so the
    basis test and the weight are exact integer operations.  The adjugate
    is updated exactly on acceptance.  ``verify_every`` (if set) recomputes
    ``|H_1|`` by Smith normal form at that period; ``track_face`` (a triangle
    index) records per-batch occupancy of that face.
    """

    def __init__(self, n: int, rng: np.random.Generator, initial: Complex2 | None = None,
                 *, verify_every: int | None = None, track_face: int | None = None):
        self.n = n
        self.rng = rng
        self.verify_every = verify_every
        self.track_face = track_face
        self.cols = reduced_columns(n)
        N = comb(n, 3)
        c = initial if initial is not None else cone(n)
        if c.n != n or not is_2tree(c):
            raise ValueError("initial complex must be a 2-tree on [n]")
        self.faces = list(c.faces)
        self.pos = {f: i for i, f in enumerate(self.faces)}
        inside = set(self.faces)
        self.outside = [t for t in range(N) if t not in inside]
        self.outpos = {t: i for i, t in enumerate(self.outside)}
        r = len(self.faces)
        big = r > 39
        dtype = object if big else np.int64
        if initial is None:
            # cone at vertex 1: M is the identity up to column order
            M = reduced_boundary(c)
            det, adj = adjugate(M) if r <= 60 else (determinant(M), None)
        else:
            det, adj = adjugate(reduced_boundary(c))
        if adj is None:
            raise ValueError("initial complex too large for the exact chain")
        self.A = np.array(adj, dtype=dtype)
        self.D = det
        self.state = MhState(c, abs(det))

    def complex(self) -> Complex2:
        return Complex2.from_indices(self.n, self.faces)

    def _exchange_det(self, s: int, tau: int) -> int:
        row = self.A[s]
        return sum(sg * int(row[e]) for e, sg in self.cols[tau])

    def _accept(self, s: int, tau: int, d_new: int):
        A, D = self.A, self.D
        u = np.zeros(A.shape[0], dtype=A.dtype)
        for e, sg in self.cols[tau]:
            u = u + sg * A[:, e]
        rs = A[s].copy()
        A2 = (d_new * A - np.outer(u, rs)) // D
        A2[s] = rs
        self.A = A2
        self.D = d_new
        sigma = self.faces[s]
        self.faces[s] = tau
        del self.pos[sigma]
        self.pos[tau] = s
        j = self.outpos.pop(tau)
        self.outside[j] = sigma
        self.outpos[sigma] = j

    def run(self, steps: int, batch_size: int | None = None) -> MhState:
        st = self.state
        r = len(self.faces)
        m = len(self.outside)
        batch_size = batch_size or max(1, steps // 50)
        block = 65536
        done = 0
        cur = Counter()
        hits = 0
        seen = 0
        track = self.track_face
        D2 = self.D * self.D
        while done < steps:
            b = min(block, steps - done)
            if m:
                ss = self.rng.integers(r, size=b)
                ts = self.rng.integers(m, size=b)
                us = self.rng.random(b)
            for i in range(b):
                if m:
                    s = int(ss[i])
                    tau = self.outside[int(ts[i])]
                    d_new = self._exchange_det(s, tau)
                    if d_new:
                        st.valid += 1
                        d2 = d_new * d_new
                        if d2 >= D2 or us[i] * D2 < d2:
                            self._accept(s, tau, d_new)
                            D2 = d2
                            st.accepted += 1
                st.steps += 1
                o = abs(self.D)
                cur[o] += 1
                if track is not None:
                    seen += 1
                    if track in self.pos:
                        hits += 1
                if st.steps % batch_size == 0:
                    st.batches.append(cur)
                    st.occupancy.update(cur)
                    cur = Counter()
                    if track is not None:
                        st.tracked.append((hits, seen))
                        hits = seen = 0
                if self.verify_every and st.steps % self.verify_every == 0:
                    _, tors = h1(self.complex())
                    if tors.order != o:
                        raise ArithmeticError("adjugate update drifted from the Smith form")
            done += b
        if cur:
            st.batches.append(cur)
            st.occupancy.update(cur)
            if track is not None and seen:
                st.tracked.append((hits, seen))
        st.order = abs(self.D)
        st.complex = self.complex()
        return st


def mh_chain(n: int, steps: int, rng: np.random.Generator, initial: Complex2 | None = None,
             **kw) -> MhState:
    return MhChain(n, rng, initial).run(steps, **kw)


# ---------------------------------------------------------------- batches


def _split(count: int, workers: int) -> list[int]:
    return [count // workers + (j < count % workers) for j in range(workers)]


def _worker(args) -> list[SampleRecord]:
    n, count, method, seed, mh_steps, backend, timing = args
    rng = make_rng(seed)
    out = []
    if method == "dpp":
        k = build_kernel(n, backend)
        for _ in range(count):
            rec = sample_dpp(k, rng, seed=seed)
            if not timing:
                rec.ms = None
            out.append(rec)
    elif method == "mh":
        chain = MhChain(n, rng)
        chain.run(mh_steps)  # burn-in
        for _ in range(count):
            t0 = time.perf_counter()
            st = chain.run(mh_steps)
            tors = _torsion_of(st.complex, st.order)
            ms = (time.perf_counter() - t0) * 1e3 if timing else None
            out.append(SampleRecord(n, seed, "mh", st.complex, tors.invariant_factors, tors.order, ms))
    else:
        raise ValueError(f"unknown method {method!r}")
    return out


def sample_many(n: int, count: int, *, method: str = "dpp", seed: int = 0, threads: int = 1,
                mh_steps: int = 1000, backend: str | None = None, timing: bool = True) -> list[SampleRecord]:
    """``count`` records from ``threads`` independent streams seeded ``seed + j``, concatenated."""
    if method not in ("dpp", "mh"):
        raise ValueError(f"unknown method {method!r}")
    threads = max(1, min(threads, count)) if count else 1
    jobs = [(n, c, method, seed + j, mh_steps, backend, timing) for j, c in enumerate(_split(count, threads))]
    if threads == 1:
        return _worker(jobs[0])
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return [rec for chunk in pool.map(_worker, jobs) for rec in chunk]
