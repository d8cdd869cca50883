"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form as sympy_snf

from hypertrees.census import containment_counts, trivial_h1_probability
from hypertrees.certificates import (
    densest_subcomplex,
    density_certificates,
    hyperbolicity_certificate,
    asphericity_certificate,
    union_bound_value,
)
from hypertrees.cli import main
from hypertrees.complex import Complex2, boundary_matrix, rp2, triangle_index
from hypertrees.homology import h1
from hypertrees.linalg import smith_normal_form
from hypertrees.sampler import MhChain, build_kernel, containment_probability, make_rng, sample_dpp
from hypertrees.torsion_stats import (
    PGroupPartition,
    aut_order,
    log_mean_interval,
    partitions,
    power_mean_check,
    wilson_interval,
)

from oracles import brute_aut_order, densest_brute, union_bound_float


def _report(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\n[criterion {k}] {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, detail


def test_criterion_1_kalai_identity(census6, capsys):
    sums = {}
    for n in (3, 4, 5, 6):
        code = main(["verify", "-n", str(n), "--json"])
        capsys.readouterr()
        sums[n] = code
    ok = all(c == 0 for c in sums.values())
    expected = {3: 1, 4: 4, 5: 125, 6: 46656}
    ok = ok and census6.kalai_sum == expected[6]
    ok = ok and census6.total == 46620 and census6.histogram[(2,)] == 12
    _report(capsys, 1, ok,
            f"verify exit codes {sums}; N(6)={census6.total}, sum |H1|^2={census6.kalai_sum}, "
            f"|H1|=2 count={census6.histogram[(2,)]}")


def test_criterion_2_pair_correlation(census6, capsys):
    faces = [(1, 2, 3), (4, 5, 6)]
    _, weighted = containment_counts(6, faces, weighted=True, census=census6)
    count, unweighted = containment_counts(6, faces, census=census6)
    minor, _ = containment_probability(build_kernel(6, "rational"), faces)
    ok = weighted == Fraction(1, 4) and unweighted == Fraction(11664, 46620) and minor == Fraction(1, 4)
    _report(capsys, 2, ok, f"weighted {weighted}, unweighted {count}/46620, kernel minor {minor}")


def test_criterion_3_marginals(capsys):
    bad = []
    for n in range(3, 11):
        k = build_kernel(n, "rational")
        diag_ok = all(k.entry(i, i) == Fraction(3, n) for i in range(k.size))
        if not diag_ok or k.trace != comb(n - 1, 2):
            bad.append(n)
    _report(capsys, 3, not bad, f"diagonal 3/n and trace C(n-1,2) for n=3..10; failures {bad}")


def _random_unimodular(rng, k, ops=40):
    m = np.eye(k, dtype=object)
    for _ in range(ops):
        i, j = rng.choice(k, size=2, replace=False)
        r = int(rng.integers(1, 4)) * (1 if rng.random() < 0.5 else -1)
        if rng.random() < 0.5:
            m[i] = m[i] + r * m[j]
        else:
            m[[i, j]] = m[[j, i]]
    return m


def test_criterion_4_homology_oracle(capsys):
    betti, tors = h1(rp2())
    d = np.array(boundary_matrix(6, rp2().faces), dtype=object)
    base = smith_normal_form(d).invariant_factors
    ref = Matrix(d.tolist())
    snf = sympy_snf(ref, domain=ZZ)
    ref_factors = tuple(sorted(abs(int(snf[i, i])) for i in range(min(snf.shape)) if snf[i, i]))
    rng = np.random.default_rng(2024)
    mismatches = 0
    for _ in range(100):
        u = _random_unimodular(rng, d.shape[0])
        v = _random_unimodular(rng, d.shape[1])
        if smith_normal_form(u @ d @ v).invariant_factors != base:
            mismatches += 1
    ok = betti == 0 and tors.invariant_factors == (2,) and base == ref_factors and mismatches == 0
    _report(capsys, 4, ok, f"H1(RP2) = {tors}; SNF {base[-1:]} (sympy agrees: {base == ref_factors}); "
                           f"{mismatches}/100 unimodular mismatches")


@pytest.mark.slow
def test_criterion_5_sampler_n6(capsys):
    target = 48 / 46656
    n = 6
    face = triangle_index((1, 2, 3), n)
    k = build_kernel(n, "rational")
    rng = make_rng(5)
    N = 100_000
    tors2 = 0
    hits = 0
    for _ in range(N):
        r = sample_dpp(k, rng)
        tors2 += r.h1_order == 2
        hits += face in r.faces
    p2 = tors2 / N
    z2 = (p2 - target) / math.sqrt(target * (1 - target) / N)
    pf = hits / N
    zf = (pf - 0.5) / math.sqrt(0.25 / N)
    dpp_ok = abs(z2) <= 3 and abs(zf) <= 3

    chain = MhChain(n, make_rng(6), track_face=face)
    chain.run(20_000)  # burn-in
    st = MhChain(n, make_rng(7), initial=chain.complex(), track_face=face).run(1_000_000, batch_size=10_000)
    m2, se2 = st.batch_means(lambda o: o == 2)
    mf, sef = st.face_marginal()
    mh_ok = abs(m2 - target) <= 3 * se2 and abs(mf - 0.5) <= 3 * sef
    _report(capsys, 5, dpp_ok and mh_ok,
            f"DPP 1e5: P(|H1|=2)={p2:.5f} (z={z2:+.2f}), face marginal {pf:.4f} (z={zf:+.2f}); "
            f"MH 1e6: P(|H1|=2)={m2:.5f}+-{se2:.5f}, face {mf:.4f}+-{sef:.4f}, "
            f"acceptance {st.acceptance_rate:.3f}")


def test_criterion_6_negative_association(census6, capsys):
    rng = np.random.default_rng(66)
    violations = 0
    checked = 0
    for _ in range(100):
        size = int(rng.integers(2, 4))
        faces = [int(x) for x in rng.choice(comb(6, 3), size=size, replace=False)]
        _, p = containment_counts(6, faces, weighted=True, census=census6)
        if p > Fraction(1, 2) ** size:
            violations += 1
        checked += 1
    _report(capsys, 6, violations == 0, f"{checked} face sets of size 2-3, {violations} violations")


def test_criterion_7_scanner_oracle(capsys):
    rng = np.random.default_rng(77)
    mismatches = 0
    for _ in range(50):
        n = int(rng.integers(4, 9))
        p = rng.random()
        c = Complex2.from_indices(n, [i for i in range(comb(n, 3)) if rng.random() < p])
        rep = densest_subcomplex(c, n)
        if rep.ratio != densest_brute(c.triples(), n, n)[0]:
            mismatches += 1
    hyp = hyperbolicity_certificate(rp2(), 6)
    asph = asphericity_certificate(rp2(), 6)
    ok = mismatches == 0 and hyp.ratio == Fraction(5, 3) and hyp.passed is False and asph.passed is False
    _report(capsys, 7, ok, f"{mismatches}/50 mismatches vs brute force; RP2 ratio {hyp.ratio}, "
                           f"fails 3/2: {hyp.passed is False}, fails 47/46: {asph.passed is False}")


def test_criterion_8_union_bound(capsys):
    worst = 0.0
    for n in (30, 50, 100, 200, 400):
        for c in range(1, 13):
            exact = float(union_bound_value(n, c))
            ref = union_bound_float(n, c)
            if ref:
                worst = max(worst, abs(exact - ref) / ref)
            elif exact:
                worst = math.inf
    vals = [union_bound_value(n, 6) for n in (50, 100, 200, 400)]
    decreasing = all(a > b for a, b in zip(vals, vals[1:]))
    ok = worst <= 1e-12 and decreasing
    _report(capsys, 8, ok, f"max relative error {worst:.2e}; C'=6 values "
                           + ", ".join(f"{float(v):.3e}" for v in vals))


@pytest.mark.slow
def test_criterion_9_desk_scale_substitutes(census6, capsys):
    lines = []
    # (a) exact trivial-H1 probability at n=6 and sampled estimates with CIs
    p6, _ = trivial_h1_probability(6, census6)
    a_ok = p6 == Fraction(46608, 46656)
    lines.append(f"(a) P(H1=0) at n=6 = {p6} (= 46608/46656: {p6 == Fraction(46608, 46656)})")
    counts = {10: 2000, 15: 2000, 20: 1000, 25: 400, 30: 100}
    samples = {}
    for n, cnt in counts.items():
        k = build_kernel(n)
        rng = make_rng(900 + n)
        recs = [sample_dpp(k, rng) for _ in range(cnt)]
        samples[n] = recs
        triv = sum(r.h1_order == 1 for r in recs)
        est, lo, hi = wilson_interval(triv, cnt)
        lm, llo, lhi = log_mean_interval([r.h1_order for r in recs])
        a_ok = a_ok and lo <= est <= hi
        lines.append(f"    n={n}: P(H1=0) ~ {est:.4f} [{lo:.4f}, {hi:.4f}] from {cnt}; "
                     f"log E|H1| / n^2 ~ {lm / n**2:.5f} [{llo / n**2:.5f}, {lhi / n**2:.5f}]")

    # (b) density certificates on 100 samples at n=30
    cmax = 10
    hyp_pass = asph_pass = 0
    exhaustive = True
    consistent = True
    ratios = []
    for rec in samples[30]:
        hyp, asph = density_certificates(rec.faces, cmax)
        exhaustive &= hyp.exhaustive
        consistent &= hyp.passed == (hyp.ratio < Fraction(3, 2))
        hyp_pass += bool(hyp.passed)
        asph_pass += bool(asph.passed)
        ratios.append(hyp.ratio)
    b_ok = exhaustive and consistent and len(ratios) == 100
    lines.append(f"(b) n=30, C'=C''={cmax}, 100 samples: 3/2 pass rate {hyp_pass}/100, "
                 f"47/46 pass rate {asph_pass}/100, max f2/f0 range "
                 f"[{float(min(ratios)):.3f}, {float(max(ratios)):.3f}], all scans exhaustive: {exhaustive}")

    # (c) power-mean lemma on 1e5 random vectors and aut_order against brute force
    rng = np.random.default_rng(44)
    viol = 0
    for _ in range(100_000):
        xs = rng.exponential(size=int(rng.integers(1, 51)))
        if not power_mean_check(xs)[2]:
            viol += 1
    groups = 0
    aut_bad = 0
    for p, top in ((2, 6), (3, 3)):
        for s in range(1, top + 1):
            for lam in partitions(s):
                groups += 1
                if aut_order(PGroupPartition(p, lam)) != brute_aut_order(p, lam):
                    aut_bad += 1
    c_ok = viol == 0 and aut_bad == 0
    lines.append(f"(c) power-mean violations {viol}/100000; aut_order mismatches {aut_bad}/{groups} groups")
    _report(capsys, 9, a_ok and b_ok and c_ok, "\n    ".join(lines))
