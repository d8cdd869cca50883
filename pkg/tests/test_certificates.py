import math
from fractions import Fraction

import numpy as np
import pytest

from hypertrees.certificates import (
    ASPHERICITY_THRESHOLD,
    HYPERBOLICITY_THRESHOLD,
    asphericity_certificate,
    densest_subcomplex,
    density_certificates,
    face_deletion_witness,
    hyperbolicity_certificate,
    tetrahedron_boundaries,
    union_bound_terms,
    union_bound_value,
)
from hypertrees.complex import Complex2, cone, rp2, triangles
from hypertrees.sampler import build_kernel, make_rng, sample_dpp

from oracles import densest_brute, union_bound_float


def _random_complex(rng, n):
    p = rng.random()
    idx = [i for i in range(math.comb(n, 3)) if rng.random() < p]
    return Complex2.from_indices(n, idx)


def test_rp2_fails_three_halves():
    rep = hyperbolicity_certificate(rp2(), 6)
    assert rep.vertices == (1, 2, 3, 4, 5, 6)
    assert (rep.f0, rep.f2, rep.ratio) == (6, 10, Fraction(5, 3))
    assert rep.passed is False
    assert rep.exhaustive


def test_cone_n4():
    rep = hyperbolicity_certificate(cone(4), 4)
    assert rep.ratio == Fraction(3, 4)
    assert rep.passed is True


def test_empty_complex_passes_vacuously():
    rep = asphericity_certificate(Complex2(6, 0), 6)
    assert rep.vertices == () and rep.ratio == 0
    assert rep.passed is True


def test_matches_brute_force_random():
    rng = np.random.default_rng(21)
    for _ in range(120):
        n = int(rng.integers(3, 9))
        c = _random_complex(rng, n)
        cmax = int(rng.integers(3, n + 1))
        rep = densest_subcomplex(c, cmax)
        assert (rep.ratio, rep.vertices) == densest_brute(c.triples(), n, cmax)
        assert rep.f2 == sum(1 for t in c.triples() if set(t) <= set(rep.vertices))


def test_bounded_and_plain_scans_agree_at_n30():
    c = sample_dpp(build_kernel(30), make_rng(8)).faces
    a = densest_subcomplex(c, 7)
    b = densest_subcomplex(c, 7, bounded=False)
    assert (a.ratio, a.vertices) == (b.ratio, b.vertices)
    assert a.visited < b.visited


def test_monotone_in_max_vertices():
    rng = np.random.default_rng(5)
    for _ in range(10):
        c = _random_complex(rng, 9)
        ratios = [densest_subcomplex(c, k).ratio for k in range(3, 10)]
        assert ratios == sorted(ratios)


def test_deleting_faces_never_increases_ratio():
    rng = np.random.default_rng(6)
    for _ in range(10):
        c = _random_complex(rng, 8)
        faces = list(c.faces)
        if not faces:
            continue
        drop = faces[: len(faces) // 3]
        d = Complex2.from_indices(8, [f for f in faces if f not in drop])
        assert densest_subcomplex(d, 8).ratio <= densest_subcomplex(c, 8).ratio


def test_face_deletion_witness_hits_exact_threshold():
    c = rp2()
    faces = face_deletion_witness(c, range(1, 7))
    assert len(faces) == 9 == math.ceil(Fraction(3, 2) * 6)
    # full simplex on 5 vertices: 10 faces, need ceil(7.5) = 8
    full = Complex2.from_indices(5, range(10))
    assert len(face_deletion_witness(full, range(1, 6))) == 8
    with pytest.raises(ValueError):
        face_deletion_witness(cone(5), range(1, 6))


def test_budget_marks_partial():
    c = Complex2.from_indices(10, range(0, 120, 2))
    rep = densest_subcomplex(c, 8, budget=50)
    assert not rep.exhaustive
    assert rep.to_json()["exhaustive"] is False


def test_tetrahedron_detection():
    tet = Complex2.from_triples(5, [(1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4), (1, 2, 5)])
    assert tetrahedron_boundaries(tet) == [(1, 2, 3, 4)]
    assert tetrahedron_boundaries(rp2()) == []
    rep = asphericity_certificate(tet, 5)
    assert rep.passed is False


def test_asphericity_threshold_on_rp2():
    rep = asphericity_certificate(rp2(), 6)
    assert rep.threshold == ASPHERICITY_THRESHOLD
    assert rep.ratio >= Fraction(47, 46)
    assert rep.passed is False


def test_shared_scan_reports():
    hyp, asph = density_certificates(rp2(), 6)
    assert hyp.threshold == HYPERBOLICITY_THRESHOLD
    assert asph.threshold == ASPHERICITY_THRESHOLD
    assert hyp.vertices == asph.vertices
    assert asph.tetrahedra == []


def test_rejects_tiny_max_vertices():
    with pytest.raises(ValueError):
        densest_subcomplex(rp2(), 2)


def test_report_json():
    obj = hyperbolicity_certificate(rp2(), 6, complex_id="rp2").to_json()
    assert obj["ratio"] == "5/3"
    assert obj["pass"] is False
    assert obj["scan"]["visited"] > 0


def test_union_bound_small_cases():
    assert union_bound_value(10, 3) == 0
    assert union_bound_value(100, 4) == 0
    # k=5 and k=6 terms only
    exp = (math.comb(100, 5) * math.comb(10, 8) * Fraction(3, 100) ** 8
           + math.comb(100, 6) * math.comb(20, 9) * Fraction(3, 100) ** 9)
    assert union_bound_value(100, 6) == exp


def test_union_bound_against_float_oracle():
    for n in (30, 50, 100, 400):
        for c in (6, 10, 12):
            exact = float(union_bound_value(n, c))
            assert exact == pytest.approx(union_bound_float(n, c), rel=1e-12)


def test_union_bound_decreasing_in_n():
    vals = [union_bound_value(n, 6) for n in (50, 100, 200, 400)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_union_bound_terms_len():
    assert len(union_bound_terms(20, 7)) == 7
    with pytest.raises(ValueError):
        union_bound_value(0, 3)
