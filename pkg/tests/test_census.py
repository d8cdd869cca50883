import json
import math
import warnings
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest

from hypertrees import census as cen
from hypertrees.census import (
    CensusResult,
    CensusTooLarge,
    containment_counts,
    count_bound_check,
    enumerate_2trees,
    load_census,
    run_census,
    torsion_distribution,
    trivial_h1_probability,
)
from hypertrees.complex import Complex2, boundary_matrix, rp2, triangles
from hypertrees.homology import TorsionGroup


def _brute_2trees(n):
    """Face sets of the right size whose boundary columns have full rank over R."""
    r = math.comb(n - 1, 2)
    d = np.array(boundary_matrix(n), dtype=float)
    out = []
    for s in combinations(range(math.comb(n, 3)), r):
        if np.linalg.matrix_rank(d[:, s]) == r:
            out.append(s)
    return out


@pytest.mark.parametrize("n,total", [(3, 1), (4, 4), (5, 125)])
def test_small_counts(n, total):
    res = run_census(n)
    assert res.total == total
    assert res.kalai_sum == n ** math.comb(n - 2, 2)
    assert res.passed


def test_enumeration_matches_brute_force_n5():
    got = [c.faces for c in enumerate_2trees(5)]
    assert got == _brute_2trees(5)


def test_n6_census(census6):
    assert census6.total == 46620
    assert census6.kalai_sum == 6**6
    assert census6.histogram == {(): 46608, (2,): 12}
    assert census6.weighted_count((2,)) == 48


def test_n6_projective_planes_are_relabelings_of_rp2(census6):
    planes = {m for m, t in census6.records if t == (2,)}
    assert rp2().mask in planes
    # every 2-torsion complex has each edge in exactly two faces
    for m in planes:
        c = Complex2(6, m)
        d = np.abs(np.array(boundary_matrix(6, c.faces)))
        assert (d.sum(axis=1) == 2).all()


def test_pair_containment(census6):
    faces = [(1, 2, 3), (4, 5, 6)]
    w, pw = containment_counts(6, faces, weighted=True, census=census6)
    assert pw == Fraction(1, 4)
    u, pu = containment_counts(6, faces, census=census6)
    assert u == 11664
    assert pu == Fraction(11664, 46620)


def test_single_face_marginal_is_half(census6):
    for t in triangles(6)[:5]:
        _, p = containment_counts(6, [t], weighted=True, census=census6)
        assert p == Fraction(1, 2)


def test_count_bound(census6):
    total, bound, ratio = count_bound_check(6, census6)
    assert total == 46620
    assert ratio < 1


def test_trivial_probability(census6):
    p, bound = trivial_h1_probability(6, census6)
    assert p == Fraction(46608, 46656)
    # (e/3)^10 * 6^4, evaluated directly
    assert bound == pytest.approx(483.45, rel=1e-3)


def test_torsion_distribution(census6):
    dist = torsion_distribution(census6)
    assert dist == {TorsionGroup(): Fraction(46608, 46656), TorsionGroup((2,)): Fraction(48, 46656)}
    assert sum(dist.values()) == 1


def test_refuses_large_n():
    with pytest.raises(CensusTooLarge) as ei:
        run_census(8)
    assert "refused" in str(ei.value)
    with pytest.raises(CensusTooLarge):
        run_census(7)


def test_n7_warns_when_allowed():
    with pytest.warns(RuntimeWarning):
        cen._check_cap(7, 7)


def test_parallel_census_is_identical():
    a = run_census(5)
    b = run_census(5, threads=2)
    assert a.records == b.records
    assert a.histogram == b.histogram


def test_cache_roundtrip(tmp_path, monkeypatch):
    monkeypatch.setenv("HYPERTREES_CACHE", str(tmp_path))
    res = load_census(5)
    path = tmp_path / "census-n5.v1.json"
    assert path.exists()
    again = CensusResult.from_json(json.loads(path.read_text()))
    assert again.records == res.records
    path.write_text("{not json")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert load_census(5).total == 125


def test_from_json_rejects_unknown_version():
    obj = run_census(4).to_json()
    obj["version"] = 99
    with pytest.raises(ValueError):
        CensusResult.from_json(obj)
