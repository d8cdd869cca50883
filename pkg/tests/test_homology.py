import pytest
from hypothesis import given, settings, strategies as st

from hypertrees.complex import Complex2, cone, rp2
from hypertrees.homology import NotA2TreeError, TorsionGroup, h1, h1_order, p_valuation


def test_rp2_has_z2():
    betti, tors = h1(rp2())
    assert betti == 0
    assert tors.invariant_factors == (2,)
    assert h1_order(rp2()) == 2


def test_cone_trivial():
    for n in range(3, 9):
        assert h1(cone(n)) == (0, TorsionGroup())


def test_empty_complex_is_graph_cycles():
    assert h1(Complex2(5, 0)) == (6, TorsionGroup())


def test_full_skeleton_n4():
    full = Complex2.from_indices(4, range(4))
    assert h1(full) == (0, TorsionGroup())


def test_h1_order_rejects_non_tree():
    with pytest.raises(NotA2TreeError):
        h1_order(Complex2.from_triples(5, [(1, 2, 3)]))


def test_torsion_group_normalizes():
    g = TorsionGroup((6, 1, 2))
    assert g.invariant_factors == (2, 6)
    assert g.order == 12
    assert str(g) == "Z/2 + Z/6"
    with pytest.raises(ValueError):
        TorsionGroup((2, 3))
    assert str(TorsionGroup()) == "0"


def test_sylow_and_partitions():
    g = TorsionGroup((2, 12, 24))
    assert g.sylow(2) == (3, 2, 1)
    assert g.sylow(3) == (1, 1)
    assert g.sylow(5) == ()
    assert g.partitions == {2: (3, 2, 1), 3: (1, 1)}
    assert TorsionGroup.from_partitions(g.partitions) == g


def test_p_valuation():
    assert p_valuation(48, 2) == 4
    assert p_valuation(48, 3) == 1
    assert p_valuation(7, 2) == 0


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(1, 7))))
def test_relabel_invariance(perm):
    assert h1(rp2().relabel(perm)) == h1(rp2())
