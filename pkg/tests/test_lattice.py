import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dimergas.lattice import (
    CLASS_REPRESENTATIVE,
    DriftedWeights,
    Edge,
    FlippedWeights,
    VertexClass,
    classify_vertex,
    domain_offset,
    drifted_edge_weight,
    flipped_edge_weight,
    height_change,
    kasteleyn_sign,
    signed_weight,
    to_drifted,
    vertex_at,
)


def test_classify_vertex_examples():
    assert classify_vertex(0, 0) == VertexClass.B0
    assert classify_vertex(1, 1) == VertexClass.B1
    assert classify_vertex(1, 0) == VertexClass.W0
    assert classify_vertex(0, 1) == VertexClass.W1


@given(st.integers(-50, 50), st.integers(-50, 50))
def test_black_iff_even_sum(x, y):
    assert classify_vertex(x, y).is_black == ((x + y) % 2 == 0)


@given(st.integers(-30, 30), st.integers(-30, 30))
def test_domain_offset_roundtrip(x, y):
    cls = classify_vertex(x, y)
    dx, dy = domain_offset(x, y)
    assert vertex_at(cls, dx, dy) == (x, y)


def test_representatives_are_consistent():
    for cls, (x, y) in CLASS_REPRESENTATIVE.items():
        assert classify_vertex(x, y) == cls
        assert domain_offset(x, y) == (0, 0)


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        FlippedWeights(1, -1, 1, 1)
    with pytest.raises(ValueError):
        DriftedWeights(0, 1, 1, 1)


def test_edge_validation():
    with pytest.raises(ValueError):
        Edge(white=(0, 0), black=(1, 0))     # colors swapped
    with pytest.raises(ValueError):
        Edge.between((0, 0), (2, 0))         # not adjacent
    e = Edge.between((0, 0), (1, 0))
    assert e.white == (1, 0) and e.black == (0, 0)


def test_flipped_weights_uniform_and_alternation():
    r = FlippedWeights(1, 1, 1, 1)
    for e in [Edge.between((0, 0), (1, 0)), Edge.between((0, 1), (0, 2)),
              Edge.between((3, 3), (3, 4))]:
        assert flipped_edge_weight(e, r) == 1.0

    r = FlippedWeights(1.5, 2.5, 3.5, 4.5)
    # the two vertical edges from the reference example carry distinct weights
    w_a = flipped_edge_weight(Edge.between((1, 0), (1, 1)), r)
    w_b = flipped_edge_weight(Edge.between((0, 1), (0, 2)), r)
    assert {w_a, w_b} == {r.r1, r.r3}
    # alternation along a column and a row
    col = [flipped_edge_weight(Edge.between((0, y), (0, y + 1)), r) for y in range(4)]
    assert col == [r.r1, r.r3, r.r1, r.r3]
    row = [flipped_edge_weight(Edge.between((x, 0), (x + 1, 0)), r) for x in range(4)]
    assert row == [r.r2, r.r4, r.r2, r.r4]


@given(st.integers(-10, 10), st.integers(-10, 10))
def test_flipped_weight_periodicity(dx, dy):
    r = FlippedWeights(1.0, 2.0, 3.0, 4.0)
    e = Edge.between((1, 0), (1, 1))
    shifted = Edge.between((1 + 2 * dx, 2 * dy), (1 + 2 * dx, 1 + 2 * dy))
    assert flipped_edge_weight(e, r) == flipped_edge_weight(shifted, r)


def test_drifted_weights_around_even_vertex():
    s = DriftedWeights(1.0, 2.0, 3.0, 4.0)
    north = Edge.between((0, 0), (0, 1))
    east = Edge.between((0, 0), (1, 0))
    south = Edge.between((0, 0), (0, -1))
    west = Edge.between((0, 0), (-1, 0))
    assert [drifted_edge_weight(e, s) for e in (north, east, south, west)] \
        == [s.s1, s.s2, s.s3, s.s4]
    # periodicity: the same pattern around (2, 0)
    north2 = Edge.between((2, 0), (2, 1))
    assert drifted_edge_weight(north2, s) == s.s1
    # edges incident to B1 vertices carry weight 1
    assert drifted_edge_weight(Edge.between((1, 1), (1, 2)), s) == 1.0
    assert drifted_edge_weight(Edge.between((1, 1), (2, 1)), s) == 1.0


def test_drifted_uniform():
    s = DriftedWeights(1, 1, 1, 1)
    for e in [Edge.between((0, 0), (1, 0)), Edge.between((1, 1), (1, 2))]:
        assert drifted_edge_weight(e, s) == 1.0


def test_to_drifted_map():
    assert to_drifted(FlippedWeights(1, 1, 1, 1)) == DriftedWeights(1, 1, 1, 1)
    assert to_drifted(FlippedWeights(1, 2, 3, 1)) == DriftedWeights(1, 4, 9, 1)
    assert to_drifted(FlippedWeights(2, 2, 2, 2)) == DriftedWeights(1, 1, 1, 1)


@settings(max_examples=50)
@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.1, 10),
       st.floats(0.1, 10), st.floats(0.25, 4))
def test_to_drifted_scale_invariance(r1, r2, r3, r4, c):
    a = to_drifted(FlippedWeights(r1, r2, r3, r4))
    b = to_drifted(FlippedWeights(c * r1, c * r2, c * r3, c * r4))
    assert np.allclose(a.as_tuple(), b.as_tuple(), rtol=1e-12)


def test_kasteleyn_face_condition():
    # product of signs around every square face is -1
    for x in range(-3, 3):
        for y in range(-3, 3):
            signs = (kasteleyn_sign(Edge.between((x, y), (x + 1, y)))
                     * kasteleyn_sign(Edge.between((x, y + 1), (x + 1, y + 1)))
                     * kasteleyn_sign(Edge.between((x, y), (x, y + 1)))
                     * kasteleyn_sign(Edge.between((x + 1, y), (x + 1, y + 1))))
            assert signs == -1


def test_fourier_transform_reproduces_reference_matrices():
    """The frozen weight/sign/monomial conventions are exactly the ones whose
    Fourier transform gives the 2x2 matrices used by the spectral module."""
    from dimergas.spectral import kd_matrix, kf_matrix

    rng = np.random.default_rng(0)
    r = FlippedWeights(1.3, 0.7, 2.1, 0.9)
    s = to_drifted(r)

    def khat(weights, z, w):
        K = np.zeros((2, 2), complex)
        for wi, wcls in ((0, VertexClass.W0), (1, VertexClass.W1)):
            wx, wy = CLASS_REPRESENTATIVE[wcls]
            for nb in [(wx + 1, wy), (wx - 1, wy), (wx, wy + 1), (wx, wy - 1)]:
                bi = classify_vertex(*nb).index
                sw = signed_weight(Edge.between((wx, wy), nb), weights)
                dbx, dby = domain_offset(*nb)
                K[wi, bi] += sw * z ** dbx * w ** dby
        return K

    for _ in range(10):
        th, ph = rng.uniform(0, 2 * np.pi, 2)
        z, w = np.exp(1j * th), np.exp(1j * ph)
        assert np.allclose(khat(r, z, w), kf_matrix(r, z, w), atol=1e-13)
        assert np.allclose(khat(s, z, w), kd_matrix(s, z, w), atol=1e-13)


def test_height_change_rules():
    # vertical edge {(1,0),(1,1)}, traversed eastward: north endpoint (1,1)
    # is black, so black is on the left
    e = Edge.between((1, 0), (1, 1))
    assert height_change(e, True, "E") == 3
    assert height_change(e, False, "E") == -1
    assert height_change(e, True, "W") == -3
    assert height_change(e, False, "W") == 1
    with pytest.raises(ValueError):
        height_change(e, True, "N")   # traversal parallel to the edge
    with pytest.raises(ValueError):
        height_change(e, True, "X")


def test_height_changes_cancel_around_vertex():
    # the four jumps around any vertex sum to zero for any cover status of
    # a perfect matching (exactly one incident edge covered)
    for vx, vy in [(1, 1), (2, 1), (2, 2), (3, 2)]:
        crossings = (
            (Edge.between((vx, vy - 1), (vx, vy)), "E"),
            (Edge.between((vx, vy), (vx + 1, vy)), "N"),
            (Edge.between((vx, vy), (vx, vy + 1)), "W"),
            (Edge.between((vx - 1, vy), (vx, vy)), "S"),
        )
        for covered_idx in range(4):
            total = sum(height_change(e, i == covered_idx, t)
                        for i, (e, t) in enumerate(crossings))
            assert total == 0
            jumps = sorted(height_change(e, i == covered_idx, t)
                           for i, (e, t) in enumerate(crossings))
            assert sorted(map(abs, jumps)) == [1, 1, 1, 3]
