import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dsehs.quadtree import NE, NW, SE, SW, BoundingBox, Quadtree, plane_value, select_triangle


def test_fresh_root():
    t = Quadtree(BoundingBox(0, 32, 0, 32))
    assert len(t) == 4 and len(t.leaves()) == 1
    unit = Quadtree(BoundingBox(0, 1, 0, 1))
    assert not unit.root.can_subdivide
    with pytest.raises(ValueError):
        unit.subdivide(unit.root)


@pytest.mark.parametrize("args", [(0, 0, 0, 4), (3, 2, 0, 4), (0, 4, 5, 5)])
def test_degenerate_box_rejected(args):
    with pytest.raises(ValueError):
        BoundingBox(*args)


def test_subdivide_children():
    t = Quadtree(BoundingBox(0, 32, 0, 32))
    assert t.subdivide(t.root) == 5
    assert len(t) == 9
    kids = t.root.children
    assert kids[NW].bb.corners == ((0, 16), (16, 16), (0, 32), (16, 32))
    assert kids[NE].bb == BoundingBox(16, 32, 16, 32)
    assert kids[SW].bb == BoundingBox(0, 16, 0, 16)
    assert kids[SE].bb == BoundingBox(16, 32, 0, 16)
    with pytest.raises(ValueError):
        t.subdivide(t.root)
    assert BoundingBox(0, 3, 0, 3).mid == (1, 1)


def test_subdivide_interpolates_from_parent_plane():
    t = Quadtree(BoundingBox(0, 4, 0, 4))
    for (b, e) in t.values:
        t.values[b, e] = 1.0 + 2.0 * b + 3.0 * e
    t.subdivide(t.root)
    for (b, e), v in t.values.items():
        assert v == pytest.approx(1.0 + 2.0 * b + 3.0 * e)


def test_select_triangle():
    bb = BoundingBox(0, 2, 0, 2)
    assert select_triangle(bb, 0, 2) == NW
    assert select_triangle(bb, 2, 0) == SE
    assert select_triangle(bb, 1, 1) == SE
    assert select_triangle(bb, 0, 0) == SE


def test_plane_value():
    verts = [(0, 0, 0.0), (2, 0, 2.0), (0, 2, 4.0)]
    assert plane_value(verts, 1, 1) == pytest.approx(3.0)
    assert plane_value([(0, 0, 7.0), (3, 0, 7.0), (0, 3, 7.0)], 1.3, 2.9) == pytest.approx(7.0)
    for b, e, v in verts:
        assert plane_value(verts, b, e) == pytest.approx(v)
    with pytest.raises(ValueError):
        plane_value([(0, 0, 0.0), (1, 1, 1.0), (2, 2, 2.0)], 0, 1)


def test_leaf_error():
    t = Quadtree(BoundingBox(0, 2, 0, 2), init=3.0)
    assert t.leaf_error(t.root) == 0.0
    for v, c in zip((0.0, 2.0, 4.0, 6.0), t.root.bb.corners):
        t.values[c] = v
    assert t.leaf_error(t.root) == 6.0


def _depth2():
    t = Quadtree(BoundingBox(0, 8, 0, 8))
    t.refine_uniform(2)
    return t


def test_find_leaf_inside_and_ties():
    t = _depth2()
    leaf = t.find_leaf(1, 1)
    assert leaf.bb == BoundingBox(0, 2, 0, 2)
    assert t.find_steps == 2 == t.max_find_steps
    # shared corner goes to the high child on both axes
    assert t.find_leaf(4, 4).bb == BoundingBox(4, 6, 4, 6)
    assert t.find_leaf(2, 6).bb == BoundingBox(2, 4, 6, 8)


@settings(max_examples=200, deadline=None)
@given(st.integers(-20, 30), st.integers(-20, 30))
def test_find_leaf_outside_is_chebyshev_nearest(b, e):
    t = _depth2()
    leaf = t.find_leaf(b, e)
    best = min(lf.bb.chebyshev(b, e) for lf in t.leaves())
    assert leaf.bb.chebyshev(b, e) == best
    assert leaf.is_leaf and t.find_steps <= t.depth()


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 3))
def test_affine_values_reproduced(a0, a1, a2, depth):
    t = Quadtree(BoundingBox(0, 12, 0, 12))
    t.refine_uniform(depth)
    for (b, e) in t.values:
        t.values[b, e] = a0 + a1 * b + a2 * e
    for b in range(13):
        for e in range(13):
            assert t(b, e) == pytest.approx(a0 + a1 * b + a2 * e, abs=1e-9)


def test_vertex_query_exact():
    t = _depth2()
    rng = np.random.default_rng(0)
    for c in t.values:
        t.values[c] = float(rng.normal())
    for c, v in t.values.items():
        assert t(*c) == v


def test_update_grid_single_leaf():
    t = Quadtree(BoundingBox(0, 16, 0, 16))
    t.refine_uniform(1)
    assert not t.update_grid(1.0)  # all-zero store
    t.values[16, 16] = 100.0
    before = len(t.leaves())
    assert t.update_grid(10.0)
    assert len(t.leaves()) == before + 3
    assert t.find_leaf(15, 15).bb == BoundingBox(12, 16, 12, 16)


def test_update_grid_terminates():
    t = Quadtree(BoundingBox(0, 9, 0, 9))
    calls = 0
    while True:
        for (b, e) in t.values:
            t.values[b, e] = float((b * 7919 + e * 104729) % 97)
        leaves = len(t.leaves())
        changed = t.update_grid(0.5)
        assert len(t.leaves()) - leaves in (0, 3)
        calls += 1
        if not changed:
            break
    assert all(not lf.can_subdivide for lf in t.leaves())
    assert calls < 200


def test_refine_full_covers_lattice():
    t = Quadtree(BoundingBox(0, 8, 0, 8))
    t.refine_full()
    assert len(t) == 9 * 9
    # 1 x k strips cannot split, so an odd box keeps some interpolated lattice points
    odd = Quadtree(BoundingBox(0, 5, 0, 7))
    odd.refine_full()
    assert all(not lf.can_subdivide for lf in odd.leaves())
    assert len(odd) < 6 * 8


def test_serialization_round_trip():
    t = Quadtree(BoundingBox(0, 16, 0, 16))
    rng = np.random.default_rng(3)
    for _ in range(6):
        for c in t.values:
            t.values[c] = float(rng.uniform(0, 100))
        t.update_grid(1.0)
    buf = io.StringIO()
    t.dump(buf)
    u = Quadtree.load(iter(buf.getvalue().splitlines()))
    assert u.values == t.values
    assert [lf.bb for lf in u.leaves()] == [lf.bb for lf in t.leaves()]
    assert u.depth() == t.depth() and u.n_leaves == t.n_leaves
    for b in range(17):
        for e in range(17):
            assert u(b, e) == t(b, e)
    broken = [ln for ln in buf.getvalue().splitlines() if not ln.startswith("v 0 0 ")]
    broken[0] = f"vertices {len(t) - 1}"
    with pytest.raises(ValueError):
        Quadtree.load(iter(broken))
