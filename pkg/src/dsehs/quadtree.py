"""Adaptive quadtree over the buffer x battery lattice with piecewise-planar values.

Each leaf is split along its SW-NE diagonal into a NW triangle
(NW, SW, NE corners) and a SE triangle (SE, SW, NE corners). Values are stored
only at tree vertices; anything else is read off the plane through the
selected triangle, including points outside the root box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, TextIO

NW, NE, SW, SE = range(4)


@dataclass(frozen=True)
class BoundingBox:
    b_minus: int
    b_plus: int
    e_minus: int
    e_plus: int

    def __post_init__(self):
        if not (0 <= self.b_minus < self.b_plus and 0 <= self.e_minus < self.e_plus):
            raise ValueError(f"degenerate bounding box {self}")

    @property
    def corners(self) -> tuple[tuple[int, int], ...]:
        """(b-,e-), (b+,e-), (b-,e+), (b+,e+)."""
        return (
            (self.b_minus, self.e_minus),
            (self.b_plus, self.e_minus),
            (self.b_minus, self.e_plus),
            (self.b_plus, self.e_plus),
        )

    @property
    def mid(self) -> tuple[int, int]:
        return (self.b_plus + self.b_minus) // 2, (self.e_plus + self.e_minus) // 2

    def contains(self, b, e) -> bool:
        return self.b_minus <= b <= self.b_plus and self.e_minus <= e <= self.e_plus

    def chebyshev(self, b, e) -> float:
        db = max(self.b_minus - b, 0, b - self.b_plus)
        de = max(self.e_minus - e, 0, e - self.e_plus)
        return max(db, de)


class QuadtreeNode:
    __slots__ = ("bb", "children", "depth")

    def __init__(self, bb: BoundingBox, depth: int = 0):
        self.bb = bb
        self.children: tuple[QuadtreeNode, ...] = ()
        self.depth = depth

    def __repr__(self):
        bb = self.bb
        kind = "leaf" if self.is_leaf else "split"
        return f"QuadtreeNode([{bb.b_minus},{bb.b_plus}]x[{bb.e_minus},{bb.e_plus}], {kind})"

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def can_subdivide(self) -> bool:
        bb = self.bb
        return self.is_leaf and bb.b_plus - bb.b_minus >= 2 and bb.e_plus - bb.e_minus >= 2

    def child_boxes(self) -> tuple[BoundingBox, ...]:
        bb = self.bb
        bm, em = bb.mid
        return (
            BoundingBox(bb.b_minus, bm, em, bb.e_plus),   # NW
            BoundingBox(bm, bb.b_plus, em, bb.e_plus),    # NE
            BoundingBox(bb.b_minus, bm, bb.e_minus, em),  # SW
            BoundingBox(bm, bb.b_plus, bb.e_minus, em),   # SE
        )

    def leaves(self) -> Iterator["QuadtreeNode"]:
        if self.is_leaf:
            yield self
        else:
            for c in self.children:
                yield from c.leaves()

    def nodes(self) -> Iterator["QuadtreeNode"]:
        yield self
        for c in self.children:
            yield from c.nodes()

    def max_depth(self) -> int:
        return max(leaf.depth for leaf in self.leaves())


def select_triangle(bb: BoundingBox, b: float, e: float) -> int:
    """NW if the point is strictly closer to the NW corner than to the SE corner, else SE."""
    d1 = math.hypot(b - bb.b_minus, e - bb.e_plus)
    d2 = math.hypot(b - bb.b_plus, e - bb.e_minus)
    return NW if d1 < d2 else SE


def triangle_corners(bb: BoundingBox, which: int) -> tuple[tuple[int, int], ...]:
    if which == NW:
        return (bb.b_minus, bb.e_plus), (bb.b_minus, bb.e_minus), (bb.b_plus, bb.e_plus)
    return (bb.b_plus, bb.e_minus), (bb.b_minus, bb.e_minus), (bb.b_plus, bb.e_plus)


def plane_value(vertices, b: float, e: float) -> float:
    """Evaluate the plane through three (b, e, value) points at (b, e)."""
    (b1, e1, v1), (b2, e2, v2), (b3, e3, v3) = vertices
    # n = (x1 - x2) x (x1 - x3)
    ub, ue, uv = b1 - b2, e1 - e2, v1 - v2
    wb, we, wv = b1 - b3, e1 - e3, v1 - v3
    n1 = ue * wv - uv * we
    n2 = uv * wb - ub * wv
    n3 = ub * we - ue * wb
    if n3 == 0:
        raise ValueError("collinear triangle vertices")
    return v1 - (n1 * (b - b1) + n2 * (e - e1)) / n3


class Quadtree:
    """One channel's tree together with its vertex values.

    ``values`` maps every corner of every node to the stored estimate.
    ``find_steps`` counts descent steps of the most recent ``find_leaf`` and
    ``max_find_steps`` the largest count seen so far.
    """

    def __init__(self, bb: BoundingBox, init: float = 0.0):
        self.root = QuadtreeNode(bb)
        self.values: dict[tuple[int, int], float] = {c: init for c in bb.corners}
        self.find_steps = 0
        self.max_find_steps = 0
        self.n_leaves = 1

    @property
    def bb(self) -> BoundingBox:
        return self.root.bb

    def __len__(self):
        return len(self.values)

    def leaves(self) -> list[QuadtreeNode]:
        return list(self.root.leaves())

    def depth(self) -> int:
        return self.root.max_depth()

    def vertices(self) -> list[tuple[int, int]]:
        return sorted(self.values)

    def find_leaf(self, b, e) -> QuadtreeNode:
        """Descend to a leaf; out-of-box points are clamped into the root box first.

        At each node a coordinate equal to the midpoint goes to the high child.
        """
        rb = self.root.bb
        b = min(max(b, rb.b_minus), rb.b_plus)
        e = min(max(e, rb.e_minus), rb.e_plus)
        node = self.root
        steps = 0
        while node.children:
            bm, em = node.bb.mid
            if e >= em:
                node = node.children[NE if b >= bm else NW]
            else:
                node = node.children[SE if b >= bm else SW]
            steps += 1
        self.find_steps = steps
        if steps > self.max_find_steps:
            self.max_find_steps = steps
        return node

    def plane_estimate(self, leaf: QuadtreeNode, b, e) -> float:
        bb = leaf.bb
        vals = self.values
        corners = triangle_corners(bb, select_triangle(bb, b, e))
        return plane_value([(cb, ce, vals[cb, ce]) for cb, ce in corners], b, e)

    def approximate(self, b, e) -> float:
        v = self.values.get((b, e))
        if v is not None:
            return v
        return self.plane_estimate(self.find_leaf(b, e), b, e)

    __call__ = approximate

    def leaf_error(self, leaf: QuadtreeNode) -> float:
        vals = [self.values[c] for c in leaf.bb.corners]
        return max(vals) - min(vals)

    def subdivide(self, leaf: QuadtreeNode) -> int:
        """Split ``leaf`` into four children; returns the number of new vertices."""
        if not leaf.is_leaf:
            raise ValueError("only leaves can be subdivided")
        if not leaf.can_subdivide:
            raise ValueError(f"{leaf} is too small to subdivide")
        boxes = leaf.child_boxes()
        bm, em = leaf.bb.mid
        bb = leaf.bb
        fresh = {}
        for pt in ((bm, bb.e_minus), (bb.b_minus, em), (bm, em), (bb.b_plus, em), (bm, bb.e_plus)):
            if pt not in self.values and pt not in fresh:
                fresh[pt] = self.plane_estimate(leaf, *pt)
        leaf.children = tuple(QuadtreeNode(box, leaf.depth + 1) for box in boxes)
        self.values.update(fresh)
        self.n_leaves += 3
        return len(fresh)

    def update_grid(self, delta: float) -> bool:
        """Subdivide the subdividable leaf with the largest error if it exceeds ``delta``."""
        worst, worst_err = None, -math.inf
        for leaf in self.root.leaves():
            if not leaf.can_subdivide:
                continue
            err = self.leaf_error(leaf)
            if err > worst_err:
                worst, worst_err = leaf, err
        if worst is not None and worst_err > delta:
            self.subdivide(worst)
            return True
        return False

    def refine_uniform(self, depth: int) -> None:
        """Subdivide every leaf until all leaves sit at ``depth`` or are unit cells."""
        for _ in range(depth):
            for leaf in list(self.root.leaves()):
                if leaf.depth < depth and leaf.can_subdivide:
                    self.subdivide(leaf)

    def refine_full(self) -> None:
        while True:
            pending = [leaf for leaf in self.root.leaves() if leaf.can_subdivide]
            if not pending:
                return
            for leaf in pending:
                self.subdivide(leaf)

    # text serialization

    def dump(self, fh: TextIO) -> None:
        fh.write(f"vertices {len(self.values)}\n")
        for (b, e) in self.vertices():
            fh.write(f"v {b} {e} {self.values[b, e]!r}\n")
        nodes = list(self.root.nodes())
        fh.write(f"nodes {len(nodes)}\n")
        for node in nodes:
            bb = node.bb
            tag = "leaf" if node.is_leaf else "split"
            fh.write(f"n {bb.b_minus} {bb.b_plus} {bb.e_minus} {bb.e_plus} {tag}\n")

    @classmethod
    def load(cls, lines: Iterator[str]) -> "Quadtree":
        head = next(lines).split()
        if head[0] != "vertices":
            raise ValueError(f"expected 'vertices', got {head!r}")
        values = {}
        for _ in range(int(head[1])):
            _, b, e, v = next(lines).split()
            values[int(b), int(e)] = float(v)
        head = next(lines).split()
        if head[0] != "nodes":
            raise ValueError(f"expected 'nodes', got {head!r}")
        records = [next(lines).split() for _ in range(int(head[1]))]
        it = iter(records)

        def build(depth):
            _, b0, b1, e0, e1, tag = next(it)
            node = QuadtreeNode(BoundingBox(int(b0), int(b1), int(e0), int(e1)), depth)
            if tag == "split":
                node.children = tuple(build(depth + 1) for _ in range(4))
            return node

        tree = cls.__new__(cls)
        tree.root = build(0)
        tree.values = values
        tree.find_steps = 0
        tree.max_find_steps = 0
        tree.n_leaves = sum(1 for _ in tree.root.leaves())
        for node in tree.root.nodes():
            for c in node.bb.corners:
                if c not in values:
                    raise ValueError(f"vertex {c} missing from serialized store")
        return tree
