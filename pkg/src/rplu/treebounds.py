"""Quadtrees and certified row-norm upper bounds for kernel sums.

Source and target points in the complex plane are boxed into two
quadtrees; a dual traversal with an explicit stack classifies every
(source node, target leaf) interaction as either aggregated (when the
squared box distances satisfy d_max^2 <= nu * d_min^2) or exact.  From the
interaction lists and a displacement-generator pair (G, B), per-row upper
bounds u_i are assembled that sandwich the true squared row norms:
exact <= u_i <= nu * exact.  The plan depends only on the point sets and
is reused across generator updates.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PointQuadtree",
    "InteractionPlan",
    "CoincidentPointsError",
    "build_plan",
    "certified_upper_bounds",
]

DEFAULT_LEAF_SIZE = 32


class CoincidentPointsError(ValueError):
    """A source point coincides with a target point; kernel entries blow up."""


@dataclass
class _Node:
    index: int
    x0: float
    y0: float
    size: float
    points: np.ndarray          # indices into the point set (leaves only)
    children: list = field(default_factory=list)
    parent: int = -1

    @property
    def is_leaf(self):
        return not self.children


class PointQuadtree:
    """Square-box quadtree over points in the complex plane.

    Children quarter the parent square in the fixed order NW, NE, SW, SE;
    splitting stops at ``leaf_size`` points, or early when all remaining
    points coincide (the documented escape for duplicated points).
    Construction is iterative, so deep trees cannot overflow the stack.
    """

    def __init__(self, points, leaf_size=DEFAULT_LEAF_SIZE):
        pts = np.asarray(points, dtype=np.complex128).ravel()
        if pts.size == 0:
            raise ValueError("cannot build a quadtree over zero points")
        if leaf_size < 1:
            raise ValueError("leaf size must be >= 1")
        self.points = pts
        self.leaf_size = int(leaf_size)
        xs, ys = pts.real, pts.imag
        x0, y0 = float(np.min(xs)), float(np.min(ys))
        size = max(float(np.max(xs) - x0), float(np.max(ys) - y0), 1e-300)
        size *= 1.0 + 1e-12  # keep max-edge points strictly inside
        self.nodes = []
        self.leaves = []
        root = _Node(0, x0, y0, size, np.arange(pts.size))
        self.nodes.append(root)
        stack = [0]
        while stack:
            ni = stack.pop()
            node = self.nodes[ni]
            idx = node.points
            if idx.size <= self.leaf_size or _all_coincident(pts[idx]):
                self.leaves.append(ni)
                continue
            half = node.size / 2.0
            cx, cy = node.x0 + half, node.y0 + half
            east = xs[idx] >= cx
            north = ys[idx] >= cy
            quadrants = (
                (~east & north, node.x0, cy),    # NW
                (east & north, cx, cy),          # NE
                (~east & ~north, node.x0, node.y0),  # SW
                (east & ~north, cx, node.y0),    # SE
            )
            for mask, bx, by in quadrants:
                sub = idx[mask]
                if sub.size == 0:
                    continue
                child = _Node(len(self.nodes), bx, by, half, sub, parent=ni)
                node.children.append(child.index)
                self.nodes.append(child)
                stack.append(child.index)
            node.points = np.empty(0, dtype=int)

    def leaf_of_each_point(self):
        out = np.empty(self.points.size, dtype=int)
        for li in self.leaves:
            out[self.nodes[li].points] = li
        return out


def _all_coincident(pts):
    return bool(np.all(pts == pts[0]))


def _box_dist2(a, b):
    """(d_min^2, d_max^2) between two axis-aligned squares."""
    ax0, ax1 = a.x0, a.x0 + a.size
    ay0, ay1 = a.y0, a.y0 + a.size
    bx0, bx1 = b.x0, b.x0 + b.size
    by0, by1 = b.y0, b.y0 + b.size
    dx = max(0.0, bx0 - ax1, ax0 - bx1)
    dy = max(0.0, by0 - ay1, ay0 - by1)
    dxm = max(bx1 - ax0, ax1 - bx0)
    dym = max(by1 - ay0, ay1 - by0)
    return dx * dx + dy * dy, dxm * dxm + dym * dym


@dataclass
class InteractionPlan:
    """Dual-tree interaction lists for one (source, target) point pair.

    ``aggregated[leaf]`` holds (source node index, alpha) pairs with
    alpha = 1/d_min^2(source box, leaf box); ``exact[leaf]`` holds source
    leaf indices whose points are summed directly.  Together they cover
    every source point exactly once per target leaf.
    """

    source_tree: PointQuadtree
    target_tree: PointQuadtree
    nu: float
    aggregated: dict
    exact: dict


def build_plan(x, y, nu=5.0, leaf_size=DEFAULT_LEAF_SIZE):
    """Precompute interaction lists for targets ``x`` against sources ``y``."""
    if nu < 1.0:
        raise ValueError("nu must be >= 1")
    tgt = PointQuadtree(x, leaf_size)
    src = PointQuadtree(y, leaf_size)
    aggregated = {li: [] for li in tgt.leaves}
    exact = {li: [] for li in tgt.leaves}

    # Target leaves below each target node, gathered once.
    below = {ni: [] for ni in range(len(tgt.nodes))}
    for li in tgt.leaves:
        ni = li
        while ni != -1:
            below[ni].append(li)
            ni = tgt.nodes[ni].parent

    stack = [(0, 0)]
    while stack:
        si, ti = stack.pop()
        s, t = src.nodes[si], tgt.nodes[ti]
        dmin2, dmax2 = _box_dist2(s, t)
        if dmin2 > 0.0 and dmax2 <= nu * dmin2:
            for li in below[ti]:
                lmin2, _ = _box_dist2(s, tgt.nodes[li])
                aggregated[li].append((si, 1.0 / lmin2))
            continue
        if s.is_leaf and t.is_leaf:
            if dmin2 == 0.0:
                _check_cross_distances(src, tgt, si, ti)
            exact[ti].append(si)
            continue
        if (t.size >= s.size and not t.is_leaf) or s.is_leaf:
            for ci in tgt.nodes[ti].children:
                stack.append((si, ci))
        else:
            for ci in src.nodes[si].children:
                stack.append((ci, ti))
    return InteractionPlan(source_tree=src, target_tree=tgt, nu=float(nu),
                           aggregated=aggregated, exact=exact)


def _check_cross_distances(src, tgt, si, ti):
    xs = tgt.points[tgt.nodes[ti].points]
    ys = src.points[src.nodes[si].points]
    d = np.abs(xs[:, None] - ys[None, :])
    if np.any(d == 0.0):
        i, j = np.argwhere(d == 0.0)[0]
        ti_pt = tgt.nodes[ti].points[i]
        si_pt = src.nodes[si].points[j]
        raise CoincidentPointsError(
            f"target point {ti_pt} coincides with source point {si_pt} "
            f"at {xs[i]!r}")


def _gram_bottom_up(src, B):
    """p-by-p Gram matrix of B columns under every source node."""
    p = B.shape[0]
    H = np.zeros((len(src.nodes), p, p), dtype=np.complex128)
    order = sorted(range(len(src.nodes)),
                   key=lambda ni: src.nodes[ni].size)
    for ni in order:
        node = src.nodes[ni]
        if node.is_leaf:
            Bs = B[:, node.points]
            H[ni] = Bs @ Bs.conj().T
        else:
            for ci in node.children:
                H[ni] += H[ci]
    return H


def certified_upper_bounds(plan, G, B):
    """Per-row upper bounds on squared kernel row norms from a plan.

    ``G`` is n-by-p over the target points and ``B`` is p-by-m over the
    source points; the result u satisfies exact <= u <= nu * exact row by
    row.  Source-node Gram matrices are formed once, bottom up, and reused
    across target leaves.
    """
    G = np.asarray(G, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    src, tgt = plan.source_tree, plan.target_tree
    if G.shape[0] != tgt.points.size or B.shape[1] != src.points.size:
        raise ValueError("generator dimensions do not match the plan's points")
    if G.shape[1] != B.shape[0]:
        raise ValueError("generator inner dimensions disagree")
    H = _gram_bottom_up(src, B)
    u = np.zeros(tgt.points.size)
    for li in tgt.leaves:
        pts = tgt.nodes[li].points
        Gi = G[pts, :]
        acc = np.zeros(pts.size)
        for si, alpha in plan.aggregated[li]:
            acc += alpha * np.einsum("ip,pq,iq->i", Gi, H[si], Gi.conj()).real
        for si in plan.exact[li]:
            spts = src.nodes[si].points
            W = Gi @ B[:, spts]
            D = np.abs(tgt.points[pts, None] - src.points[None, spts]) ** 2
            acc += np.sum((np.abs(W) ** 2) / D, axis=1)
        u[pts] = acc
    return u
