"""Gauss-Legendre rules on intervals and triangles, fan rules over curved pieces,
and composite rules over mesh elements and faces."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

# extra points in the arc parameter for curved pieces (integrand is not polynomial in t)
ARC_EXTRA_POINTS = 4


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray
    order: int
    normals: np.ndarray | None = None

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))

    def __len__(self):
        return self.weights.size

    @staticmethod
    def concat(rules, order):
        rules = [r for r in rules if len(r)]
        if not rules:
            return QuadRule(np.zeros((0, 2)), np.zeros(0), order)
        normals = None
        if all(r.normals is not None for r in rules):
            normals = np.concatenate([r.normals for r in rules])
        return QuadRule(
            np.concatenate([r.points for r in rules]), np.concatenate([r.weights for r in rules]), order, normals
        )


@lru_cache(maxsize=None)
def gauss_interval(n):
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def points_for_order(order):
    return order // 2 + 1


def line_rule(order):
    x, w = gauss_interval(points_for_order(order))
    return QuadRule(x[:, None], w, order)


@lru_cache(maxsize=None)
def _collapsed(order):
    # x = u(1 - v), y = v over the unit square; the Jacobian (1 - v) adds a degree in v
    u, wu = gauss_interval(points_for_order(order))
    v, wv = gauss_interval(points_for_order(order + 1))
    U, V = np.meshgrid(u, v, indexing="ij")
    W = np.outer(wu, wv) * (1.0 - V)
    pts = np.column_stack([(U * (1.0 - V)).ravel(), V.ravel()])
    return pts, W.ravel()


def triangle_rule(order):
    """Collapsed Gauss rule on the reference triangle (0,0), (1,0), (0,1)."""
    pts, w = _collapsed(order)
    return QuadRule(pts, w, order)


def map_triangles(verts, order, signed=False):
    """Rule over a batch of triangles given as an (m, 3, 2) array."""
    ref = triangle_rule(order)
    v0 = verts[:, 0, :]
    e1 = verts[:, 1, :] - v0
    e2 = verts[:, 2, :] - v0
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if not signed:
        det = np.abs(det)
    xi = ref.points
    pts = v0[:, None, :] + xi[None, :, 0, None] * e1[:, None, :] + xi[None, :, 1, None] * e2[:, None, :]
    w = det[:, None] * ref.weights[None, :]
    return QuadRule(pts.reshape(-1, 2), w.ravel(), order)


def arc_points(seg, order):
    """Gauss points in the arc parameter: the base count plus extra points
    growing with how far the normal turns along the arc."""
    key = ("turn",)
    if key not in seg._cache:
        n = seg.normal(np.linspace(0.0, 1.0, 9))
        cosang = np.clip(n @ n.T, -1.0, 1.0)
        seg._cache[key] = float(np.arccos(cosang).max())
    return points_for_order(order) + ARC_EXTRA_POINTS + int(np.ceil(12 * seg._cache[key] / np.pi))


def fan_rule(apex, seg, order):
    """Signed rule over the region swept from `apex` to the segment.

    x = apex + s (P(t) - apex), Jacobian s * cross(P(t) - apex, P'(t)).  Summing
    fan rules over a closed boundary integrates over the enclosed region for
    any apex, since the contributions of the connecting rays cancel.
    """
    apex = np.asarray(apex, dtype=float)
    if not seg.is_curved:
        return map_triangles(np.array([[apex, seg.a, seg.b]]), order, signed=True)
    nt = arc_points(seg, order)
    t, wt = gauss_interval(nt)
    s, ws = gauss_interval(points_for_order(order + 1))
    P, dP = seg.point(t)
    r = P - apex
    cross = r[:, 0] * dP[:, 1] - r[:, 1] * dP[:, 0]
    pts = apex[None, None, :] + s[None, :, None] * r[:, None, :]
    w = (wt * cross)[:, None] * (ws * s)[None, :]
    return QuadRule(pts.reshape(-1, 2), w.ravel(), order)


def face_rule(seg, order):
    """Gauss rule on a segment with unit normals to the right of travel."""
    if not seg.is_curved:
        t, w = gauss_interval(points_for_order(order))
        pts = seg.a + t[:, None] * seg.chord
        n = np.tile(seg.chord_normal, (t.size, 1))
        return QuadRule(pts, w * seg.length, order, n)
    key = ("face", order)
    if key in seg._cache:
        return seg._cache[key]
    t, w = gauss_interval(arc_points(seg, order))
    pts, dP = seg.point(t)
    rule = QuadRule(pts, w * np.linalg.norm(dP, axis=1), order, seg.normal(t))
    seg._cache[key] = rule
    return rule


def boundary_fan_rule(segments, order, apex=None):
    """Area rule for a region given only by its closed, positively oriented boundary."""
    if apex is None:
        apex = np.mean([s.a for s in segments], axis=0)
    return QuadRule.concat([fan_rule(apex, s, order) for s in segments], order)


def cell_rule(verts, arcs, order):
    """Rule over one triangle whose edges may be arcs.

    `arcs` maps local edge k (verts[k] -> verts[k+1]) to a level set.  Curved
    cells are fanned from the centroid of their straight core.
    """
    from .curves import Segment

    c = verts.mean(axis=0)
    segs = [Segment(verts[k], verts[(k + 1) % 3], arcs.get(k)) for k in range(3)]
    return QuadRule.concat([fan_rule(c, s, order) for s in segs], order)
