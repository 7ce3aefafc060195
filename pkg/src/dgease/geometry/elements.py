"""Polytopic (possibly curved) elements, their face groups and star points."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull
from shapely.geometry import Point, Polygon
from shapely.ops import polylabel

from ..curves import GeometryError, Segment
from ..quadrature import QuadRule, boundary_fan_rule, face_rule

# curved faces may dip between sample points; straight ones are exact at the endpoints
CURVED_SAFETY = 0.95
FORCE_FLOOR = 1e-3
MAX_SPLIT_DEPTH = 8
SPLIT_RATIO = 0.1
ARC_SAMPLES = 24


class AssumptionViolation(GeometryError):
    """No admissible star point could be found for a face group."""


@dataclass
class FaceGroup:
    """One face group F_i of an element, with its star point x0 and cone K_{F_i}."""

    segments: list
    star_point: np.ndarray
    min_m_dot_n: float
    max_m_norm: float
    area_KFi: float
    length: float
    neighbor: object
    curved: bool = False
    forced: bool = False

    @property
    def safety(self):
        return CURVED_SAFETY if self.curved else 1.0

    @property
    def min_m_dot_n_safe(self):
        return self.safety * self.min_m_dot_n


@dataclass
class PolyElement:
    """Element given by its closed boundary loops.

    `segments` are oriented with the element on their left; `keys` give the
    neighbour of each segment (an element id, or ("boundary", label)).
    `loops` lists segment indices in traversal order for each closed loop.
    """

    id: int
    segments: list
    keys: list
    loops: list
    cells: np.ndarray | None = None
    region: int = 0
    degree: int = 1
    background: object = None
    shape_hint: dict = field(default_factory=dict)
    face_groups: list = field(default_factory=list)
    flags: set = field(default_factory=set)

    def __post_init__(self):
        self._rules = {}
        self._poly = None

    # --- quadrature -------------------------------------------------------
    def rule(self, order):
        if order not in self._rules:
            if self.cells is not None and self.background is not None:
                r = self.background.rule(self.cells, order)
            else:
                apex = np.mean([s.a for s in self.segments], axis=0)
                r = boundary_fan_rule(self.segments, order, apex)
            self._rules[order] = r
        return self._rules[order]

    def boundary_rule(self, order, seg_ids=None):
        ids = range(len(self.segments)) if seg_ids is None else seg_ids
        return QuadRule.concat([face_rule(self.segments[i], order) for i in ids], order)

    # --- metrics ----------------------------------------------------------
    @property
    def area(self):
        if "area" not in self.__dict__:
            self.__dict__["area"] = float(self.rule(2).weights.sum())
        return self.__dict__["area"]

    @property
    def centroid(self):
        r = self.rule(2)
        return r.weights @ r.points / r.weights.sum()

    def polyline_loops(self):
        tol = 1e-6 * self.bbox_diag_estimate()
        out = []
        for loop in self.loops:
            pts = [self.segments[i].polyline(tol)[:-1] for i in loop]
            out.append(np.concatenate(pts))
        return out

    def bbox_diag_estimate(self):
        pts = np.array([s.a for s in self.segments])
        return float(np.hypot(*(pts.max(axis=0) - pts.min(axis=0))))

    @property
    def polygon(self):
        if self._poly is None:
            loops = self.polyline_loops()
            areas = [0.5 * np.sum(l[:, 0] * np.roll(l[:, 1], -1) - np.roll(l[:, 0], -1) * l[:, 1]) for l in loops]
            outer = int(np.argmax(areas))
            holes = [l for i, l in enumerate(loops) if i != outer]
            poly = Polygon(loops[outer], holes)
            if not poly.is_valid:
                poly = shapely.make_valid(poly)
                if poly.geom_type != "Polygon":
                    poly = max(getattr(poly, "geoms", [poly]), key=lambda g: g.area)
            self._poly = poly
        return self._poly

    @property
    def bbox(self):
        x0, y0, x1, y1 = self.polygon.bounds
        return np.array([[x0, y0], [x1, y1]])

    @property
    def h(self):
        if "h" not in self.__dict__:
            pts = np.asarray(self.polygon.exterior.coords)
            try:
                pts = pts[ConvexHull(pts).vertices]
            except Exception:
                pass
            d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
            self.__dict__["h"] = float(d.max())
        return self.__dict__["h"]

    @property
    def rho(self):
        if "rho" not in self.__dict__:
            self.__dict__["rho"] = inscribed_radius(self)
        return self.__dict__["rho"]

    def is_disc(self):
        return "disc" in self.shape_hint


def inscribed_radius(K, rel_tol=1e-4):
    """Radius of the largest inscribed circle (pole of inaccessibility)."""
    if K.is_disc():
        return float(K.shape_hint["disc"][1])
    poly = K.polygon
    c = polylabel(poly, tolerance=rel_tol * K.h)
    return float(poly.exterior.distance(c) if not poly.interiors else poly.boundary.distance(c))


# --- star points ------------------------------------------------------------


def group_samples(K, seg_ids):
    """Sample points and outward normals on a group, plus face-rule data."""
    pts, nrm = [], []
    for i in seg_ids:
        s = K.segments[i]
        if "samples" not in s._cache:
            if s.is_curved:
                t = np.linspace(0.0, 1.0, ARC_SAMPLES + 1)
                s._cache["samples"] = (s.point(t)[0], s.normal(t))
            else:
                s._cache["samples"] = (np.array([s.a, s.b]), np.tile(s.chord_normal, (2, 1)))
        p, n = s._cache["samples"]
        pts.append(p)
        nrm.append(n)
    return np.concatenate(pts), np.concatenate(nrm)


def _rays_inside(K, x0, pts):
    poly = K._buffered()
    lines = shapely.linestrings(np.stack([np.broadcast_to(x0, pts.shape), pts], axis=1))
    return bool(np.all(shapely.covers(poly, lines)))


def _buffered(self):
    if not hasattr(self, "_buf"):
        tol = 1e-6 * self.bbox_diag_estimate()
        self._buf = self.polygon.buffer(4 * tol + 1e-9 * self.h)
        shapely.prepare(self._buf)
    return self._buf


PolyElement._buffered = _buffered


def star_objective(x0, pts, nrm):
    return float(np.min(np.einsum("ij,ij->i", pts - x0, nrm)))


def select_star_point(K, seg_ids, method="optimize"):
    """Point x0 in K maximizing min (x - x0).n over the group, with all rays inside K.

    Returns (x0, value); value <= 0 means the group must be split.
    """
    pts, nrm = group_samples(K, seg_ids)
    poly = K._buffered()

    def feasible(x):
        return bool(shapely.contains_xy(poly, x[0], x[1])) and _rays_inside(K, x, pts)

    if method == "centroid":
        x = K.centroid
        return x, star_objective(x, pts, nrm) if feasible(x) else -np.inf
    cands = [K.centroid]
    lab = polylabel(K.polygon, tolerance=1e-3 * K.h)
    cands.append(np.array([lab.x, lab.y]))
    mseg = K.segments[seg_ids[len(seg_ids) // 2]]
    mid = mseg.point(0.5)[0][0]
    nmid = mseg.normal(0.5)[0]
    seg_len = mseg.length
    cands += [mid - f * K.h * nmid for f in (0.02, 0.1, 0.3)]
    cands += [mid - f * seg_len * nmid for f in (0.05, 0.2, 0.45)]
    lo, hi = K.bbox
    # maximize t subject to (p_j - x0).n_j >= t on the group; first also demand that
    # x0 sees the whole boundary of K with nonnegative m.n (a kernel point), then
    # search without it in the bounding box and in shrinking boxes around the group
    allp, alln = group_samples(K, range(len(K.segments)))
    center = pts.mean(axis=0)
    diam = float(np.ptp(pts, axis=0).max())
    boxes = [(lo, hi, True), (lo, hi, False)]
    boxes += [(np.maximum(lo, center - r), np.minimum(hi, center + r), False) for r in diam * np.array([2.0, 1.0, 0.5, 0.25])]
    for blo, bhi, extra in boxes:
        A = np.column_stack([nrm, np.ones(len(nrm))])
        b = np.einsum("ij,ij->i", pts, nrm)
        if extra:
            A = np.vstack([A, np.column_stack([alln, np.zeros(len(alln))])])
            b = np.concatenate([b, np.einsum("ij,ij->i", allp, alln)])
        res = linprog(c=[0.0, 0.0, -1.0], A_ub=A, b_ub=b,
                      bounds=[(blo[0], bhi[0]), (blo[1], bhi[1]), (None, None)], method="highs")
        if res.status == 0 and res.x[2] > 0:
            cands.append(res.x[:2])
    scored = [(star_objective(c, pts, nrm) if feasible(c) else -np.inf, i) for i, c in enumerate(cands)]
    best_val, bi = max(scored)
    best = cands[bi]
    scale = max(diam, 1e-3 * K.h)

    def penalized(x):
        if not feasible(x):
            return 1e3 * scale
        return -star_objective(x, pts, nrm)

    if not np.isfinite(best_val) or best_val >= SPLIT_RATIO * diam:
        return np.asarray(best, dtype=float), best_val
    start = best
    simplex = np.array([start, start + [0.05 * scale, 0.0], start + [0.0, 0.05 * scale]])
    r = minimize(penalized, start, method="Nelder-Mead",
                 options={"initial_simplex": simplex, "xatol": 1e-9 * scale, "fatol": 1e-12 * scale, "maxiter": 200})
    if -r.fun > best_val:
        best, best_val = r.x, -r.fun
    return np.asarray(best, dtype=float), best_val


def _make_group(K, seg_ids, x0, force=False):
    pts, nrm = group_samples(K, seg_ids)
    mdn = star_objective(x0, pts, nrm)
    forced = False
    if force and mdn < FORCE_FLOOR * K.h:
        mdn, forced = FORCE_FLOOR * K.h, True
    m_norm = float(np.max(np.linalg.norm(pts - x0, axis=1)))
    area = 0.0
    length = 0.0
    for i in seg_ids:
        fr = face_rule(K.segments[i], 8)
        area += 0.5 * fr.weights @ np.einsum("ij,ij->i", fr.points - x0, fr.normals)
        length += fr.weights.sum()
    return FaceGroup(
        segments=list(seg_ids), star_point=np.asarray(x0, dtype=float), min_m_dot_n=float(mdn),
        max_m_norm=m_norm, area_KFi=float(area), length=float(length), neighbor=K.keys[seg_ids[0]],
        curved=any(K.segments[i].is_curved for i in seg_ids), forced=forced,
    )


def runs_by_key(K):
    """Maximal runs of consecutive segments sharing a neighbour key, per loop."""
    runs = []
    for loop in K.loops:
        keys = [K.keys[i] for i in loop]
        n = len(loop)
        if all(k == keys[0] for k in keys):
            runs.append(list(loop))
            continue
        start = next(i for i in range(n) if keys[i] != keys[i - 1])
        cur = [loop[start]]
        for j in range(1, n):
            i = (start + j) % n
            if keys[i] == keys[(i - 1) % n]:
                cur.append(loop[i])
            else:
                runs.append(cur)
                cur = [loop[i]]
        runs.append(cur)
    return runs


def build_face_groups(K, star="optimize", force=False):
    """Group boundary segments per neighbour run and assign star points.

    Groups without an admissible star point are bisected and retried, up to
    depth MAX_SPLIT_DEPTH.  A group whose star distance min m.n is small
    against its extent is also tried as two halves, and the halves are kept
    when they lower (number of groups) * max 1/min m.n, the quantity the
    penalty scales with.
    """

    def place(seg_ids, depth):
        """Returns (groups, cost) or None if no admissible split exists."""
        x0, val = select_star_point(K, seg_ids, method=star)
        keep = ([(seg_ids, x0)], 1.0 / val) if val > 0 else None
        if len(seg_ids) == 1 or depth >= MAX_SPLIT_DEPTH:
            return keep
        if keep is not None:
            pts, _ = group_samples(K, seg_ids)
            if val >= SPLIT_RATIO * float(np.ptp(pts, axis=0).max()):
                return keep
        cut = len(seg_ids) // 2
        left, right = place(seg_ids[:cut], depth + 1), place(seg_ids[cut:], depth + 1)
        if left is None or right is None:
            return keep
        groups = left[0] + right[0]
        split = (groups, len(groups) * max(left[1] / len(left[0]), right[1] / len(right[0])))
        if keep is None or split[1] < keep[1]:
            return split
        return keep

    groups = []
    for run in runs_by_key(K):
        res = place(run, 0)
        if res is not None:
            groups += [_make_group(K, ids, x0) for ids, x0 in res[0]]
            continue
        K.flags.add("assumption-violating")
        if not force:
            raise AssumptionViolation(f"element {K.id}: no admissible star point for segments {run[:4]}...")
        groups.append(_make_group(K, run, K.centroid, force=True))
    K.face_groups = groups
    return groups


def element_from_segments(segments, keys=None, eid=0, shape_hint=None, degree=1):
    """Standalone element from one closed, positively oriented boundary loop."""
    keys = keys if keys is not None else [("boundary", f"f{i}") for i in range(len(segments))]
    return PolyElement(eid, list(segments), list(keys), [list(range(len(segments)))], shape_hint=shape_hint or {},
                       degree=degree)


def polygon_element(points, keys=None, eid=0):
    pts = np.asarray(points, dtype=float)
    segs = [Segment(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]
    return element_from_segments(segs, keys, eid)
