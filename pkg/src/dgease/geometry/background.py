"""Fine background triangulations with optional level-set curved edges."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..curves import GeometryError, LevelSet, Segment
from ..quadrature import QuadRule, cell_rule, map_triangles


def edge_key(i, j):
    return (int(i), int(j)) if i < j else (int(j), int(i))


@dataclass
class BackgroundMesh:
    """Conforming triangulation.

    `boundary` maps each boundary edge (sorted vertex pair) to a label string;
    `curved` maps edges (boundary or interior) to an index into `levelsets`;
    `cell_region` tags each triangle with a subdomain id.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: dict = field(default_factory=dict)
    curved: dict = field(default_factory=dict)
    levelsets: list = field(default_factory=list)
    cell_region: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.cell_region is None:
            self.cell_region = np.zeros(len(self.triangles), dtype=np.int64)
        self.cell_region = np.asarray(self.cell_region, dtype=np.int64)
        flip = self.signed_areas() < 0
        self.triangles[flip] = self.triangles[flip][:, ::-1]
        self._neighbors = None

    @property
    def n_cells(self):
        return len(self.triangles)

    def signed_areas(self):
        v = self.vertices[self.triangles]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def local_edges(self, t):
        tri = self.triangles[t]
        return [(tri[k], tri[(k + 1) % 3]) for k in range(3)]

    def neighbors(self):
        """(n_cells, 3) array: triangle across local edge k, or -1 on the boundary."""
        if self._neighbors is not None:
            return self._neighbors
        tri = self.triangles
        a = tri.ravel()
        b = np.roll(tri, -1, axis=1).ravel()
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        key = lo * (len(self.vertices) + 1) + hi
        order = np.argsort(key, kind="stable")
        ks = key[order]
        nb = -np.ones(tri.size, dtype=np.int64)
        same = np.nonzero(ks[1:] == ks[:-1])[0]
        if np.any(ks[2:] == ks[:-2]):
            raise GeometryError("non-conforming triangulation: edge shared by more than two triangles")
        i, j = order[same], order[same + 1]
        nb[i] = j // 3
        nb[j] = i // 3
        self._neighbors = nb.reshape(-1, 3)
        return self._neighbors

    def boundary_edges(self):
        nb = self.neighbors()
        t, k = np.nonzero(nb < 0)
        tri = self.triangles
        return [(tri[a, b], tri[a, (b + 1) % 3]) for a, b in zip(t, k)]

    def check(self):
        """Conformity and labelling checks; raises GeometryError."""
        edges = {edge_key(*e) for e in self.boundary_edges()}
        missing = edges - set(self.boundary)
        if missing:
            raise GeometryError(f"boundary edges without label: {sorted(missing)[:3]}")
        extra = set(self.boundary) - edges
        if extra:
            raise GeometryError(f"labelled edges that are not on the boundary: {sorted(extra)[:3]}")
        if np.any(self.signed_areas() <= 0):
            raise GeometryError("degenerate triangle in background mesh")
        return True

    def cell_arcs(self, t):
        out = {}
        tri = self.triangles[t]
        for k in range(3):
            lid = self.curved.get(edge_key(tri[k], tri[(k + 1) % 3]))
            if lid is not None:
                out[k] = self.levelsets[lid]
        return out

    def curved_cells(self):
        cells = set()
        if not self.curved:
            return np.zeros(0, dtype=np.int64)
        tri = self.triangles
        a = tri.ravel()
        b = np.roll(tri, -1, axis=1).ravel()
        for idx, (i, j) in enumerate(zip(a, b)):
            if edge_key(i, j) in self.curved:
                cells.add(idx // 3)
        return np.array(sorted(cells), dtype=np.int64)

    def rule(self, cells, order):
        """Composite rule over a set of cells; curved cells use fan rules."""
        cells = np.asarray(cells, dtype=np.int64)
        curved = np.intersect1d(cells, self._curved_set(), assume_unique=False)
        straight = np.setdiff1d(cells, curved)
        parts = []
        if straight.size:
            parts.append(map_triangles(self.vertices[self.triangles[straight]], order))
        for t in curved:
            parts.append(cell_rule(self.vertices[self.triangles[t]], self.cell_arcs(t), order))
        return QuadRule.concat(parts, order)

    def _curved_set(self):
        if not hasattr(self, "_cc"):
            self._cc = self.curved_cells()
        return self._cc

    def segment(self, i, j):
        lid = self.curved.get(edge_key(i, j))
        return Segment(self.vertices[i], self.vertices[j], None if lid is None else self.levelsets[lid])

    def area(self, order=8):
        return float(self.rule(np.arange(self.n_cells), order).weights.sum())


def fit_curved_boundary(bg, phi: LevelSet, tol_fit=1e-10, labels=None):
    """Project boundary vertices onto {phi = 0} and mark their edges as arcs.

    Only edges whose label is in `labels` are fitted (all boundary edges if
    None).  Returns a new BackgroundMesh; the input is not modified.
    """
    edges = [e for e, lab in bg.boundary.items() if labels is None or lab in labels]
    verts = bg.vertices.copy()
    ids = np.unique(np.array(edges, dtype=np.int64).ravel()) if edges else np.zeros(0, dtype=np.int64)
    if ids.size:
        verts[ids] = phi.project(verts[ids], tol=tol_fit, maxiter=50)
    levelsets = list(bg.levelsets) + [phi]
    lid = len(levelsets) - 1
    curved = dict(bg.curved)
    for e in edges:
        curved[e] = lid
    out = BackgroundMesh(verts, bg.triangles.copy(), dict(bg.boundary), curved, levelsets, bg.cell_region.copy())
    if np.any(out.signed_areas() <= 0):
        raise GeometryError("boundary fitting inverted a triangle; refine the background mesh")
    return out
