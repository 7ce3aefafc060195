"""Agglomerated meshes: elements built from groups of background cells."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..curves import GeometryError
from .background import BackgroundMesh, edge_key
from .elements import PolyElement, _make_group, build_face_groups
from .partition import _fix_connectivity, _smooth, dual_graph, lloyd_refine, partition_graph

log = logging.getLogger(__name__)


@dataclass
class Interface:
    """Interior interface between elements k < k2: matching segment ids on both sides."""

    k: int
    k2: int
    segs: list
    segs2: list


class PolyMesh:
    def __init__(self, background: BackgroundMesh, cell_to_elem, degree=1, star="optimize", force=False,
                 face_groups=None):
        """`face_groups`, if given, lists per element the (segment ids, star point, forced)
        triples of a previous build; metrics are recomputed from the star points."""
        self.background = background
        self.cell_to_elem = np.asarray(cell_to_elem, dtype=np.int64)
        self.force = force
        self.elements = self._build_elements(degree)
        self.interfaces = self._match_interfaces()
        if face_groups is not None:
            for K, groups in zip(self.elements, face_groups):
                K.face_groups = [_make_group(K, list(ids), np.asarray(x0, dtype=float), force=forced)
                                 for ids, x0, forced in groups]
                if any(forced for *_, forced in groups):
                    K.flags.add("assumption-violating")
            return
        for K in self.elements:
            build_face_groups(K, star=star, force=force)

    @property
    def n_elements(self):
        return len(self.elements)

    def _build_elements(self, degree):
        bg = self.background
        nb = bg.neighbors()
        tri = bg.triangles
        owner = self.cell_to_elem
        n_el = owner.max() + 1
        t_idx, k_idx = np.nonzero((nb < 0) | (owner[np.maximum(nb, 0)] != owner[:, None]))
        per_elem = [[] for _ in range(n_el)]
        for t, k in zip(t_idx, k_idx):
            per_elem[owner[t]].append((t, k))
        elements = []
        for e in range(n_el):
            cells = np.nonzero(owner == e)[0]
            if cells.size == 0:
                raise GeometryError(f"element {e} is empty")
            segs, keys, starts, ends = [], [], [], []
            for t, k in per_elem[e]:
                i, j = tri[t, k], tri[t, (k + 1) % 3]
                segs.append(bg.segment(i, j))
                if nb[t, k] < 0:
                    keys.append(("boundary", bg.boundary.get(edge_key(i, j), "boundary")))
                else:
                    keys.append(int(owner[nb[t, k]]))
                starts.append(i)
                ends.append(j)
            loops = _chain_loops(bg.vertices, starts, ends)
            region = int(np.bincount(bg.cell_region[cells]).argmax())
            elements.append(PolyElement(e, segs, keys, loops, cells=cells, region=region, degree=degree, background=bg))
            elements[-1].edge_ids = [(s, t) for s, t in zip(starts, ends)]
        return elements

    def _match_interfaces(self):
        where = {}
        for K in self.elements:
            for idx, (i, j) in enumerate(K.edge_ids):
                where[(i, j)] = (K.id, idx)
        faces = {}
        for K in self.elements:
            for idx, (i, j) in enumerate(K.edge_ids):
                other = where.get((j, i))
                if other is None or other[0] == K.id or K.id > other[0]:
                    continue
                f = faces.setdefault((K.id, other[0]), Interface(K.id, other[0], [], []))
                f.segs.append(idx)
                f.segs2.append(other[1])
        return [faces[k] for k in sorted(faces)]

    def boundary_segments(self, K):
        return [i for i, key in enumerate(K.keys) if isinstance(key, tuple)]

    def total_area(self):
        return sum(K.area for K in self.elements)

    def h_max(self):
        return max(K.h for K in self.elements)

    def set_degree(self, p):
        for K in self.elements:
            K.degree = int(p)


def _chain_loops(vertices, starts, ends):
    """Chain directed edges into closed loops keeping the element on the left."""
    out_edges = {}
    for idx, s in enumerate(starts):
        out_edges.setdefault(s, []).append(idx)
    used = np.zeros(len(starts), dtype=bool)
    loops = []
    for first in range(len(starts)):
        if used[first]:
            continue
        loop = [first]
        used[first] = True
        cur = first
        while True:
            v = ends[cur]
            cand = [c for c in out_edges.get(v, []) if not used[c]]
            if not cand:
                break
            if len(cand) > 1:
                back = vertices[starts[cur]] - vertices[v]
                tb = np.arctan2(back[1], back[0])

                def turn(c):
                    d = vertices[ends[c]] - vertices[v]
                    return (tb - np.arctan2(d[1], d[0])) % (2 * np.pi)

                cand.sort(key=turn)
            cur = cand[0]
            used[cur] = True
            loop.append(cur)
        if ends[loop[-1]] != starts[loop[0]]:
            raise GeometryError("element boundary is not closed")
        loops.append(loop)
    return loops


def agglomerate(bg: BackgroundMesh, n_target, seed=0, degree=1, star="optimize", force=False, compact=True):
    """Partition the background cells into about `n_target` connected elements.

    With `compact` a graph Lloyd iteration rounds off the parts.
    """
    if not 1 <= n_target <= bg.n_cells:
        raise ValueError(f"n_target must be in [1, {bg.n_cells}]")
    A = dual_graph(bg)
    labels = partition_graph(A, n_target, seed=seed)
    if compact:
        tv = bg.vertices[bg.triangles]
        e1, e2 = tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0]
        areas = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
        labels = lloyd_refine(A, tv.mean(axis=1), labels, weights=areas)
        labels = _fix_connectivity(A, _smooth(A, labels), labels.max() + 1, np.ones(len(labels)))
    if labels.max() + 1 != n_target:
        log.warning("agglomeration produced %d elements (target %d)", labels.max() + 1, n_target)
    # agglomerates must not straddle subdomains
    if np.unique(bg.cell_region).size > 1:
        labels = _split_by_region(labels, bg.cell_region)
    return PolyMesh(bg, labels, degree=degree, star=star, force=force)


def _split_by_region(labels, region):
    _, out = np.unique(np.column_stack([labels, region]), axis=0, return_inverse=True)
    return out.ravel()


def cells_as_elements(bg: BackgroundMesh, degree=1, star="optimize", force=False):
    """Each background cell becomes its own element."""
    return PolyMesh(bg, np.arange(bg.n_cells), degree=degree, star=star, force=force)


def grouped_mesh(bg: BackgroundMesh, labels, degree=1, star="optimize", force=False):
    return PolyMesh(bg, labels, degree=degree, star=star, force=force)
