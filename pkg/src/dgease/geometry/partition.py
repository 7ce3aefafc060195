"""Multilevel greedy graph partitioning of background cells into agglomerates.

Coarsening by heavy-edge matching, greedy growing on the coarsest graph and
boundary refinement with a balance constraint on the way back up.  An
optional graph Lloyd iteration then makes the parts compact.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components, dijkstra


def dual_graph(bg):
    """Cell adjacency through shared edges, unit weights."""
    nb = bg.neighbors()
    rows = np.repeat(np.arange(bg.n_cells), 3)
    cols = nb.ravel()
    keep = cols >= 0
    A = sp.csr_matrix((np.ones(keep.sum()), (rows[keep], cols[keep])), shape=(bg.n_cells, bg.n_cells))
    return A


def _heavy_edge_matching(A, vw, rng):
    n = A.shape[0]
    match = -np.ones(n, dtype=np.int64)
    indptr, indices, data = A.indptr, A.indices, A.data
    for v in rng.permutation(n):
        if match[v] >= 0:
            continue
        best, best_w = v, -1.0
        for k in range(indptr[v], indptr[v + 1]):
            u = indices[k]
            if u != v and match[u] < 0:
                w = data[k] - 1e-9 * vw[u]
                if w > best_w:
                    best, best_w = u, w
        match[v] = best
        match[best] = v
    cmap = -np.ones(n, dtype=np.int64)
    c = 0
    for v in range(n):
        if cmap[v] < 0:
            cmap[v] = c
            cmap[match[v]] = c
            c += 1
    return cmap, c


def _coarsen(A, vw, cmap, nc):
    P = sp.csr_matrix((np.ones(len(cmap)), (np.arange(len(cmap)), cmap)), shape=(len(cmap), nc))
    Ac = (P.T @ A @ P).tocsr()
    Ac.setdiag(0)
    Ac.eliminate_zeros()
    return Ac, P.T @ vw


def _grow(A, vw, k, rng):
    """Greedy growing from spread-out seeds, always extending the lightest part."""
    n = A.shape[0]
    indptr, indices, data = A.indptr, A.indices, A.data
    seeds = [int(rng.integers(n))]
    dist = sp.csgraph.shortest_path(A, indices=seeds[0], unweighted=True)
    dist = np.where(np.isfinite(dist), dist, 0.0)
    for _ in range(1, k):
        s = int(np.argmax(dist))
        seeds.append(s)
        d = sp.csgraph.shortest_path(A, indices=s, unweighted=True)
        dist = np.minimum(dist, np.where(np.isfinite(d), d, 0.0))
    part = -np.ones(n, dtype=np.int64)
    weight = np.zeros(k)
    gain = [dict() for _ in range(k)]
    for p, s in enumerate(seeds):
        if part[s] >= 0:
            continue
        part[s] = p
        weight[p] += vw[s]
    for p, s in enumerate(seeds):
        if part[s] != p:
            continue
        for j in range(indptr[s], indptr[s + 1]):
            u = indices[j]
            if part[u] < 0:
                gain[p][u] = gain[p].get(u, 0.0) + data[j]
    active = np.ones(k, dtype=bool)
    remaining = n - np.count_nonzero(part >= 0)
    while remaining > 0 and active.any():
        cand = np.where(active, weight, np.inf)
        p = int(np.argmin(cand))
        frontier = {u: g for u, g in gain[p].items() if part[u] < 0}
        gain[p] = frontier
        if not frontier:
            active[p] = False
            continue
        v = max(frontier, key=lambda u: (frontier[u], -u))
        part[v] = p
        weight[p] += vw[v]
        remaining -= 1
        del frontier[v]
        for j in range(indptr[v], indptr[v + 1]):
            u = indices[j]
            if part[u] < 0:
                frontier[u] = frontier.get(u, 0.0) + data[j]
    # cells unreachable from every seed join an arbitrary neighbouring part
    for v in np.nonzero(part < 0)[0]:
        part[v] = 0
    return part


def _refine(A, vw, part, k, rng, imbalance=1.1, passes=4):
    n = A.shape[0]
    indptr, indices, data = A.indptr, A.indices, A.data
    weight = np.bincount(part, weights=vw, minlength=k)
    avg = vw.sum() / k
    wmax = imbalance * avg
    wmin = avg / imbalance ** 3
    for _ in range(passes):
        moved = 0
        for v in rng.permutation(n):
            a = part[v]
            conn = {}
            for j in range(indptr[v], indptr[v + 1]):
                conn[part[indices[j]]] = conn.get(part[indices[j]], 0.0) + data[j]
            if len(conn) == 1 and a in conn:
                continue
            own = conn.get(a, 0.0)
            if own == 0.0:
                # isolated inside another part: always move
                b = max(conn, key=lambda q: (conn[q], -q))
            else:
                best, b = 0.0, None
                for q, c in conn.items():
                    if q == a:
                        continue
                    g = c - own
                    over = weight[a] > wmax
                    fits = weight[q] + vw[v] <= wmax
                    if (g > best and fits) or (over and fits and g >= best - 1 and weight[q] < weight[a]):
                        best, b = g, q
                if b is None or weight[a] - vw[v] < wmin:
                    continue
            part[v] = b
            weight[a] -= vw[v]
            weight[b] += vw[v]
            moved += 1
        if moved == 0:
            break
    return part


def _smooth(A, part, max_sweeps=20):
    """Move cells whose neighbours lie mostly in one other part into that part.

    Removes teeth and one-cell necks left by the refinement, which otherwise
    force tiny star-point distances and very large penalties.
    """
    indptr, indices = A.indptr, A.indices
    for _ in range(max_sweeps):
        moved = 0
        size = np.bincount(part)
        for v in range(A.shape[0]):
            nb = part[indices[indptr[v]:indptr[v + 1]]]
            if nb.size == 0:
                continue
            vals, cnt = np.unique(nb, return_counts=True)
            j = int(np.argmax(cnt))
            q = vals[j]
            if q != part[v] and 2 * cnt[j] > nb.size and size[part[v]] > 1:
                size[part[v]] -= 1
                size[q] += 1
                part[v] = q
                moved += 1
        if moved == 0:
            break
    return part


def _fix_connectivity(A, part, k, vw):
    """Reattach small disconnected fragments; split off large ones as new parts."""
    avg = vw.sum() / max(k, 1)
    next_label = k
    for _ in range(3):
        changed = False
        for p in range(part.max() + 1):
            idx = np.nonzero(part == p)[0]
            if idx.size == 0:
                continue
            sub = A[idx][:, idx]
            nc, lab = connected_components(sub, directed=False)
            if nc == 1:
                continue
            sizes = np.bincount(lab, weights=vw[idx])
            keep = int(np.argmax(sizes))
            for c in range(nc):
                if c == keep:
                    continue
                comp = idx[lab == c]
                if sizes[c] < 0.5 * avg:
                    rows = A[comp]
                    nbp = part[rows.indices]
                    nbp = nbp[nbp != p]
                    if nbp.size:
                        part[comp] = np.bincount(nbp, weights=rows.data[part[rows.indices] != p]).argmax()
                        changed = True
                        continue
                part[comp] = next_label
                next_label += 1
                changed = True
        if not changed:
            break
    _, part = np.unique(part, return_inverse=True)
    return part


def partition_graph(A, n_parts, seed=0, vw=None):
    """Partition a symmetric weighted graph into `n_parts` connected groups.

    Returns an integer label per vertex.  The number of groups may exceed
    `n_parts` if a part cannot be kept connected.
    """
    n = A.shape[0]
    if n_parts < 1 or n_parts > n:
        raise ValueError(f"n_parts must be in [1, {n}], got {n_parts}")
    if vw is None:
        vw = np.ones(n)
    if n_parts == 1:
        return _fix_connectivity(A, np.zeros(n, dtype=np.int64), 1, vw)
    if n_parts == n:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    graphs = [(A.tocsr(), np.asarray(vw, dtype=float))]
    maps = []
    target = max(20 * n_parts, 80)
    while graphs[-1][0].shape[0] > target:
        Ac, vc = graphs[-1]
        cmap, nc = _heavy_edge_matching(Ac, vc, rng)
        if nc > 0.9 * Ac.shape[0]:
            break
        graphs.append(_coarsen(Ac, vc, cmap, nc))
        maps.append(cmap)
    Ac, vc = graphs[-1]
    part = _grow(Ac, vc, n_parts, rng)
    part = _refine(Ac, vc, part, n_parts, rng, imbalance=1.2)
    for level in range(len(maps) - 1, -1, -1):
        part = part[maps[level]]
        Af, vf = graphs[level]
        part = _refine(Af, vf, part, n_parts, rng, imbalance=1.2 if level else 1.1)
    part = _smooth(graphs[0][0], part)
    return _fix_connectivity(graphs[0][0], part, n_parts, graphs[0][1])


def lloyd_refine(A, points, part, weights=None, iters=60):
    """Graph Lloyd iteration: parts become graph-Voronoi regions of seeds placed at part centroids.

    Distances are shortest paths along the dual graph with Euclidean edge
    lengths between cell centers, so every region is connected.
    """
    points = np.asarray(points, dtype=float)
    w = np.ones(len(points)) if weights is None else np.asarray(weights, dtype=float)
    A = sp.coo_matrix(A)
    W = sp.csr_matrix((np.linalg.norm(points[A.row] - points[A.col], axis=1) + 1e-300, (A.row, A.col)), shape=A.shape)
    part = np.asarray(part).copy()
    for _ in range(iters):
        k = part.max() + 1
        mass = np.bincount(part, weights=w, minlength=k)
        cen = np.column_stack([np.bincount(part, weights=w * points[:, i], minlength=k) for i in range(2)]) / mass[:, None]
        d2 = np.sum((points - cen[part]) ** 2, axis=1)
        seeds = np.empty(k, dtype=np.int64)
        order = np.lexsort((d2, part))
        first = np.searchsorted(part[order], np.arange(k))
        seeds[:] = order[first]
        _, _, src = dijkstra(W, indices=seeds, min_only=True, return_predecessors=True)
        lookup = np.full(len(points), -1, dtype=np.int64)
        lookup[seeds] = np.arange(k)
        new = lookup[src]
        if np.array_equal(new, part):
            break
        _, part = np.unique(new, return_inverse=True)
    return part
