"""Background mesh generators for the built-in examples and the shape battery."""
from __future__ import annotations

import numpy as np

from ..curves import Circle, GeometryError, Segment, SineGraph
from .background import BackgroundMesh, edge_key
from .elements import element_from_segments, polygon_element


def _grid_triangles(nx, ny, flip=None):
    """Triangles of an (nx+1) x (ny+1) vertex grid, index i*(ny+1)+j."""
    idx = lambda i, j: i * (ny + 1) + j
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            if flip is not None and flip(i, j):
                tris += [(a, b, d), (b, c, d)]
            else:
                tris += [(a, b, c), (a, c, d)]
    return np.array(tris)


def _label_grid_boundary(nx, ny, labels=("bottom", "right", "top", "left")):
    idx = lambda i, j: i * (ny + 1) + j
    out = {}
    for i in range(nx):
        out[edge_key(idx(i, 0), idx(i + 1, 0))] = labels[0]
        out[edge_key(idx(i, ny), idx(i + 1, ny))] = labels[2]
    for j in range(ny):
        out[edge_key(idx(nx, j), idx(nx, j + 1))] = labels[1]
        out[edge_key(idx(0, j), idx(0, j + 1))] = labels[3]
    return out


def structured_rectangle(nx, ny, x0=0.0, x1=1.0, y0=0.0, y1=1.0):
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    return BackgroundMesh(verts, _grid_triangles(nx, ny), _label_grid_boundary(nx, ny))


def annulus_mesh(n_theta, n_r, hole_center=(0.25, 0.25), hole_radius=0.4):
    """Unit disc minus an off-centre circular hole, with exact curved boundary edges.

    Vertices blend the hole circle into the unit circle along matching angles.
    """
    th = np.linspace(0.0, 2 * np.pi, n_theta, endpoint=False)
    c = np.asarray(hole_center)
    inner = c + hole_radius * np.column_stack([np.cos(th), np.sin(th)])
    outer = np.column_stack([np.cos(th), np.sin(th)])
    s = np.linspace(0.0, 1.0, n_r + 1)
    verts = ((1 - s)[None, :, None] * inner[:, None, :] + s[None, :, None] * outer[:, None, :]).reshape(-1, 2)
    idx = lambda i, j: (i % n_theta) * (n_r + 1) + j
    tris = []
    for i in range(n_theta):
        for j in range(n_r):
            a, b, cc, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            if (i + j) % 2:
                tris += [(a, b, cc), (a, cc, d)]
            else:
                tris += [(a, b, d), (b, cc, d)]
    boundary, curved = {}, {}
    for i in range(n_theta):
        e_in = edge_key(idx(i, 0), idx(i + 1, 0))
        e_out = edge_key(idx(i, n_r), idx(i + 1, n_r))
        boundary[e_in], curved[e_in] = "hole", 1
        boundary[e_out], curved[e_out] = "outer", 0
    levelsets = [Circle((0.0, 0.0), 1.0), Circle(c, hole_radius, hole=True)]
    return BackgroundMesh(verts, np.array(tris), boundary, curved, levelsets)


def wavy_square_levelsets(delta=0.03, freq=6.0):
    """Sides of the unit square perturbed by delta*sin(freq*pi*t): bottom, right, top, left."""
    return [
        SineGraph(axis=1, offset=0.0, amp=-delta, freq=freq, side=-1.0),
        SineGraph(axis=0, offset=1.0, amp=delta, freq=freq, side=1.0),
        SineGraph(axis=1, offset=1.0, amp=delta, freq=freq, side=1.0),
        SineGraph(axis=0, offset=0.0, amp=-delta, freq=freq, side=-1.0),
    ]


def wavy_square_mesh(n, delta=0.03, freq=6.0):
    """Structured mesh of the unit square with sinusoidally perturbed sides.

    Blending map x1 = s + delta(2s-1) sin(freq pi t), x2 = t + delta(2t-1) sin(freq pi s);
    boundary vertices lie exactly on the perturbed sides.
    """
    s = np.linspace(0.0, 1.0, n + 1)
    S, T = np.meshgrid(s, s, indexing="ij")
    X1 = S + delta * (2 * S - 1) * np.sin(freq * np.pi * T)
    X2 = T + delta * (2 * T - 1) * np.sin(freq * np.pi * S)
    verts = np.column_stack([X1.ravel(), X2.ravel()])
    tris = _grid_triangles(n, n, flip=lambda i, j: (i + j) % 2 == 1)
    boundary = _label_grid_boundary(n, n)
    side_id = {"bottom": 0, "right": 1, "top": 2, "left": 3}
    curved = {e: side_id[lab] for e, lab in boundary.items()}
    return BackgroundMesh(verts, tris, boundary, curved, wavy_square_levelsets(delta, freq))


EXAMPLE3_HOLES = ((0.28, 0.30, 0.10), (0.70, 0.32, 0.07), (0.33, 0.72, 0.12), (0.72, 0.70, 0.08))


def wavy_square_with_holes(n, holes=EXAMPLE3_HOLES, delta=0.03, freq=6.0):
    """Wavy square with circular holes; hole edges are arcs fitted inward onto the circles."""
    bg = wavy_square_mesh(n, delta, freq)
    V, T = bg.vertices, bg.triangles
    inside = np.zeros(len(V), dtype=bool)
    for cx, cy, r in holes:
        inside |= np.hypot(V[:, 0] - cx, V[:, 1] - cy) < r
    keep = ~inside[T].any(axis=1)
    T = T[keep]
    # drop ears repeatedly: cells with two edges on a hole boundary
    hole_of = np.full(len(V), -1)
    for _ in range(10):
        tmp = BackgroundMesh(V, T, {}, {}, [])
        nb = tmp.neighbors()
        outer = set(bg.boundary)
        bnd = nb < 0
        is_hole_edge = np.zeros_like(bnd)
        for t, k in zip(*np.nonzero(bnd)):
            is_hole_edge[t, k] = edge_key(T[t, k], T[t, (k + 1) % 3]) not in outer
        ears = is_hole_edge.sum(axis=1) >= 2
        if not ears.any():
            break
        T = T[~ears]
    tmp = BackgroundMesh(V, T, {}, {}, [])
    nb = tmp.neighbors()
    boundary, curved = {}, {}
    levelsets = list(bg.levelsets)
    for hid, (cx, cy, r) in enumerate(holes):
        levelsets.append(Circle((cx, cy), r, hole=True))
    V = V.copy()
    for t, k in zip(*np.nonzero(nb < 0)):
        i, j = T[t, k], T[t, (k + 1) % 3]
        e = edge_key(i, j)
        if e in bg.boundary:
            boundary[e] = bg.boundary[e]
            curved[e] = bg.curved[e]
            continue
        mid = 0.5 * (V[i] + V[j])
        d = [np.hypot(mid[0] - cx, mid[1] - cy) - r for cx, cy, r in holes]
        hid = int(np.argmin(d))
        boundary[e] = f"hole{hid}"
        curved[e] = len(bg.levelsets) + hid
        for v in (i, j):
            cx, cy, r = holes[hid]
            dv = V[v] - (cx, cy)
            V[v] = (cx, cy) + r * dv / np.linalg.norm(dv)
            hole_of[v] = hid
    used = np.unique(T)
    remap = -np.ones(len(V), dtype=np.int64)
    remap[used] = np.arange(used.size)
    T = remap[T]
    boundary = {edge_key(remap[a], remap[b]): lab for (a, b), lab in boundary.items()}
    curved = {edge_key(remap[a], remap[b]): lid for (a, b), lid in curved.items()}
    out = BackgroundMesh(V[used], T, boundary, curved, levelsets)
    if np.any(out.signed_areas() <= 0):
        raise GeometryError("hole fitting produced an inverted cell")
    return out


def interface_rectangles(n=8, amp=0.025, freq=8.0):
    """[-1,1]^2 cut into n x n rectangles, each two triangles, with the row
    boundary at x2 = 0 bent onto x2 = amp*sin(freq*pi*x1).

    Rectangle corners on the interface satisfy sin = 0 when freq*2/n is an
    integer.  Cells above the curve get region 1, below region 2.
    """
    if n % 2 or abs(freq * 2 / n - round(freq * 2 / n)) > 1e-12:
        raise GeometryError("rectangle corners must fall on zeros of the interface curve")
    bg = structured_rectangle(n, n, -1.0, 1.0, -1.0, 1.0)
    mid = n // 2
    idx = lambda i, j: i * (n + 1) + j
    curve = SineGraph(axis=1, offset=0.0, amp=amp, freq=freq, side=1.0)
    curved = {}
    for i in range(n):
        curved[edge_key(idx(i, mid), idx(i + 1, mid))] = 0
    centroids = bg.vertices[bg.triangles].mean(axis=1)
    region = np.where(centroids[:, 1] > 0, 1, 2)
    out = BackgroundMesh(bg.vertices, bg.triangles, bg.boundary, curved, [curve], region)
    labels = (np.arange(out.n_cells) // 2)
    return out, labels


# --- standalone shapes for the inequality battery ---------------------------


def unit_square_element():
    return polygon_element([(0, 0), (1, 0), (1, 1), (0, 1)])


def circle_arcs(phi, center, radius, th0, th1, n):
    """n arcs of a circle between angles th0 and th1 (counter-clockwise if th1 > th0)."""
    th = np.linspace(th0, th1, n + 1)
    pts = np.asarray(center) + radius * np.column_stack([np.cos(th), np.sin(th)])
    return [Segment(pts[i], pts[i + 1], phi) for i in range(n)]


def disc_element(radius=1.0, center=(0.0, 0.0), n_arcs=8):
    c = np.asarray(center, dtype=float)
    phi = Circle(c, radius)
    segs = circle_arcs(phi, c, radius, 0.0, 2 * np.pi, n_arcs)
    keys = [("boundary", "circle")] * n_arcs
    return element_from_segments(segs, keys, shape_hint={"disc": (c, float(radius))})


def annulus_sector_element():
    """First-quadrant part of the unit disc outside the off-centre hole of radius 0.4."""
    c, r = np.array([0.25, 0.25]), 0.4
    # hole meets the axes where (x-0.25)^2 + 0.0625 = 0.16
    xh = 0.25 + np.sqrt(r * r - 0.0625)
    outer, hole = Circle((0, 0), 1.0), Circle(c, r, hole=True)
    a0 = np.arctan2(-0.25, xh - 0.25)
    a1 = np.arctan2(xh - 0.25, -0.25)
    arcs_out = circle_arcs(outer, (0, 0), 1.0, 0.0, np.pi / 2, 4)
    arcs_in = circle_arcs(hole, c, r, a0, a1, 8)
    arcs_in = [s.reversed() for s in arcs_in[::-1]]
    segs = [Segment((xh, 0.0), (1.0, 0.0))] + arcs_out + [Segment((0.0, 1.0), (0.0, xh))] + arcs_in
    keys = ["x-axis"] + ["outer"] * 4 + ["y-axis"] + ["hole"] * 8
    return element_from_segments(segs, [("boundary", k) for k in keys])


def random_convex_polygon(n=8, seed=0):
    rng = np.random.default_rng(seed)
    th = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.8, 1.2, n)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    from scipy.spatial import ConvexHull

    pts = pts[ConvexHull(pts).vertices]
    return polygon_element(pts)


def sawtooth_element(n_teeth=16, height=1.0, half_width=0.5, tooth=None):
    """Triangle with apex at the origin whose top side is a zigzag of n teeth."""
    tooth = height / 20 if tooth is None else tooth
    xs = np.linspace(half_width, -half_width, 2 * n_teeth + 1)
    ys = np.full_like(xs, height)
    ys[1::2] -= tooth
    top = list(zip(xs, ys))
    pts = [(0.0, 0.0), (half_width, height)] + top[1:]
    keys = [("boundary", "right")] + [("boundary", "teeth")] * (len(top) - 1) + [("boundary", "left")]
    segs = [Segment(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts))]
    return element_from_segments(segs, keys)


def l_shape_element():
    pts = [(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)]
    keys = [("boundary", k) for k in ("b", "r1", "re", "re", "t", "l")]
    return polygon_element(pts, keys)


def shape_battery():
    return {
        "unit_square": unit_square_element(),
        "unit_disc": disc_element(),
        "annulus_sector": annulus_sector_element(),
        "convex_8gon": random_convex_polygon(8, seed=7),
        "sawtooth_4": sawtooth_element(4),
        "sawtooth_16": sawtooth_element(16),
        "l_shape": l_shape_element(),
    }
