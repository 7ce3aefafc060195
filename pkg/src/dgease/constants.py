"""Explicit inverse-estimate constants, the interior penalty and the streamline weights."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev
from shapely.geometry import box

D = 2


class StabilityError(RuntimeError):
    pass


# --- closed-form constants --------------------------------------------------


def prism_bernstein_constant(d, r_hat):
    """H1-L2 constant on a reference generalized prism: 64(d-1) r(r+1)(2r+1) + 12 d."""
    return 64 * (d - 1) * r_hat * (r_hat + 1) * (2 * r_hat + 1) + 12 * d


def linf_l2_base(d, p, q):
    """C_inf(d, p, q) = 2^(4d+3) (q(2p+1))^(2(d-1))."""
    return 2.0 ** (4 * d + 3) * float(q * (2 * p + 1)) ** (2 * (d - 1))


def linf_l2_constant(d, p, q):
    """Factor in ||v||_inf^2 <= C ||v||^2 on a reference prism of unit base.

    p^2 C_inf(d, p, q) for q >= 1; a flat top (q = 0) is the unit hypercube,
    where the sharp value (p+1)^(2d) is used.  Degree 0 uses the factor 1 in
    place of p^2.
    """
    if q == 0:
        return float((p + 1) ** (2 * d))
    return max(p, 1) ** 2 * linf_l2_base(d, p, q)


def perturbation_margin(p):
    """Largest strip width (8p)^-2 for which half the L2 mass survives."""
    return (8.0 * p) ** -2


def trace_factor(p, d=D):
    return (p + 1) * (p + d)


def disc_h1l2_bound(p, R):
    """||grad v||^2 <= 9 p (p+1)^2 (p+2) / R^2 ||v||^2 on a disc of radius R."""
    return 9.0 * p * (p + 1) ** 2 * (p + 2) / R ** 2


def disc_cover_bernstein_bound():
    """Bound for C^B on a disc from its cover by four half-prisms with r_hat = 2."""
    return 4 * prism_bernstein_constant(2, 2)


def face_fit_degree(height, p, q_max=10, n_samples=400):
    """Smallest q with a least-squares Chebyshev fit of `height` on [0, 1] within (8p)^-2."""
    tol = perturbation_margin(p)
    xs = 0.5 * (1 - np.cos(np.pi * (np.arange(n_samples) + 0.5) / n_samples))
    ys = height(xs)
    fine = np.linspace(0.0, 1.0, 4 * n_samples)
    for q in range(1, q_max + 1):
        c = chebyshev.chebfit(2 * xs - 1, ys, q)
        if np.max(np.abs(chebyshev.chebval(2 * fine - 1, c) - height(fine))) <= tol:
            return q
    return q_max


# --- covers -----------------------------------------------------------------


@dataclass
class Prism:
    lo: np.ndarray
    hi: np.ndarray
    r_hat: int = 2
    q: int = 1

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def area(self):
        return float(np.prod(self.size))

    @property
    def rho(self):
        return 0.5 * float(self.size.min())

    @property
    def height(self):
        return float(self.size.max())


@dataclass
class Cover:
    prisms: list
    c_as: float
    tight: bool

    def p_coverable(self, p):
        return self.tight and p >= 1


def strip_cover(K, p):
    """Two-strip cover of K by the bounding boxes of K cut along its longer bbox side.

    The cover is tight for degree p when, for each box, shaving a layer of
    width height*(8p)^-2 off one side leaves a rectangle inside K.
    """
    lo, hi = K.bbox
    axis = int(np.argmax(hi - lo))
    mid = 0.5 * (lo[axis] + hi[axis])
    poly = K.polygon
    prisms = []
    for a, b in ((lo[axis], mid), (mid, hi[axis])):
        slab_lo, slab_hi = lo.copy(), hi.copy()
        slab_lo[axis], slab_hi[axis] = a, b
        piece = poly.intersection(box(*slab_lo, *slab_hi))
        if piece.is_empty:
            continue
        x0, y0, x1, y1 = piece.bounds
        prisms.append(Prism(np.array([x0, y0]), np.array([x1, y1])))
    if not prisms:
        raise StabilityError(f"element {K.id}: empty cover")
    c_as = min(P.area for P in prisms) / K.area
    eps = perturbation_margin(max(p, 1))
    tol_poly = poly.buffer(1e-9 * K.h)
    tight = True
    for P in prisms:
        ok = False
        shave = eps * P.height
        for ax in range(2):
            for side in (0, 1):
                l, h = P.lo.copy(), P.hi.copy()
                if side == 0:
                    h[ax] -= shave
                else:
                    l[ax] += shave
                if tol_poly.covers(box(*l, *h)):
                    ok = True
        tight &= ok
    return Cover(prisms, float(c_as), bool(tight))


# --- per-element constants --------------------------------------------------


def trace_constant(K, group, p, cover=None, safety=True, q=1):
    """C_INV(p, K, F_i): the geometric branch |K| / (|F_i| min m.n), improved by the
    L_inf branch 2 C_inf / c_as when K is p-coverable."""
    mdn = group.min_m_dot_n_safe if safety else group.min_m_dot_n
    geo = K.area / (group.length * mdn) if mdn > 0 else np.inf
    if cover is not None and cover.p_coverable(p):
        geo = min(geo, 2 * linf_l2_base(D, p, q) / cover.c_as)
    if not np.isfinite(geo):
        raise StabilityError(f"element {K.id}: face group with nonpositive m.n and no p-cover")
    return float(geo)


def trace_bound(K, group, p, **kw):
    """Full factor in ||v||^2_{F_i} <= factor ||v||^2_K."""
    return trace_constant(K, group, p, **kw) * trace_factor(p) * group.length / K.area


def h1l2_constant(K, p, cover, q=1):
    """C^B_INV(p, K) with ||grad v||^2 <= C^B p^4 / rho_K^2 ||v||^2."""
    if K.is_disc():
        return disc_h1l2_bound(p, 1.0) / max(p, 1) ** 4
    if not cover.prisms:
        raise StabilityError("empty cover")
    rho = K.rho
    terms = [prism_bernstein_constant(D, P.r_hat) * (P.r_hat * rho / P.rho) ** 2 for P in cover.prisms]
    rho_cov = 2.0 * sum(terms)
    if cover.p_coverable(p) and p >= 1:
        rho_pcov = 2.0 / cover.c_as * linf_l2_constant(D, p - 1, q) * max(terms)
        return float(min(rho_cov, rho_pcov))
    return float(rho_cov)


def h1l2_bound(K, p, cover, q=1):
    return h1l2_constant(K, p, cover, q) * p ** 4 / K.rho ** 2


@dataclass
class ElementConstants:
    c_inv_trace: np.ndarray
    c_inv_B: float
    p_coverable: bool
    q_K: int
    c_as: float
    r_hat: list
    a_bar: float
    b_inf: float
    lambda_K: float = 0.0
    sigma_K_a: float = 0.0
    sigma_K_b: float = 0.0
    group_of_segment: dict = field(default_factory=dict)


def element_constants(K, p, a_bar, b_inf, q=1):
    cover = strip_cover(K, p)
    traces = np.array([trace_constant(K, g, p, cover, q=q) for g in K.face_groups])
    cb = h1l2_constant(K, p, cover, q)
    gos = {}
    for gi, g in enumerate(K.face_groups):
        for s in g.segments:
            gos[s] = gi
    return ElementConstants(traces, cb, cover.p_coverable(p), q, cover.c_as, [P.r_hat for P in cover.prisms],
                            float(a_bar), float(b_inf), group_of_segment=gos)


def geometric_penalty_factor(K, ec, seg_ids, p):
    """|I_F^K| max_{i in I_F^K} C_INV |F_i| (p+1)(p+d) / |K| for the face made of seg_ids."""
    groups = sorted({ec.group_of_segment[s] for s in seg_ids})
    worst = max(ec.c_inv_trace[g] * K.face_groups[g].length for g in groups)
    return len(groups) * worst * trace_factor(p) / K.area


def penalty_base(K, ecK, segsK, pK, K2=None, ec2=None, segs2=None, p2=None):
    """Scalar penalty 2 max over the adjacent elements of the geometric factor times a_bar."""
    vals = [geometric_penalty_factor(K, ecK, segsK, pK) * ecK.a_bar]
    if K2 is not None:
        vals.append(geometric_penalty_factor(K2, ec2, segs2, p2) * ec2.a_bar)
    return 2.0 * max(vals)


def streamline_weight(K, ec, p, face_sums, sigma_K):
    """lambda_K; zero when the wind vanishes on K."""
    if ec.b_inf == 0.0:
        return 0.0
    num = min(K.rho / np.sqrt(ec.c_inv_B), 1.0 / face_sums)
    den = max(ec.b_inf, sigma_K) * trace_factor(p)
    if den == 0.0:
        raise StabilityError(f"element {K.id}: degenerate problem (a and b vanish)")
    return float(num / den)


# --- tables -----------------------------------------------------------------

CONSTANT_COLUMNS = ("kind", "element", "group", "p", "area", "h", "rho", "n_segments", "length", "min_m_dot_n",
                    "c_inv_trace", "c_inv_B", "p_coverable", "c_as", "forced")


def constants_rows(mesh, p):
    """One row per element (kind 'element') and per face group (kind 'group')."""
    rows = []
    for K in mesh.elements:
        ec = element_constants(K, p, a_bar=1.0, b_inf=0.0)
        base = {"element": K.id, "p": p, "area": K.area, "h": K.h, "rho": K.rho}
        rows.append({**base, "kind": "element", "group": "", "n_segments": len(K.segments), "c_inv_B": ec.c_inv_B,
                     "p_coverable": ec.p_coverable, "c_as": ec.c_as, "forced": "assumption-violating" in K.flags})
        for gi, g in enumerate(K.face_groups):
            rows.append({**base, "kind": "group", "group": gi, "n_segments": len(g.segments), "length": g.length,
                         "min_m_dot_n": g.min_m_dot_n, "c_inv_trace": ec.c_inv_trace[gi], "forced": g.forced})
    return rows
