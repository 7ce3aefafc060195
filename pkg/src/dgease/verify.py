"""Eigenvalue and random-probe oracles for the inverse estimates, coercivity and inf-sup."""
from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from . import analysis as A
from . import constants as C
from .assembly import assemble, assemble_diffusion
from .geometry.elements import build_face_groups
from .polybasis import build_basis
from .quadrature import QuadRule, face_rule, fan_rule, gauss_interval, points_for_order

log = logging.getLogger(__name__)

RATIO_TOL = 1e-8


@dataclass
class InequalityReport:
    inequality: str
    shape: str
    p: int
    empirical: float
    bound: float
    ratio: float
    method: str
    detail: str = ""

    @property
    def ok(self):
        return bool(self.ratio <= 1.0 + RATIO_TOL)


def report(inequality, shape, p, empirical, bound, method, detail=""):
    ratio = empirical / bound if bound > 0 else (0.0 if empirical <= 0 else np.inf)
    return InequalityReport(inequality, shape, int(p), float(empirical), float(bound), float(ratio), method, detail)


def gram(phi, w):
    return phi.T @ (w[:, None] * phi)


def max_gen_eig(A_, B_):
    """Largest eigenvalue of A x = lambda B x, B symmetric positive definite."""
    return float(sla.eigh(A_, B_, eigvals_only=True)[-1])


def min_gen_eig(A_, B_):
    return float(sla.eigh(A_, B_, eigvals_only=True)[0])


def element_basis(K, p):
    return build_basis(p, K.bbox, K.rule(2 * p + 2))


def cone_rule(K, group, order):
    """Rule over K_{F_i}: the union of the fans from the star point to the group's segments."""
    return QuadRule.concat([fan_rule(group.star_point, K.segments[i], order) for i in group.segments], order)


def group_face_rule(K, group, order):
    return QuadRule.concat([face_rule(K.segments[i], order) for i in group.segments], order)


# --- inverse estimates ------------------------------------------------------------


def rayleigh_trace(K, group, p, basis=None):
    """Sharp constants of ||v||^2_{F_i} / ||v||^2_{K_{F_i}} and ||v||^2_{F_i} / ||v||^2_K over P_p.

    Each quotient is computed in a basis orthonormal on its denominator domain,
    so the generalized problem becomes a symmetric eigenproblem of the face mass.
    """
    order = 2 * p + 4
    rf = group_face_rule(K, group, order)
    rc = cone_rule(K, group, order)
    out = []
    for r, b in ((rc, None), (K.rule(order), basis)):
        if b is None:
            lo, hi = r.points.min(axis=0), r.points.max(axis=0)
            b = build_basis(p, np.array([lo, hi]), r)
        MF = gram(b.eval(rf.points), rf.weights)
        MD = gram(b.eval(r.points), r.weights)
        out.append(max_gen_eig(MF, MD))
    return tuple(out)


def rayleigh_h1l2(K, p, basis=None):
    """Sharp constant of ||grad v||^2 / ||v||^2 over P_p(K); 0 for p = 0."""
    if p == 0:
        return 0.0
    basis = basis or element_basis(K, p)
    r = K.rule(2 * p + 2)
    phi, dphi = basis.eval_both(r.points)
    S = np.einsum("q,qmi,qli->ml", r.weights, dphi, dphi)
    return max_gen_eig(S, gram(phi, r.weights))


def sample_inside(K, n, seed=0):
    """n points uniformly distributed in K (rejection sampling in the bounding box)."""
    import shapely

    rng = np.random.default_rng(seed)
    lo, hi = K.bbox
    poly = K.polygon
    out = []
    while sum(len(o) for o in out) < n:
        x = lo + (hi - lo) * rng.random((2 * n, 2))
        out.append(x[shapely.contains_xy(poly, x[:, 0], x[:, 1])])
    return np.concatenate(out)[:n]


def christoffel_max(basis, points):
    """max_x sum_i phi_i(x)^2 = max over v of |v(x)|^2 / ||v||^2 (orthonormal basis)."""
    return float(np.max(np.sum(basis.eval(points) ** 2, axis=1)))


def rectangle_element(lo, hi):
    from .geometry.elements import polygon_element

    (x0, y0), (x1, y1) = lo, hi
    return polygon_element([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def linf_l2_checks(K, name, p, cover, n_points=10_000, seed=0):
    """L_inf-L2 probe on K when K is p-coverable; otherwise on each prism of the cover."""
    out = []
    if cover.p_coverable(p):
        basis = element_basis(K, p)
        emp = christoffel_max(basis, sample_inside(K, n_points, seed))
        bound = 2 * C.linf_l2_constant(2, p, 1) / (cover.c_as * K.area)
        out.append(report("linf_l2", name, p, emp, bound, "random-probe", "p-coverable element"))
        return out
    for j, P in enumerate(cover.prisms):
        R = rectangle_element(P.lo, P.hi)
        basis = element_basis(R, p)
        rng = np.random.default_rng(seed + j)
        pts = P.lo + (P.hi - P.lo) * rng.random((n_points, 2))
        pts = np.vstack([pts, [P.lo, P.hi, [P.lo[0], P.hi[1]], [P.hi[0], P.lo[1]]]])
        emp = christoffel_max(basis, pts)
        bound = C.linf_l2_constant(2, p, P.q) / P.area
        out.append(report("linf_l2", name, p, emp, bound, "random-probe", f"cover prism {j}"))
    return out


def shape_reports(K, name, p):
    """All inverse-estimate reports for one shape and degree."""
    if not K.face_groups:
        build_face_groups(K)
    cover = C.strip_cover(K, p)
    basis = element_basis(K, p)
    out = []
    for gi, g in enumerate(K.face_groups):
        cone, elem = rayleigh_trace(K, g, p, basis)
        out.append(report("trace_cone", name, p, cone, C.trace_factor(p) / g.min_m_dot_n_safe, "eigen", f"group {gi}"))
        out.append(report("trace", name, p, elem, C.trace_bound(K, g, p, cover=cover), "eigen", f"group {gi}"))
    if p >= 1:
        emp = rayleigh_h1l2(K, p, basis)
        out.append(report("h1l2", name, p, emp, C.h1l2_bound(K, p, cover), "eigen"))
        if K.is_disc():
            R = K.shape_hint["disc"][1]
            out.append(report("h1l2_disc", name, p, emp, C.disc_h1l2_bound(p, R), "eigen"))
        out += linf_l2_checks(K, name, p, cover)
    return out


def run_battery(shapes=None, pmax=6, pmin=0):
    from .geometry.meshes import shape_battery

    shapes = shapes or shape_battery()
    out = []
    for name, K in shapes.items():
        build_face_groups(K)
        for p in range(pmin, pmax + 1):
            out += shape_reports(K, name, p)
    return out


def write_reports(path, reports):
    rows = [dict(asdict(r), ok=r.ok) for r in reports]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


# --- strip perturbation -----------------------------------------------------------


def graph_prism_rule(height, order, n_sub=8, cut=0.0):
    """Rule on {0 < x < 1, 0 < y < height(x) - cut}, composite Gauss in x."""
    xs, wx = gauss_interval(points_for_order(order + 4))
    ys, wy = gauss_interval(points_for_order(order))
    pts, wts = [], []
    for k in range(n_sub):
        x = (k + xs) / n_sub
        top = height(x) - cut
        P = np.stack([np.repeat(x, len(ys)), (top[:, None] * ys[None, :]).ravel()], axis=1)
        W = ((wx / n_sub) * top)[:, None] * wy[None, :]
        pts.append(P)
        wts.append(W.ravel())
    return QuadRule(np.concatenate(pts), np.concatenate(wts), order)


PRISM_SHAPES = {
    "unit_square": lambda x: np.ones_like(x),
    "curved_prism": lambda x: 1.0 + 0.2 * np.sin(np.pi * x),
}


def strip_perturbation_check(shape, p, eps=None, n_probes=500, seed=0):
    """Ratios ||v||^2_{K_eps} / ||v||^2_K for random v in P_p and the eigen minimum.

    K_eps removes a layer of height eps under the curved top.  Returns
    (min probe ratio, eigen minimum).
    """
    height = PRISM_SHAPES[shape] if isinstance(shape, str) else shape
    eps = C.perturbation_margin(p) if eps is None else eps
    order = 2 * p + 2
    full = graph_prism_rule(height, order)
    cut = graph_prism_rule(height, order, cut=eps)
    basis = build_basis(p, np.array([[0.0, 0.0], [1.0, float(np.max(height(np.linspace(0, 1, 101))))]]), full)
    M = gram(basis.eval(full.points), full.weights)
    Me = gram(basis.eval(cut.points), cut.weights)
    rng = np.random.default_rng(seed)
    V = rng.standard_normal((n_probes, basis.dim))
    probe = np.einsum("ki,ij,kj->k", V, Me, V) / np.einsum("ki,ij,kj->k", V, M, V)
    return float(probe.min()), min_gen_eig(Me, M)


# --- coercivity, continuity and inf-sup ---------------------------------------------


def coercivity_continuity_check(disc, n_probes=500, seed=0):
    """Random-probe min B_d(w,w)/|||w|||_d^2 and max B_d(w,v)/(|||w|||_d |||v|||_d), plus eigen extremes."""
    Bd = assemble_diffusion(disc).toarray()
    N = A.d_matrix(A.norm_matrices(disc)).toarray()
    rng = np.random.default_rng(seed)
    W = rng.standard_normal((n_probes, N.shape[0]))
    V = rng.standard_normal((n_probes, N.shape[0]))
    nw = np.einsum("ki,ij,kj->k", W, N, W)
    nv = np.einsum("ki,ij,kj->k", V, N, V)
    coer = np.einsum("ki,ij,kj->k", W, Bd, W) / nw
    cont = np.abs(np.einsum("ki,ij,kj->k", V, Bd, W)) / np.sqrt(nw * nv)
    L = np.linalg.cholesky(N)
    T = sla.solve_triangular(L, sla.solve_triangular(L, Bd, lower=True).T, lower=True).T
    ev = np.linalg.eigvalsh(0.5 * (T + T.T))
    sv = np.linalg.svd(T, compute_uv=False)
    return {"coercivity_probe": float(coer.min()), "continuity_probe": float(cont.max()),
            "coercivity_eigen": float(ev[0]), "continuity_eigen": float(sv[0])}


def infsup_estimate(disc):
    """Smallest singular value of N_s^{-1/2} B N_s^{-1/2} with the stability-theory streamline weights lambda_K."""
    B = assemble(disc).matrix.toarray()
    N = A.s_matrix(A.norm_matrices(disc, lambdas=disc.lambdas)).toarray()
    L = np.linalg.cholesky(N)
    T = sla.solve_triangular(L, sla.solve_triangular(L, B, lower=True).T, lower=True).T
    return float(np.linalg.svd(T, compute_uv=False)[-1])
