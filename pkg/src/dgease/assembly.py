"""Discrete space, quadrature data and assembly of the interior-penalty dG system.

B(u, v) = B_ar(u, v) + B_d(u, v) with upwinded advection-reaction and symmetric
interior-penalty diffusion; the load functional imposes Dirichlet data weakly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import constants as C
from .polybasis import build_basis, dim_p
from .problem import BoundaryLabel, c0_squared, classify_boundary, max_diffusion_eig

log = logging.getLogger(__name__)

MAX_ORDER = 30


class SolverError(RuntimeError):
    pass


class DGSpace:
    """Per-element orthonormal bases of P_{p_K}(K) and the global dof numbering."""

    def __init__(self, mesh, degree=None):
        self.mesh = mesh
        if degree is not None:
            mesh.set_degree(degree)
        self.degrees = np.array([K.degree for K in mesh.elements], dtype=np.int64)
        self.bases = [build_basis(K.degree, K.bbox, K.rule(2 * K.degree)) for K in mesh.elements]
        dims = np.array([dim_p(p) for p in self.degrees])
        self.offsets = np.concatenate([[0], np.cumsum(dims)])
        self.ndofs = int(self.offsets[-1])

    def dofs(self, k):
        return np.arange(self.offsets[k], self.offsets[k + 1])

    @property
    def dof_map(self):
        return [slice(self.offsets[k], self.offsets[k + 1]) for k in range(len(self.bases))]


@dataclass
class ElementData:
    k: int
    x: np.ndarray
    w: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    divb: np.ndarray
    c: np.ndarray
    f: np.ndarray


@dataclass
class InteriorFace:
    k: int
    k2: int
    x: np.ndarray
    w: np.ndarray
    n: np.ndarray
    phi1: np.ndarray
    dphi1: np.ndarray
    phi2: np.ndarray
    dphi2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    type_change: bool = False


@dataclass
class BoundaryFace:
    k: int
    tag: str
    x: np.ndarray
    w: np.ndarray
    n: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    a: np.ndarray
    b: np.ndarray
    labels: np.ndarray
    sigma: np.ndarray
    g_d: np.ndarray
    g_n: np.ndarray


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    dof_map: list
    info: dict = field(default_factory=dict)


def quadrature_order(p, boost=0, extra=0):
    base = 2 * p + 2 + extra
    return int(min(base + boost, max(MAX_ORDER, base)))


class Discretization:
    """Quadrature data, penalties and constants for a mesh, space and problem."""

    def __init__(self, mesh, spec, space=None, degree=None, snorm_scale=1.0):
        self.mesh = mesh
        self.spec = spec
        self.space = space if space is not None else DGSpace(mesh, degree)
        self.snorm_scale = snorm_scale
        self._elem_cache = {}
        self._face_cache = {}
        self._compute_constants()

    # --- orders and coefficient evaluation ------------------------------
    def order(self, p, extra=0):
        return quadrature_order(int(p), self.spec.quad_boost, extra)

    def piece(self, k):
        return self.spec.piece(self.mesh.elements[k].region)

    def element_data(self, extra=0):
        if extra in self._elem_cache:
            return self._elem_cache[extra]
        out = []
        for k, K in enumerate(self.mesh.elements):
            r = K.rule(self.order(K.degree, extra))
            phi, dphi = self.space.bases[k].eval_both(r.points)
            pc = self.piece(k)
            out.append(ElementData(k, r.points, r.weights, phi, dphi, pc.diffusion(r.points), pc.wind(r.points),
                                   pc.div_wind(r.points), pc.reaction(r.points), pc.source(r.points)))
        self._elem_cache[extra] = out
        return out

    # --- constants --------------------------------------------------------
    def _compute_constants(self):
        mesh, spec = self.mesh, self.spec
        ed = self.element_data()
        self.a_bar = np.array([float(max_diffusion_eig(e.a).max(initial=0.0)) for e in ed])
        self.b_inf = np.array([1.05 * float(np.linalg.norm(e.b, axis=1).max(initial=0.0)) for e in ed])
        for e in ed:
            c0_squared(e.x, self.piece(e.k))
        self.consts = [C.element_constants(K, K.degree, self.a_bar[k], self.b_inf[k])
                       for k, K in enumerate(mesh.elements)]
        # geometric penalty factor per face side; sigma(x) = 2 max_side g_side n.a_side(x).n
        self.iface_factor = {}
        for f in mesh.interfaces:
            K1, K2 = mesh.elements[f.k], mesh.elements[f.k2]
            self.iface_factor[(f.k, f.k2)] = (
                C.geometric_penalty_factor(K1, self.consts[f.k], f.segs, K1.degree),
                C.geometric_penalty_factor(K2, self.consts[f.k2], f.segs2, K2.degree),
            )
        self.bface_segments = {}
        for K in mesh.elements:
            for i, key in enumerate(K.keys):
                if isinstance(key, tuple):
                    self.bface_segments.setdefault((K.id, key[1]), []).append(i)
        self.bface_factor = {
            key: C.geometric_penalty_factor(mesh.elements[key[0]], self.consts[key[0]], segs,
                                            mesh.elements[key[0]].degree)
            for key, segs in self.bface_segments.items()
        }
        self._streamline_weights()

    def _streamline_weights(self):
        mesh = self.mesh
        interior, boundary = self.face_data()
        sig_a = np.zeros(mesh.n_elements)
        sig_b = np.zeros(mesh.n_elements)
        face_sums = np.zeros(mesh.n_elements)

        def sqrt_cb_term(k):
            K = mesh.elements[k]
            return np.sqrt(self.consts[k].c_inv_B) * self.a_bar[k] * C.trace_factor(K.degree) / K.rho

        for f in interior:
            smax = float(f.sigma.max(initial=0.0))
            tb = 2 * max(sqrt_cb_term(f.k), sqrt_cb_term(f.k2))
            for k in (f.k, f.k2):
                sig_a[k] = max(sig_a[k], smax)
                sig_b[k] = max(sig_b[k], tb)
        for f in boundary:
            sig_a[f.k] = max(sig_a[f.k], float(f.sigma.max(initial=0.0)))
            sig_b[f.k] = max(sig_b[f.k], 2 * sqrt_cb_term(f.k))
        for k, K in enumerate(mesh.elements):
            ec = self.consts[k]
            face_sums[k] = self._face_sum(K, ec)
            ec.sigma_K_a, ec.sigma_K_b = sig_a[k], sig_b[k]
            ec.lambda_K = C.streamline_weight(K, ec, K.degree, face_sums[k], max(sig_a[k], sig_b[k]))

    def _face_sum(self, K, ec):
        """sum over faces F of K and groups i in I_F^K of C_INV |F_i| / |K|."""
        faces = {}
        for i, key in enumerate(K.keys):
            faces.setdefault(key, []).append(i)
        tot = 0.0
        for segs in faces.values():
            for g in {ec.group_of_segment[s] for s in segs}:
                tot += ec.c_inv_trace[g] * K.face_groups[g].length / K.area
        return tot

    @property
    def lambdas(self):
        return np.array([ec.lambda_K for ec in self.consts])

    def snorm_lambdas(self):
        """Streamline weights snorm_scale * rho_K / p_K^2 used in error reports."""
        return np.array([self.snorm_scale * K.rho / K.degree ** 2 for K in self.mesh.elements])

    # --- faces ------------------------------------------------------------
    def face_data(self, extra=0):
        if extra in self._face_cache:
            return self._face_cache[extra]
        mesh, sp_ = self.mesh, self.space
        interior = []
        for f in mesh.interfaces:
            K1, K2 = mesh.elements[f.k], mesh.elements[f.k2]
            order = self.order(max(K1.degree, K2.degree), extra)
            r = K1.boundary_rule(order, f.segs)
            phi1, dphi1 = sp_.bases[f.k].eval_both(r.points)
            phi2, dphi2 = sp_.bases[f.k2].eval_both(r.points)
            p1, p2 = self.piece(f.k), self.piece(f.k2)
            a1, a2 = p1.diffusion(r.points), p2.diffusion(r.points)
            n = r.normals
            zero1, zero2 = not np.any(a1), not np.any(a2)
            type_change = zero1 != zero2
            g1, g2 = self.iface_factor[(f.k, f.k2)]
            if type_change:
                sigma = np.zeros(len(r))
            else:
                sigma = 2 * np.maximum(g1 * np.einsum("pi,pij,pj->p", n, a1, n), g2 * np.einsum("pi,pij,pj->p", n, a2, n))
            interior.append(InteriorFace(f.k, f.k2, r.points, r.weights, n, phi1, dphi1, phi2, dphi2, a1, a2,
                                         p1.wind(r.points), sigma, type_change))
        boundary = []
        amax = max(float(np.abs(e.a).max(initial=0.0)) for e in self.element_data())
        for (k, tag), segs in sorted(self.bface_segments.items(), key=lambda t: (t[0][0], str(t[0][1]))):
            K = mesh.elements[k]
            r = K.boundary_rule(self.order(K.degree, extra), segs)
            phi, dphi = sp_.bases[k].eval_both(r.points)
            pc = self.piece(k)
            a = pc.diffusion(r.points)
            n = r.normals
            labels = classify_boundary(r.points, n, pc, [tag] * len(r), amax=max(amax, 1e-300))
            sigma = 2 * self.bface_factor[(k, tag)] * np.einsum("pi,pij,pj->p", n, a, n)
            sigma = np.where(labels == BoundaryLabel.DIRICHLET, sigma, 0.0)
            g_d = pc.dirichlet(r.points)
            if pc.neumann is not None:
                g_n = pc.neumann(r.points)
            elif pc.exact_grad is not None:
                g_n = np.einsum("pi,pij,pj->p", n, a, pc.exact_grad(r.points))
            else:
                g_n = np.zeros(len(r))
            boundary.append(BoundaryFace(k, tag, r.points, r.weights, n, phi, dphi, a, pc.wind(r.points), labels,
                                         sigma, g_d, g_n))
        self._face_cache[extra] = (interior, boundary)
        return interior, boundary

    def sigma_is_zero(self):
        interior, boundary = self.face_data()
        return all(not np.any(f.sigma) for f in interior) and all(not np.any(f.sigma) for f in boundary)


# --- assembly -------------------------------------------------------------------


class _Triplets:
    def __init__(self, n):
        self.n = n
        self.rows, self.cols, self.vals = [], [], []

    def add(self, ri, ci, block):
        self.rows.append(np.repeat(ri, len(ci)))
        self.cols.append(np.tile(ci, len(ri)))
        self.vals.append(block.ravel())

    def tocsr(self):
        if not self.rows:
            return sp.csr_matrix((self.n, self.n))
        A = sp.coo_matrix((np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=(self.n, self.n))
        return A.tocsr()


def assemble_diffusion(disc):
    """Matrix of B_d: volume a grad u . grad v, penalty and symmetric consistency terms."""
    sp_ = disc.space
    T = _Triplets(sp_.ndofs)
    for e in disc.element_data():
        if not np.any(e.a):
            continue
        adphi = np.einsum("pij,pmj->pmi", e.a, e.dphi)
        T.add(sp_.dofs(e.k), sp_.dofs(e.k), np.einsum("p,pmi,pli->lm", e.w, adphi, e.dphi))
    interior, boundary = disc.face_data()
    for f in interior:
        if f.type_change or (not np.any(f.a1) and not np.any(f.a2)):
            continue
        sides = [(f.k, f.phi1, 0.5 * np.einsum("pij,pmj,pi->pm", f.a1, f.dphi1, f.n), 1.0),
                 (f.k2, f.phi2, 0.5 * np.einsum("pij,pmj,pi->pm", f.a2, f.dphi2, f.n), -1.0)]
        for kt, vt, ft, st in sides:
            for ks, us, fs, ss in sides:
                blk = np.einsum("p,pm,pl->lm", f.w * f.sigma * ss * st, us, vt)
                blk -= np.einsum("p,pm,pl->lm", f.w * st, fs, vt)
                blk -= np.einsum("p,pl,pm->lm", f.w * ss, ft, us)
                T.add(sp_.dofs(kt), sp_.dofs(ks), blk)
    for f in boundary:
        d = f.labels == BoundaryLabel.DIRICHLET
        if not d.any() or not np.any(f.a[d]):
            continue
        w = f.w * d
        flux = np.einsum("pij,pmj,pi->pm", f.a, f.dphi, f.n)
        blk = np.einsum("p,pm,pl->lm", w * f.sigma, f.phi, f.phi)
        blk -= np.einsum("p,pm,pl->lm", w, flux, f.phi)
        blk -= np.einsum("p,pl,pm->lm", w, flux, f.phi)
        T.add(sp_.dofs(f.k), sp_.dofs(f.k), blk)
    return T.tocsr()


def assemble_advection_reaction(disc):
    """Matrix of B_ar: b.grad u + (div b + c) u with upwind face fluxes."""
    sp_ = disc.space
    T = _Triplets(sp_.ndofs)
    for e in disc.element_data():
        bgrad = np.einsum("pi,pmi->pm", e.b, e.dphi)
        blk = np.einsum("p,pm,pl->lm", e.w, bgrad + (e.divb + e.c)[:, None] * e.phi, e.phi)
        T.add(sp_.dofs(e.k), sp_.dofs(e.k), blk)
    interior, boundary = disc.face_data()
    for f in interior:
        bn = np.einsum("pi,pi->p", f.b, f.n)
        in1 = np.where(bn < 0, -bn, 0.0) * f.w  # inflow into k: -(b.n_k) > 0
        in2 = np.where(bn > 0, bn, 0.0) * f.w  # inflow into k2: -(b.n_k2) = b.n_k > 0
        d1, d2 = sp_.dofs(f.k), sp_.dofs(f.k2)
        # -(b.n)(u_self - u_other) v_self on the inflow part of each element
        T.add(d1, d1, np.einsum("p,pm,pl->lm", in1, f.phi1, f.phi1))
        T.add(d1, d2, -np.einsum("p,pm,pl->lm", in1, f.phi2, f.phi1))
        T.add(d2, d2, np.einsum("p,pm,pl->lm", in2, f.phi2, f.phi2))
        T.add(d2, d1, -np.einsum("p,pm,pl->lm", in2, f.phi1, f.phi2))
    for f in boundary:
        bn = np.einsum("pi,pi->p", f.b, f.n)
        w = np.where(bn < 0, -bn, 0.0) * f.w
        if np.any(w):
            T.add(sp_.dofs(f.k), sp_.dofs(f.k), np.einsum("p,pm,pl->lm", w, f.phi, f.phi))
    return T.tocsr()


def assemble_rhs(disc):
    """Load vector: source, upwinded inflow data, weak Dirichlet and Neumann data."""
    sp_ = disc.space
    rhs = np.zeros(sp_.ndofs)
    for e in disc.element_data():
        rhs[sp_.dofs(e.k)] += e.phi.T @ (e.w * e.f)
    _, boundary = disc.face_data()
    for f in boundary:
        bn = np.einsum("pi,pi->p", f.b, f.n)
        dofs = sp_.dofs(f.k)
        inflow = bn < 0
        rhs[dofs] += f.phi.T @ (f.w * np.where(inflow, -bn, 0.0) * f.g_d)
        d = f.labels == BoundaryLabel.DIRICHLET
        if d.any():
            flux = np.einsum("pij,pmj,pi->pm", f.a, f.dphi, f.n)
            rhs[dofs] -= (flux - f.sigma[:, None] * f.phi).T @ (f.w * d * f.g_d)
        nm = f.labels == BoundaryLabel.NEUMANN
        if nm.any():
            rhs[dofs] += f.phi.T @ (f.w * nm * f.g_n)
    return rhs


def assemble(disc):
    A = assemble_advection_reaction(disc) + assemble_diffusion(disc)
    A.sum_duplicates()
    return LinearSystem(A.tocsr(), assemble_rhs(disc), disc.space.dof_map)


def block_jacobi(A, dof_map):
    blocks = [np.linalg.inv(A[s, s].toarray()) for s in dof_map]
    Minv = sp.block_diag(blocks, format="csr")
    return spla.LinearOperator(A.shape, matvec=lambda x: Minv @ x)


def solve(system, method="lu", tol=1e-10):
    """Sparse LU solve; falls back to block-Jacobi GMRES(50) when LU fails."""
    A, b = system.matrix.tocsc(), system.rhs
    bnorm = np.linalg.norm(b) or 1.0
    if method == "lu":
        try:
            x = spla.splu(A).solve(b)
            res = np.linalg.norm(A @ x - b) / bnorm
            system.info.update(method="lu", residual=float(res))
            if np.all(np.isfinite(x)) and res < 1e-8:
                return x
            log.warning("LU residual %.2e too large; trying GMRES", res)
        except RuntimeError as err:
            log.warning("LU failed (%s); trying GMRES", err)
    M = block_jacobi(A.tocsr(), system.dof_map)
    x, info = spla.gmres(A, b, M=M, restart=50, maxiter=2000, rtol=tol, atol=0.0)
    res = np.linalg.norm(A @ x - b) / bnorm
    system.info.update(method="gmres", residual=float(res), gmres_info=int(info))
    if info != 0 or not np.all(np.isfinite(x)):
        try:
            cond = np.linalg.cond(A.toarray()) if A.shape[0] <= 3000 else float("nan")
        except np.linalg.LinAlgError:
            cond = float("inf")
        raise SolverError(f"linear solve failed (gmres info {info}, residual {res:.2e}, cond {cond:.2e})")
    return x


def dump_matrix_market(system, path):
    from scipy.io import mmwrite

    mmwrite(str(path), system.matrix, comment="dG system matrix")
