"""Physical-frame total-degree polynomial bases, orthonormal on each element."""
from __future__ import annotations

import numpy as np


class DegenerateElementError(RuntimeError):
    pass


def dim_p(p, d=2):
    """dim P_p in d = 2 dimensions."""
    return (p + 1) * (p + 2) // 2


def monomial_indices(p):
    """Exponent pairs (i, j) with i + j <= p, ordered by total degree."""
    return [(k - j, j) for k in range(p + 1) for j in range(k + 1)]


def legendre_table(x, p):
    """Legendre values and derivatives P_k(x), P_k'(x) for k = 0..p."""
    x = np.asarray(x, dtype=float)
    P = np.zeros((p + 1,) + x.shape)
    dP = np.zeros_like(P)
    P[0] = 1.0
    if p >= 1:
        P[1] = x
        dP[1] = 1.0
    for k in range(1, p):
        P[k + 1] = ((2 * k + 1) * x * P[k] - k * P[k - 1]) / (k + 1)
        dP[k + 1] = dP[k - 1] + (2 * k + 1) * P[k]
    return P, dP


class ElementBasis:
    """Orthonormalized basis of P_p(K) built on box-scaled Legendre products.

    The raw basis L_ij(x) = P_i(xi_1) P_j(xi_2) with xi = R^T (x - center)
    scaled onto [-1, 1]^2, where the box is given in the rotated frame R
    (identity: the bounding box).  The orthonormal functions are `raw @ coeffs`.
    """

    def __init__(self, degree, bbox, coeffs=None, rotation=None):
        self.degree = int(degree)
        self.bbox = np.asarray(bbox, dtype=float).reshape(2, 2)
        self.rotation = np.eye(2) if rotation is None else np.asarray(rotation, dtype=float)
        self.index = monomial_indices(self.degree)
        self.dim = len(self.index)
        self.coeffs = np.eye(self.dim) if coeffs is None else np.asarray(coeffs)
        lo, hi = self.bbox
        self._center = 0.5 * (lo + hi)
        self._scale = 2.0 / (hi - lo)

    def _raw(self, x, grad=False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        xi = (x @ self.rotation - self._center) * self._scale
        P1, dP1 = legendre_table(xi[:, 0], self.degree)
        P2, dP2 = legendre_table(xi[:, 1], self.degree)
        I = np.array([i for i, _ in self.index])
        J = np.array([j for _, j in self.index])
        V = (P1[I] * P2[J]).T
        if not grad:
            return V
        G = np.stack([(dP1[I] * P2[J]).T * self._scale[0], (P1[I] * dP2[J]).T * self._scale[1]], axis=-1)
        return V, G @ self.rotation.T

    def eval(self, x):
        """Basis values, shape (n_points, dim)."""
        return self._raw(x) @ self.coeffs

    def eval_grad(self, x):
        """Basis gradients, shape (n_points, dim, 2)."""
        _, G = self._raw(x, grad=True)
        return np.einsum("nrk,rs->nsk", G, self.coeffs)

    def eval_both(self, x):
        V, G = self._raw(x, grad=True)
        return V @ self.coeffs, np.einsum("nrk,rs->nsk", G, self.coeffs)


def principal_frame(rule):
    """Rotation to the principal axes of K and the box of the quadrature points in that frame."""
    w, x = rule.weights, rule.points
    c = w @ x / w.sum()
    d = x - c
    _, R = np.linalg.eigh((w[:, None] * d).T @ d)
    y = x @ R
    return np.array([y.min(axis=0), y.max(axis=0)]), R


def build_basis(degree, bbox, rule, cond_max=1e14, frame="principal"):
    """Orthonormalize the box Legendre basis in L2(K) with modified Gram-Schmidt.

    `rule` must integrate polynomials of degree 2*degree exactly on K.  With
    frame="principal" the box is aligned with the principal axes of K, which
    keeps the Gram matrix well conditioned on thin slanted elements.  One
    reorthogonalization pass is applied.
    """
    if frame == "principal" and degree > 0:
        box, R = principal_frame(rule)
        basis = ElementBasis(degree, box, rotation=R)
    else:
        basis = ElementBasis(degree, bbox)
    V = basis._raw(rule.points)
    w = rule.weights
    G = V.T @ (w[:, None] * V)
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 0 or ev[-1] / ev[0] > cond_max:
        raise DegenerateElementError(f"element Gram matrix is numerically singular (eigenvalues {ev[0]:.3e}..{ev[-1]:.3e})")
    m = basis.dim
    Q = V.copy()
    C = np.eye(m)
    for k in range(m):
        for _ in range(2):
            for j in range(k):
                r = np.dot(w * Q[:, j], Q[:, k])
                Q[:, k] -= r * Q[:, j]
                C[:, k] -= r * C[:, j]
        nrm = np.sqrt(np.dot(w * Q[:, k], Q[:, k]))
        Q[:, k] /= nrm
        C[:, k] /= nrm
    basis.coeffs = C
    return basis


def l2_projection(basis, rule, values):
    """Coefficients of the L2(K) projection of sampled values onto an orthonormal basis."""
    return basis.eval(rule.points).T @ (rule.weights * values)
