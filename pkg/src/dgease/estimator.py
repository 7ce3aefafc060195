"""scikit-learn style front end: fit assembles and solves, predict evaluates u_h."""
from __future__ import annotations

import numpy as np
import shapely
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import analysis as A
from .assembly import Discretization, assemble, dump_matrix_market, solve
from .problem import ProblemSpec, builtin_problem


class DGEASESolver(BaseEstimator):
    """Interior-penalty dG solver on a PolyMesh.

    Parameters mirror the run flags: polynomial degree, streamline-norm
    scaling used in error reports, linear solver and its tolerance, and an
    optional MatrixMarket path for the assembled matrix.
    """

    def __init__(self, degree=1, snorm_scale=1.0, method="lu", tol=1e-10, dump_system=None):
        self.degree = degree
        self.snorm_scale = snorm_scale
        self.method = method
        self.tol = tol
        self.dump_system = dump_system

    def fit(self, mesh, problem):
        if isinstance(problem, str):
            problem = builtin_problem(problem)
        if not isinstance(problem, ProblemSpec):
            raise TypeError("problem must be a ProblemSpec or the name of a built-in problem")
        if int(self.degree) < 0:
            raise ValueError("degree must be nonnegative")
        self.discretization_ = Discretization(mesh, problem, degree=int(self.degree), snorm_scale=self.snorm_scale)
        self.system_ = assemble(self.discretization_)
        if self.dump_system:
            dump_matrix_market(self.system_, self.dump_system)
        self.coef_ = solve(self.system_, method=self.method, tol=self.tol)
        self.n_dofs_ = self.discretization_.space.ndofs
        self._tree = shapely.STRtree([K.polygon for K in mesh.elements])
        return self

    def locate(self, points):
        """Element index of each point (-1 outside the mesh); ties go to the lowest index."""
        check_is_fitted(self, "coef_")
        X = check_array(points, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {X.shape}")
        src, idx = self._tree.query(shapely.points(X), predicate="intersects")
        owner = np.full(len(X), -1, dtype=np.int64)
        order = np.lexsort((idx, src))
        src, idx = src[order], idx[order]
        first = np.ones(len(src), dtype=bool)
        first[1:] = src[1:] != src[:-1]
        owner[src[first]] = idx[first]
        return owner

    def predict(self, points):
        """u_h at the given points; NaN outside the mesh."""
        X = check_array(points, dtype=float)
        owner = self.locate(X)
        out = np.full(len(X), np.nan)
        fn = A.discrete_function(self.discretization_, self.coef_)
        for k in np.unique(owner[owner >= 0]):
            sel = owner == k
            out[sel] = fn(int(k), X[sel])[0]
        return out

    def error_report(self):
        """L2, dG and streamline-norm errors against the problem's exact solution."""
        check_is_fitted(self, "coef_")
        return A.error_report(self.discretization_, self.coef_)
