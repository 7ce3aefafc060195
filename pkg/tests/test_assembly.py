import numpy as np
import pytest
import scipy.io
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease import analysis as A
from dgease.assembly import (
    MAX_ORDER,
    DGSpace,
    Discretization,
    assemble,
    assemble_advection_reaction,
    assemble_diffusion,
    dump_matrix_market,
    quadrature_order,
    solve,
)
from dgease.geometry.meshes import interface_rectangles
from dgease.geometry.polymesh import grouped_mesh
from dgease.polybasis import dim_p
from dgease.problem import example2, example3, example4, polynomial_problem, problem_from_config


@pytest.fixture(scope="module")
def disc2(square_mesh):
    return Discretization(square_mesh, example2(), degree=2)


@pytest.mark.parametrize("p,boost,extra,expected", [(1, 0, 0, 4), (3, 2, 2, 12), (12, 0, 0, 26), (14, 8, 0, 30),
                                                     (20, 0, 0, 42)])
def test_quadrature_order(p, boost, extra, expected):
    assert quadrature_order(p, boost, extra) == expected
    assert quadrature_order(p, boost, extra) <= max(MAX_ORDER, 2 * p + 2 + extra)


@pytest.mark.parametrize("p", [0, 1, 3])
def test_space_dofs(square_mesh, p):
    V = DGSpace(square_mesh, p)
    assert V.ndofs == square_mesh.n_elements * dim_p(p)
    np.testing.assert_array_equal(V.dofs(1), np.arange(dim_p(p), 2 * dim_p(p)))


def test_advection_energy_identity(disc2):
    """B_ar(w, w) equals the reaction plus upwind norm for any discrete w."""
    B = assemble_advection_reaction(disc2).tocsr()
    N = A.ar_matrix(A.norm_matrices(disc2))
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.standard_normal(B.shape[0])
        assert w @ B @ w == pytest.approx(w @ N @ w, rel=1e-10)


def test_diffusion_symmetric(disc2):
    D = assemble_diffusion(disc2).toarray()
    np.testing.assert_allclose(D, D.T, atol=1e-12 * np.abs(D).max())


@pytest.mark.parametrize("p", [2, 3])
def test_polynomial_exactness(square_mesh, p):
    disc = Discretization(square_mesh, polynomial_problem(), degree=p)
    u = solve(assemble(disc))
    r = A.error_report(disc, u)
    assert r.l2_error < 1e-10 and r.dg_error < 1e-9


def test_neumann_exactness(square_mesh):
    spec = problem_from_config({"diffusion": "1", "wind": ["1", "1"], "reaction": "1", "exact": "x1^2 + x2",
                                "gamma0": 1.0, "boundary": {"right": "neumann", "top": "neumann"}})
    disc = Discretization(square_mesh, spec, degree=2)
    u = solve(assemble(disc))
    assert A.error_report(disc, u).l2_error < 1e-10


def test_pure_transport_has_no_penalty(square_mesh):
    disc = Discretization(square_mesh, example3(0.0), degree=1)
    assert disc.sigma_is_zero()
    assert assemble_diffusion(disc).nnz == 0 or abs(assemble_diffusion(disc)).max() == 0
    u = solve(assemble(disc))
    assert np.all(np.isfinite(u))


def test_changing_type_interfaces():
    bg, labels = interface_rectangles()
    disc = Discretization(grouped_mesh(bg, labels), example4(), degree=1)
    interior, _ = disc.face_data()
    tc = [f for f in interior if f.type_change]
    assert len(tc) == 8
    assert all(np.all(f.sigma == 0) for f in tc)


def test_solver_paths(disc2, tmp_path):
    sys_ = assemble(disc2)
    x_lu = solve(sys_)
    x_it = solve(assemble(disc2), method="gmres", tol=1e-12)
    np.testing.assert_allclose(x_it, x_lu, atol=1e-7 * np.abs(x_lu).max())
    assert sys_.info["method"] == "lu"
    path = tmp_path / "A.mtx"
    dump_matrix_market(sys_, path)
    M = scipy.io.mmread(str(path)).tocsr()
    assert abs(M - sys_.matrix).max() == 0


def test_streamline_weights_positive(disc2):
    lam = disc2.lambdas
    assert lam.shape == (disc2.mesh.n_elements,)
    assert np.all(lam > 0)
    assert np.all(disc2.snorm_lambdas() > 0)


@given(st.floats(0.5, 4.0))
@settings(max_examples=5, deadline=None)
def test_snorm_scale(scale):
    from dgease.geometry.meshes import structured_rectangle
    from dgease.geometry.polymesh import cells_as_elements

    m = cells_as_elements(structured_rectangle(2, 2))
    d1 = Discretization(m, example2(), degree=1)
    d2 = Discretization(m, example2(), degree=1, snorm_scale=scale)
    np.testing.assert_allclose(d2.snorm_lambdas(), scale * d1.snorm_lambdas())
