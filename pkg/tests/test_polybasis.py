import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease.geometry.meshes import annulus_sector_element, random_convex_polygon, unit_square_element
from dgease.polybasis import DegenerateElementError, ElementBasis, build_basis, dim_p, l2_projection, monomial_indices
from dgease.quadrature import QuadRule

SHAPES = {"square": unit_square_element, "octagon": lambda: random_convex_polygon(8, 3), "sector": annulus_sector_element}


@pytest.mark.parametrize("p", range(0, 9))
def test_dims(p):
    assert dim_p(p) == (p + 1) * (p + 2) // 2 == len(monomial_indices(p))


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("p", [0, 1, 3, 6])
def test_orthonormal(shape, p):
    K = SHAPES[shape]()
    r = K.rule(2 * p + 2)
    b = build_basis(p, K.bbox, r)
    phi = b.eval(r.points)
    np.testing.assert_allclose(phi.T @ (r.weights[:, None] * phi), np.eye(b.dim), atol=1e-10)


@pytest.mark.parametrize("frame", ["principal", "bbox"])
def test_gradients_match_finite_differences(frame):
    K = random_convex_polygon(8, 1)
    b = build_basis(4, K.bbox, K.rule(10), frame=frame)
    x = np.array([[0.1, -0.2], [0.3, 0.4]])
    h = 1e-6
    g = b.eval_grad(x)
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (b.eval(x + e) - b.eval(x - e)) / (2 * h)
        np.testing.assert_allclose(g[:, :, k], fd, atol=1e-5)
    v, g2 = b.eval_both(x)
    np.testing.assert_allclose(v, b.eval(x))
    np.testing.assert_allclose(g2, g)


@given(st.lists(st.floats(-1, 1), min_size=6, max_size=6))
@settings(max_examples=30, deadline=None)
def test_projection_reproduces_quadratics(c):
    K = unit_square_element()
    r = K.rule(6)
    b = build_basis(2, K.bbox, r)
    x, y = r.points.T
    vals = c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x ** 2 + c[5] * y ** 2
    coef = l2_projection(b, r, vals)
    np.testing.assert_allclose(b.eval(r.points) @ coef, vals, atol=1e-10)


def test_degenerate_element_rejected():
    # three points cannot support the six quadratics
    rule = QuadRule(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.ones(3) / 6, 1)
    with pytest.raises(DegenerateElementError):
        build_basis(2, np.array([[0, 0], [1, 1]]), rule)


def test_raw_basis_is_legendre_on_box():
    b = ElementBasis(2, [[-1, -1], [1, 1]])
    v = b.eval(np.array([[0.5, 0.0]]))
    # index order follows monomial_indices; P2(0.5) = -0.125
    idx = monomial_indices(2).index((2, 0))
    assert v[0, idx] == pytest.approx(-0.125)
