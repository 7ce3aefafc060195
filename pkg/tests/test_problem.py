import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease.problem import (
    BoundaryLabel,
    ConfigError,
    ProblemDataError,
    X1,
    X2,
    builtin_problem,
    c0_squared,
    check_semidefinite,
    classify_boundary,
    classify_boundary_point,
    example2,
    example3,
    example4,
    parse_expression,
    problem_from_config,
    symbolic_problem,
)


@pytest.mark.parametrize("text,expected", [
    ("x1^2 + 2*x2", X1 ** 2 + 2 * X2),
    ("sin(pi*x1)*exp(-x2)", sympy.sin(sympy.pi * X1) * sympy.exp(-X2)),
    ("-e / 2", -sympy.E / 2),
    ("cos(x1) - 1.5", sympy.cos(X1) - 1.5),
])
def test_parse_expression(text, expected):
    assert sympy.simplify(parse_expression(text) - expected) == 0


@pytest.mark.parametrize("text", ["__import__('os')", "x3", "log(x1)", "x1.real", "[1, 2]", "lambda: 1", "sin(x1, x2)"])
def test_parse_rejects(text):
    with pytest.raises(ConfigError):
        parse_expression(text)


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=25, deadline=None)
def test_manufactured_source(x, y):
    spec = example2()
    pt = np.array([[x, y]])
    u = np.sin(np.pi * x) * np.sin(np.pi * y)
    lap = -2 * np.pi ** 2 * u
    ux = np.pi * np.cos(np.pi * x) * np.sin(np.pi * y)
    uy = np.pi * np.sin(np.pi * x) * np.cos(np.pi * y)
    # -eps lap u + div(b u) + c u with b = (1 - x2, 1 - x1), div b = 0
    f = -0.01 * lap + (1 - y) * ux + (1 - x) * uy + 2 * u
    assert spec.source(pt)[0] == pytest.approx(f, abs=1e-10)
    np.testing.assert_allclose(spec.exact_grad(pt)[0], [ux, uy], atol=1e-12)


def test_boundary_classification():
    spec = example3(0.0)
    x = np.array([[0.5, 0.0], [1.0, 0.5]])
    n = np.array([[0.0, -1.0], [1.0, 0.0]])
    assert list(classify_boundary(x, n, spec, ["b", "b"])) == [BoundaryLabel.INFLOW, BoundaryLabel.OUTFLOW]
    ell = example3(1e-4)
    assert classify_boundary_point(x[0], n[0], ell) == BoundaryLabel.DIRICHLET


def test_neumann_inflow_rejected():
    spec = problem_from_config({"diffusion": "1", "wind": ["1", "0"], "reaction": "1", "exact": "x1",
                                "boundary": {"left": "neumann"}})
    with pytest.raises(ProblemDataError):
        classify_boundary(np.array([[0.0, 0.5]]), np.array([[-1.0, 0.0]]), spec, ["left"])
    # outflow Neumann is fine
    lab = classify_boundary(np.array([[1.0, 0.5]]), np.array([[1.0, 0.0]]), spec, ["left"])
    assert lab[0] == BoundaryLabel.NEUMANN


def test_c0_check():
    spec = symbolic_problem("bad", sympy.eye(2), [X1, 0], -1, exact=X1, gamma0=0.1)
    with pytest.raises(ProblemDataError):
        c0_squared(np.array([[0.0, 0.0]]), spec)
    assert c0_squared(np.array([[0.0, 0.0]]), example2())[0] == pytest.approx(2.0)


def test_semidefinite_check():
    spec = symbolic_problem("neg", -sympy.eye(2), [0, 0], 1, exact=X1)
    with pytest.raises(ProblemDataError):
        check_semidefinite(spec, np.zeros((1, 2)))


def test_example4_pieces_agree_on_interface():
    spec = example4()
    x1 = np.linspace(-1, 1, 9)
    pts = np.column_stack([x1, 0.025 * np.sin(8 * np.pi * x1)])
    u1 = spec.piece(1).exact(pts)
    u2 = spec.piece(2).exact(pts)
    # the two pieces differ away from x1 = 0 but both are smooth; check they satisfy
    # their own transport equations through the manufactured source being zero
    for k in (1, 2):
        np.testing.assert_allclose(spec.piece(k).source(pts), 0.0, atol=1e-10)
    assert np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))


def test_config_builtin_and_errors():
    spec = problem_from_config({"builtin": "example2", "params": {"eps": 0.1}})
    assert spec.diffusion(np.zeros((1, 2)))[0, 0, 0] == pytest.approx(0.1)
    with pytest.raises(ConfigError):
        builtin_problem("example9")
    with pytest.raises(ConfigError):
        problem_from_config({"diffusion": "1", "boundary": {"x": "robin"}, "exact": "x1"})
    with pytest.raises(ConfigError):
        problem_from_config({"diffusion": "1"})


def test_config_varying_diffusion_warns():
    with pytest.warns(UserWarning):
        problem_from_config({"diffusion": "1 + x1^2", "exact": "x1"})
