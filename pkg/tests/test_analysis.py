import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease import analysis as A
from dgease.assembly import Discretization, assemble, solve
from dgease.problem import example2


@given(st.floats(0.5, 6.0), st.floats(1e-3, 10.0), st.floats(1.2, 4.0))
@settings(max_examples=50)
def test_eoc_of_power_law(rate, c, ratio):
    hs = [0.5, 0.5 / ratio, 0.5 / ratio ** 2]
    eoc = A.eoc_table([(h, c * h ** rate) for h in hs])
    assert eoc == pytest.approx([rate, rate], rel=1e-9)


def test_eoc_edge_cases():
    assert A.eoc_table([(1.0, 0.0), (0.5, 0.0)]) == ["exact"]
    with pytest.raises(ValueError):
        A.eoc_table([(1.0, 1.0)])


@given(st.floats(-2.0, -0.05), st.floats(-5, 5))
@settings(max_examples=30)
def test_exp_fit_exact(slope, icpt):
    dofs = np.array([3, 6, 10, 15, 21, 28]) * 16
    errs = np.exp(icpt + slope * np.sqrt(dofs))
    s, b, r2 = A.exp_fit(dofs, errs)
    assert s == pytest.approx(slope, rel=1e-8)
    assert r2 == pytest.approx(1.0)


@pytest.fixture(scope="module")
def solved(square_mesh):
    disc = Discretization(square_mesh, example2(), degree=1)
    return disc, solve(assemble(disc))


def test_norm_matrices_match_components(solved):
    disc, _ = solved
    rng = np.random.default_rng(1)
    w = rng.standard_normal(disc.space.ndofs)
    comps = A.norm_components(disc, A.discrete_function(disc, w), lambdas=disc.lambdas)
    mats = A.norm_matrices(disc)
    for k in A.COMPONENTS:
        assert w @ mats[k] @ w == pytest.approx(comps[k], rel=1e-9, abs=1e-13)
    assert A.dg_norm(comps) ** 2 == pytest.approx(w @ A.dg_matrix(mats) @ w, rel=1e-9)
    assert A.s_norm(comps) >= A.dg_norm(comps)


def test_error_report(solved):
    disc, u = solved
    r = A.error_report(disc, u)
    assert 0 < r.l2_error < r.dg_error <= r.s_error
    assert r.h_eff == pytest.approx(math.sqrt(1.0 / 8))
    row = r.as_row()
    assert "streamline" in row and "components" not in row
    umax, finite = A.max_abs_discrete(disc, u)
    assert finite and 0.5 < umax < 1.5


def _report(p, n, l2, dg):
    return A.ErrorReport(p, n, 3 * n, 1 / math.sqrt(n), 1 / math.sqrt(n), l2, dg, dg, {})


def test_csv_rows_and_file(tmp_path):
    reps = [_report(1, 16, 1e-2, 1e-1), _report(1, 64, 2.5e-3, 5e-2), _report(2, 16, 1e-3, 1e-2)]
    rows = A.csv_rows("run", reps)
    assert rows[0]["eoc_l2"] == "" and rows[2]["eoc_l2"] == ""
    assert rows[1]["eoc_l2"] == pytest.approx(2.0) and rows[1]["eoc_dg"] == pytest.approx(1.0)
    path = tmp_path / "r.csv"
    A.write_csv(path, rows)
    with open(path) as fh:
        back = list(csv.DictReader(fh))
    assert tuple(back[0]) == A.CSV_COLUMNS
    assert float(back[1]["eoc_l2"]) == pytest.approx(2.0)


@pytest.mark.parametrize("x", ["h", "sqrt_dofs"])
def test_plot(tmp_path, x):
    path = tmp_path / f"{x}.svg"
    A.plot_convergence(path, [_report(1, 16, 1e-2, 1e-1), _report(1, 64, 2.5e-3, 5e-2)], x=x, title="t")
    assert path.read_text().lstrip().startswith("<?xml")


def test_error_report_needs_exact(square_mesh):
    from dgease.problem import example3

    disc = Discretization(square_mesh, example3(), degree=1)
    with pytest.raises(ValueError):
        A.error_report(disc, np.zeros(disc.space.ndofs))
