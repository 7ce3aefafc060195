import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease import verify as V
from dgease.assembly import Discretization
from dgease.geometry import build_face_groups
from dgease.geometry.meshes import disc_element, unit_square_element
from dgease.problem import example2


def test_generalized_eigs():
    A_ = np.diag([1.0, 4.0])
    B_ = np.diag([1.0, 2.0])
    assert V.max_gen_eig(A_, B_) == pytest.approx(2.0)
    assert V.min_gen_eig(A_, B_) == pytest.approx(1.0)


def test_report_ratio():
    r = V.report("x", "s", 1, 2.0, 4.0, "eigen")
    assert r.ratio == 0.5 and r.ok
    assert not V.report("x", "s", 1, 5.0, 4.0, "eigen").ok
    assert V.report("x", "s", 1, 0.0, 0.0, "eigen").ok


def test_unit_square_sharp_values():
    K = unit_square_element()
    build_face_groups(K, star="centroid")
    # linear functions: max ||grad v||^2 / ||v||^2 is 12, attained by x - 1/2
    assert V.rayleigh_h1l2(K, 1) == pytest.approx(12.0, rel=1e-10)
    assert V.rayleigh_h1l2(K, 0) == 0.0
    cone, elem = V.rayleigh_trace(K, K.face_groups[0], 0)
    assert elem == pytest.approx(1.0)
    assert cone == pytest.approx(4.0)


def test_disc_h1l2_within_bound():
    K = disc_element(1.0)
    for p in (1, 2, 3):
        assert V.rayleigh_h1l2(K, p) <= 9 * p * (p + 1) ** 2 * (p + 2)


@pytest.mark.parametrize("p", [0, 1, 2, 3])
def test_battery_subset(p):
    from dgease.geometry.meshes import shape_battery

    shapes = {k: v for k, v in shape_battery().items() if k in ("unit_square", "l_shape", "unit_disc")}
    reps = V.run_battery(shapes, pmax=p, pmin=p)
    assert reps and all(r.ok for r in reps)
    kinds = {r.inequality for r in reps}
    assert {"trace", "trace_cone"} <= kinds
    if p >= 1:
        assert {"h1l2", "linf_l2", "h1l2_disc"} <= kinds


def test_write_reports(tmp_path):
    reps = [V.report("trace", "sq", 1, 1.0, 2.0, "eigen")]
    path = tmp_path / "v.csv"
    V.write_reports(path, reps)
    text = path.read_text().splitlines()
    assert text[0].startswith("inequality,shape,p") and text[1].endswith("True")


def test_sample_inside():
    K = disc_element(1.0)
    x = V.sample_inside(K, 200, seed=1)
    assert x.shape == (200, 2) and np.all(np.hypot(*x.T) <= 1.0 + 1e-12)


@given(st.integers(1, 4), st.sampled_from(["unit_square", "curved_prism"]))
@settings(max_examples=8, deadline=None)
def test_strip_perturbation(p, shape):
    probe, eig = V.strip_perturbation_check(shape, p, n_probes=100)
    assert eig >= 0.5 and probe >= eig - 1e-12


def test_strip_wide_strip_fails():
    # removing most of the height must break the half bound
    probe, eig = V.strip_perturbation_check("unit_square", 3, eps=0.9)
    assert eig < 0.5


def test_graph_prism_rule_area():
    r = V.graph_prism_rule(V.PRISM_SHAPES["curved_prism"], 6)
    assert r.weights.sum() == pytest.approx(1.0 + 0.4 / np.pi, rel=1e-10)


def test_coercivity_and_infsup(square_mesh):
    disc = Discretization(square_mesh, example2(), degree=1)
    res = V.coercivity_continuity_check(disc, n_probes=100)
    assert res["coercivity_eigen"] >= 0.5 - 1e-8
    assert res["coercivity_probe"] >= res["coercivity_eigen"] - 1e-10
    assert res["continuity_probe"] <= res["continuity_eigen"] + 1e-10 <= 2 + 1e-8
    assert 0 < V.infsup_estimate(disc) <= 1.0 + 1e-8
