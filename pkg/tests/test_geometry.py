import numpy as np
import pytest
import scipy.sparse.csgraph as csg
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease.curves import Circle, GeometryError
from dgease.geometry import (
    AssumptionViolation,
    BackgroundMesh,
    agglomerate,
    build_face_groups,
    dual_graph,
    fit_curved_boundary,
    partition_graph,
    polygon_element,
    select_star_point,
)
from dgease.geometry.io import load_mesh, mesh_from_dict, mesh_to_dict, save_mesh
from dgease.geometry.meshes import (
    annulus_mesh,
    disc_element,
    interface_rectangles,
    l_shape_element,
    random_convex_polygon,
    sawtooth_element,
    shape_battery,
    structured_rectangle,
    unit_square_element,
    wavy_square_mesh,
    wavy_square_with_holes,
)
from dgease.geometry.polymesh import cells_as_elements, grouped_mesh


def test_background_checks():
    bg = structured_rectangle(3, 2)
    assert bg.check()
    assert bg.n_cells == 12
    assert bg.area() == pytest.approx(1.0)
    nb = bg.neighbors()
    assert (nb < 0).sum() == 10
    bad = BackgroundMesh(bg.vertices, bg.triangles, {})
    with pytest.raises(GeometryError):
        bad.check()


def test_clockwise_triangles_are_flipped():
    bg = BackgroundMesh([[0, 0], [1, 0], [0, 1]], [[0, 2, 1]])
    assert bg.signed_areas()[0] > 0


def test_nonconforming_rejected():
    v = [[0, 0], [1, 0], [0, 1], [1, 1], [0.5, -1]]
    bg = BackgroundMesh(v, [[0, 1, 2], [1, 3, 2], [0, 4, 1], [0, 1, 3]])
    with pytest.raises(GeometryError):
        bg.neighbors()


@pytest.mark.parametrize("n_theta,n_r", [(15, 2), (30, 4)])
def test_annulus_area(n_theta, n_r):
    bg = annulus_mesh(n_theta, n_r)
    bg.check()
    assert bg.area() == pytest.approx(np.pi * (1 - 0.16), rel=1e-10)


def test_fit_curved_boundary():
    bg = structured_rectangle(8, 8, -0.7, 0.7, -0.7, 0.7)
    fitted = fit_curved_boundary(bg, Circle((0, 0), 1.0))
    assert len(fitted.curved) == 32
    # the rectangle corners move onto the circle
    bverts = np.unique(np.array(list(fitted.boundary)).ravel())
    np.testing.assert_allclose(np.hypot(*fitted.vertices[bverts].T), 1.0, atol=1e-10)


def test_wavy_meshes():
    bg = wavy_square_mesh(20)
    bg.check()
    assert bg.area() == pytest.approx(1.0, abs=1e-3)
    holes = wavy_square_with_holes(40)
    holes.check()
    assert holes.area() < bg.area()
    assert any(lab.startswith("hole") for lab in holes.boundary.values())


def test_interface_rectangles():
    bg, labels = interface_rectangles()
    assert set(np.unique(bg.cell_region)) == {1, 2}
    assert labels.max() + 1 == 64
    with pytest.raises(GeometryError):
        interface_rectangles(8, 0.025, 3.0)


@pytest.mark.parametrize("n_parts", [1, 4, 13, 50])
def test_partition_connected(n_parts):
    bg = structured_rectangle(10, 10)
    A = dual_graph(bg)
    labels = partition_graph(A, n_parts, seed=1)
    assert labels.min() == 0
    for k in range(labels.max() + 1):
        sel = np.nonzero(labels == k)[0]
        n_comp, _ = csg.connected_components(A[sel][:, sel], directed=False)
        assert n_comp == 1


def test_partition_deterministic():
    A = dual_graph(structured_rectangle(12, 12))
    np.testing.assert_array_equal(partition_graph(A, 9, seed=3), partition_graph(A, 9, seed=3))
    with pytest.raises(ValueError):
        partition_graph(A, 0)


def test_agglomerate_covers_domain(square_mesh):
    assert square_mesh.n_elements == 8
    assert square_mesh.total_area() == pytest.approx(1.0)
    # every interface is seen by both elements with matching lengths
    for f in square_mesh.interfaces:
        K, K2 = square_mesh.elements[f.k], square_mesh.elements[f.k2]
        l1 = sum(K.segments[i].length for i in f.segs)
        l2 = sum(K2.segments[i].length for i in f.segs2)
        assert l1 == pytest.approx(l2)


@given(st.integers(3, 12), st.integers(0, 50))
@settings(max_examples=20, deadline=None)
def test_convex_polygon_groups(n, seed):
    K = random_convex_polygon(n, seed)
    groups = build_face_groups(K, star="centroid")
    assert len(groups) == len(K.segments)
    assert all(g.min_m_dot_n > 0 for g in groups)
    # cones partition the element
    assert sum(g.area_KFi for g in groups) == pytest.approx(K.area, rel=1e-10)


def test_unit_square_metrics():
    K = unit_square_element()
    assert K.area == pytest.approx(1.0)
    assert K.h == pytest.approx(np.sqrt(2))
    assert K.rho == pytest.approx(0.5, rel=1e-3)
    x0, val = select_star_point(K, [0])
    assert val > 0.5 - 1e-9


def test_disc_and_l_shape():
    D = disc_element(0.5)
    assert D.rho == 0.5 and D.is_disc()
    assert D.area == pytest.approx(np.pi / 4, rel=1e-10)
    L = l_shape_element()
    groups = build_face_groups(L)
    assert all(g.min_m_dot_n > 0 for g in groups)


def test_sawtooth_groups_split_or_fit():
    K = sawtooth_element(16)
    groups = build_face_groups(K)
    covered = sorted(i for g in groups for i in g.segments)
    assert covered == list(range(len(K.segments)))
    assert min(g.min_m_dot_n for g in groups) > 0


def test_assumption_violation_and_force():
    # a thin spiral-like notch seen from nowhere: centroid method on a non-star L shape face run
    pts = [(0, 0), (3, 0), (3, 3), (2.9, 3), (2.9, 0.1), (0.1, 0.1), (0.1, 3), (0, 3)]
    keys = [("boundary", "x")] * len(pts)
    K = polygon_element(pts, keys)
    with pytest.raises(AssumptionViolation):
        build_face_groups(K, star="centroid")
    K2 = polygon_element(pts, keys)
    groups = build_face_groups(K2, star="centroid", force=True)
    assert "assumption-violating" in K2.flags and any(g.forced for g in groups)


def test_battery_shapes_build():
    shapes = shape_battery()
    assert len(shapes) == 7
    for K in shapes.values():
        build_face_groups(K)
        assert K.face_groups and K.area > 0


def test_mesh_json_roundtrip(tmp_path, square_mesh):
    path = tmp_path / "m.json"
    save_mesh(square_mesh, path)
    back = load_mesh(path)
    assert back.n_elements == square_mesh.n_elements
    for K, K2 in zip(square_mesh.elements, back.elements):
        assert [g.segments for g in K.face_groups] == [g.segments for g in K2.face_groups]
        assert [g.min_m_dot_n for g in K.face_groups] == pytest.approx([g.min_m_dot_n for g in K2.face_groups])
    d = mesh_to_dict(square_mesh)
    assert {"vertices", "triangles", "boundary", "elements"} <= set(d)
    assert {"segments", "star_point", "min_m_dot_n"} <= set(d["elements"][0]["face_groups"][0])
    regrouped = mesh_from_dict(d, regroup=True)
    assert regrouped.n_elements == 8


def test_mesh_json_curved(tmp_path):
    m = cells_as_elements(annulus_mesh(15, 2))
    save_mesh(m, tmp_path / "a.json")
    back = load_mesh(tmp_path / "a.json")
    assert back.total_area() == pytest.approx(m.total_area(), rel=1e-12)


def test_mesh_json_missing_fields():
    with pytest.raises(GeometryError):
        mesh_from_dict({"vertices": [[0, 0]]})


def test_grouped_mesh_regions():
    bg, labels = interface_rectangles()
    m = grouped_mesh(bg, labels)
    assert m.n_elements == 64
    assert {K.region for K in m.elements} == {1, 2}
    assert m.total_area() == pytest.approx(4.0, rel=1e-10)


def test_agglomerate_splits_regions():
    bg, _ = interface_rectangles()
    m = agglomerate(bg, 4)
    for K in m.elements:
        assert np.unique(bg.cell_region[K.cells]).size == 1
