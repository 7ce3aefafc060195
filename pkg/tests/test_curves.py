import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgease.curves import Circle, GeometryError, LevelSet, Segment, SineGraph, builtin_levelset, levelset_from_dict


@given(st.floats(-3, 3), st.floats(-3, 3))
@settings(max_examples=50, deadline=None)
def test_circle_projection(x, y):
    if np.hypot(x - 0.25, y - 0.25) < 1e-3:
        return
    phi = Circle((0.25, 0.25), 0.4)
    p = phi.project([[x, y]])
    assert abs(phi(p)[0]) < 1e-12


def test_sine_projection_and_grad():
    phi = SineGraph(axis=1, amp=0.025, freq=8.0)
    p = phi.project(np.array([[0.1, 0.3], [-0.7, -0.2]]))
    np.testing.assert_allclose(phi(p), 0.0, atol=1e-12)
    fd = LevelSet(func=phi.value)
    np.testing.assert_allclose(fd.grad(p), phi.grad(p), atol=1e-6)


@pytest.mark.parametrize("ls", [Circle((1, 2), 0.5, hole=True), SineGraph(0, 1.0, 0.03, 6.0, -1.0)])
def test_levelset_roundtrip(ls):
    back = levelset_from_dict(ls.to_dict())
    x = np.random.default_rng(0).random((5, 2))
    np.testing.assert_allclose(back(x), ls(x))


def test_unknown_levelsets():
    with pytest.raises(GeometryError):
        builtin_levelset("nope")
    with pytest.raises(GeometryError):
        levelset_from_dict({"kind": "ellipse"})


def test_builtin_levelsets():
    assert builtin_levelset("unit_disc")([[1.0, 0.0]])[0] == pytest.approx(0.0)
    assert builtin_levelset("offcenter_hole")([[0.65, 0.25]])[0] == pytest.approx(0.0)
    assert builtin_levelset("sine_interface_16").freq == 16.0


def test_arc_segment_geometry():
    phi = Circle((0.0, 0.0), 1.0)
    s = Segment((1.0, 0.0), (0.0, 1.0), phi)
    assert s.length == pytest.approx(np.pi / 2, rel=1e-10)
    P, _ = s.point(np.linspace(0, 1, 7))
    np.testing.assert_allclose(np.hypot(P[:, 0], P[:, 1]), 1.0, atol=1e-10)
    # outward normal of the disc (element on the left of travel)
    n = s.normal(np.array([0.5]))[0]
    np.testing.assert_allclose(n, [np.sqrt(0.5)] * 2, atol=1e-8)
    poly = s.polyline(1e-8)
    assert np.all(np.abs(np.hypot(poly[:, 0], poly[:, 1]) - 1) < 1e-10)


def test_straight_segment():
    s = Segment((0, 0), (3, 4))
    assert s.length == pytest.approx(5.0)
    assert not s.is_curved
    np.testing.assert_allclose(s.chord_normal, [0.8, -0.6])
