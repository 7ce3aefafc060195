"""Level-set curves and the boundary segments (straight or curved) of mesh cells."""
from __future__ import annotations

import numpy as np


class GeometryError(RuntimeError):
    """Raised when a geometric construction cannot be completed."""


class LevelSet:
    """Scalar field phi with phi < 0 on the side considered 'inside'.

    Subclasses override `value` and optionally `grad`; the default gradient
    uses central differences.
    """

    kind = "generic"
    fd_step = 1e-7

    def __init__(self, func=None, grad=None, **params):
        self._func = func
        self._grad = grad
        self.params = params

    def value(self, x):
        return self._func(np.asarray(x, dtype=float))

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.value(x)

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self._grad is not None:
            return self._grad(x)
        h = self.fd_step
        g = np.empty_like(x)
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            g[:, k] = (self.value(x + e) - self.value(x - e)) / (2 * h)
        return g

    def to_dict(self):
        return {"kind": self.kind, **self.params}

    def project(self, x, tol=1e-12, maxiter=50):
        """Newton projection of points onto {phi = 0} along the gradient."""
        x = np.atleast_2d(np.array(x, dtype=float))
        for _ in range(maxiter):
            f = self(x)
            if np.all(np.abs(f) < tol):
                return x
            g = self.grad(x)
            gg = np.einsum("ij,ij->i", g, g)
            if np.any(gg == 0):
                raise GeometryError(f"zero level-set gradient at {x[gg == 0][0]}")
            x = x - (f / gg)[:, None] * g
        bad = np.argmax(np.abs(self(x)))
        raise GeometryError(f"Newton projection did not converge at vertex {x[bad]}")


class Circle(LevelSet):
    """|x - c| - r, negative inside; with `hole=True` the sign flips."""

    kind = "circle"

    def __init__(self, center=(0.0, 0.0), radius=1.0, hole=False):
        super().__init__(center=list(map(float, center)), radius=float(radius), hole=bool(hole))
        self.c = np.asarray(center, dtype=float)
        self.r = float(radius)
        self.sign = -1.0 if hole else 1.0

    def value(self, x):
        return self.sign * (np.hypot(x[:, 0] - self.c[0], x[:, 1] - self.c[1]) - self.r)

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - self.c
        nrm = np.linalg.norm(d, axis=1)
        return self.sign * d / np.where(nrm > 0, nrm, 1.0)[:, None]


class SineGraph(LevelSet):
    """Curve x[axis] = offset + amp*sin(freq*pi*x[other]).

    phi = side*(x[axis] - g(x[other])); `side=+1` means the region below/left
    of the curve is inside.
    """

    kind = "sine"

    def __init__(self, axis=1, offset=0.0, amp=0.0, freq=1.0, side=1.0):
        super().__init__(axis=int(axis), offset=float(offset), amp=float(amp), freq=float(freq), side=float(side))
        self.axis = int(axis)
        self.other = 1 - self.axis
        self.offset, self.amp, self.freq, self.side = float(offset), float(amp), float(freq), float(side)

    def value(self, x):
        s = x[:, self.other]
        return self.side * (x[:, self.axis] - self.offset - self.amp * np.sin(self.freq * np.pi * s))

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.empty_like(x)
        g[:, self.axis] = self.side
        g[:, self.other] = -self.side * self.amp * self.freq * np.pi * np.cos(self.freq * np.pi * x[:, self.other])
        return g


LEVELSET_KINDS = {"circle": Circle, "sine": SineGraph}


def levelset_from_dict(d):
    d = dict(d)
    kind = d.pop("kind")
    if kind not in LEVELSET_KINDS:
        raise GeometryError(f"unknown level set kind {kind!r}")
    return LEVELSET_KINDS[kind](**d)


def builtin_levelset(name):
    """Named level sets used by the built-in examples."""
    if name == "unit_disc":
        return Circle((0.0, 0.0), 1.0)
    if name == "offcenter_hole":
        return Circle((0.25, 0.25), 0.4, hole=True)
    if name == "sine_interface":
        return SineGraph(axis=1, offset=0.0, amp=0.025, freq=8.0)
    if name.startswith("sine_interface_"):
        return SineGraph(axis=1, offset=0.0, amp=0.025, freq=float(name.rsplit("_", 1)[1]))
    raise GeometryError(f"unknown built-in level set {name!r}")


class Segment:
    """Oriented boundary piece from `a` to `b`, the owning region on its left.

    If `curve` is given the segment is the arc of {curve = 0} joining a and b,
    written as a graph over the chord: P(t) = a + t(b - a) + eta(t) nc, with nc
    the right-hand chord normal.
    """

    __slots__ = ("a", "b", "curve", "_cache")

    def __init__(self, a, b, curve=None):
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.curve = curve
        self._cache = {}

    @property
    def is_curved(self):
        return self.curve is not None

    @property
    def chord(self):
        return self.b - self.a

    @property
    def chord_normal(self):
        d = self.chord
        return np.array([d[1], -d[0]]) / np.hypot(*d)

    def reversed(self):
        return Segment(self.b, self.a, self.curve)

    def _eta(self, t):
        nc = self.chord_normal
        base = self.a[None, :] + t[:, None] * self.chord[None, :]
        eta = np.zeros_like(t)
        phi = self.curve
        for _ in range(60):
            x = base + eta[:, None] * nc
            f = phi(x)
            gn = phi.grad(x) @ nc
            step = f / gn
            eta -= step
            if np.max(np.abs(step)) < 1e-15 * (1.0 + np.max(np.abs(eta))):
                break
        else:
            raise GeometryError("arc parametrization did not converge")
        return eta

    def point(self, t):
        """Points and derivatives dP/dt at parameters t in [0, 1]."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        d = self.chord
        if not self.is_curved:
            return self.a + t[:, None] * d, np.tile(d, (t.size, 1))
        nc = self.chord_normal
        eta = self._eta(t)
        x = self.a + t[:, None] * d + eta[:, None] * nc
        g = self.curve.grad(x)
        deta = -(g @ d) / (g @ nc)
        return x, d[None, :] + deta[:, None] * nc[None, :]

    def normal(self, t):
        """Unit normal pointing to the right of the direction of travel."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if not self.is_curved:
            return np.tile(self.chord_normal, (t.size, 1))
        x, dx = self.point(t)
        g = self.curve.grad(x)
        g = g / np.linalg.norm(g, axis=1)[:, None]
        right = np.column_stack([dx[:, 1], -dx[:, 0]])
        return g * np.sign(np.einsum("ij,ij->i", g, right))[:, None]

    def polyline(self, tol=1e-10, max_levels=30):
        """Points on the segment with chord deviation below `tol` (bisection in t)."""
        if not self.is_curved:
            return np.array([self.a, self.b])
        key = ("poly", tol)
        if key in self._cache:
            return self._cache[key]
        t = np.linspace(0.0, 1.0, 9)
        pts = self.point(t)[0]
        for _ in range(max_levels):
            tm = 0.5 * (t[:-1] + t[1:])
            pm = self.point(tm)[0]
            d = pts[1:] - pts[:-1]
            r = pm - pts[:-1]
            dev = np.abs(d[:, 0] * r[:, 1] - d[:, 1] * r[:, 0]) / np.maximum(np.hypot(d[:, 0], d[:, 1]), 1e-300)
            bad = dev > tol
            if not bad.any():
                break
            t = np.sort(np.concatenate([t, tm[bad]]))
            pts = self.point(t)[0]
        self._cache[key] = pts
        return pts

    @property
    def length(self):
        if not self.is_curved:
            return float(np.hypot(*self.chord))
        if "length" not in self._cache:
            from .quadrature import face_rule

            self._cache["length"] = float(face_rule(self, 20).weights.sum())
        return self._cache["length"]
