"""PDE data for -div(a grad u) + div(b u) + c u = f and the boundary classification."""
from __future__ import annotations

import ast
import enum
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
import sympy

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ProblemDataError(ValueError):
    """Problem data violate a well-posedness assumption."""


class ConfigError(ValueError):
    pass


class BoundaryLabel(enum.IntEnum):
    DIRICHLET = 0
    NEUMANN = 1
    INFLOW = 2
    OUTFLOW = 3


X1, X2 = sympy.symbols("x1 x2", real=True)


# --- expressions ------------------------------------------------------------

_ALLOWED_FUNCS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}
_ALLOWED_NAMES = {"x1": X1, "x2": X2, "pi": sympy.pi, "e": sympy.E}
_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Constant, ast.Load,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd,
)


def parse_expression(text):
    """Parse a restricted arithmetic expression in x1, x2 into a sympy expression.

    Supports + - * / ^, sin, cos, exp and the constants pi, e.
    """
    if isinstance(text, (int, float)):
        return sympy.Float(text) if isinstance(text, float) else sympy.Integer(text)
    src = str(text).replace("^", "**")
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as err:
        raise ConfigError(f"cannot parse expression {text!r}: {err.msg}") from None

    def build(node):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigError(f"unsupported syntax {type(node).__name__} in {text!r}")
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ConfigError(f"bad constant in {text!r}")
            return sympy.nsimplify(node.value) if isinstance(node.value, int) else sympy.Float(node.value)
        if isinstance(node, ast.Name):
            if node.id not in _ALLOWED_NAMES:
                raise ConfigError(f"unknown name {node.id!r} in {text!r}")
            return _ALLOWED_NAMES[node.id]
        if isinstance(node, ast.UnaryOp):
            v = build(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            l, r = build(node.left), build(node.right)
            op = type(node.op)
            return {ast.Add: l + r, ast.Sub: l - r, ast.Mult: l * r, ast.Div: l / r, ast.Pow: l ** r}[op]
        if isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS or len(node.args) != 1:
                raise ConfigError(f"unsupported function call in {text!r}")
            return _ALLOWED_FUNCS[node.func.id](build(node.args[0]))
        raise ConfigError(f"unsupported syntax in {text!r}")

    return build(tree)


def scalar_field(expr):
    """numpy callable x -> (n,) from a sympy expression in x1, x2."""
    f = sympy.lambdify((X1, X2), expr, "numpy")

    def call(x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.asarray(f(x[:, 0], x[:, 1]), dtype=float), (x.shape[0],)).copy()

    return call


def vector_field(exprs):
    fs = [scalar_field(e) for e in exprs]
    return lambda x: np.column_stack([f(x) for f in fs])


def tensor_field(mat):
    fs = [[scalar_field(mat[i][j]) for j in range(2)] for i in range(2)]

    def call(x):
        x = np.atleast_2d(x)
        out = np.empty((x.shape[0], 2, 2))
        for i in range(2):
            for j in range(2):
                out[:, i, j] = fs[i][j](x)
        return out

    return call


# --- problem data -----------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and data; all fields map points (n, 2) to arrays.

    `pieces` optionally overrides the data per subdomain tag; elements carry a
    region tag and evaluate their own piece (smooth extension across slivers).
    """

    name: str
    diffusion: Callable
    wind: Callable
    div_wind: Callable
    reaction: Callable
    source: Callable
    dirichlet: Callable
    neumann: Callable | None = None
    exact: Callable | None = None
    exact_grad: Callable | None = None
    gamma0: float = 0.0
    boundary_kinds: Mapping = field(default_factory=dict)
    default_kind: str = "dirichlet"
    pieces: Mapping = field(default_factory=dict)
    quad_boost: int = 0
    transport: bool = False
    symbols: Mapping = field(default_factory=dict)

    def piece(self, region):
        return self.pieces.get(region, self)

    def diffusion_is_zero(self, x):
        return np.all(self.diffusion(x) == 0.0)


def c0_squared(x, spec, tol=1e-12):
    """c + div(b)/2 at points x; raises if below gamma0^2."""
    val = spec.reaction(x) + 0.5 * spec.div_wind(x)
    if np.any(val < spec.gamma0 ** 2 - tol):
        bad = int(np.argmin(val))
        raise ProblemDataError(f"c + div(b)/2 = {val[bad]:.3e} < gamma0^2 at {np.atleast_2d(x)[bad]}")
    return val


def max_diffusion_eig(a):
    """Largest eigenvalue of symmetric 2x2 tensors, closed form; a has shape (..., 2, 2)."""
    tr = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
    det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    return tr + np.sqrt(np.maximum(tr * tr - det, 0.0))


def classify_boundary(x, n, spec, tags, amax=None):
    """Boundary labels for points x with unit outward normals n and region tags."""
    a = spec.diffusion(x)
    ann = np.einsum("pi,pij,pj->p", n, a, n)
    if amax is None:
        amax = max(float(np.abs(a).max(initial=0.0)), 1e-300)
    bn = np.einsum("pi,pi->p", spec.wind(x), n)
    labels = np.where(bn < 0, BoundaryLabel.INFLOW, BoundaryLabel.OUTFLOW).astype(np.int64)
    elliptic = ann > 1e-12 * amax
    for p in np.nonzero(elliptic)[0]:
        kind = spec.boundary_kinds.get(tags[p], spec.default_kind)
        if kind is None:
            raise ConfigError(f"no boundary condition given for elliptic boundary {tags[p]!r}")
        labels[p] = BoundaryLabel.DIRICHLET if kind == "dirichlet" else BoundaryLabel.NEUMANN
    neu = labels == BoundaryLabel.NEUMANN
    if np.any(bn[neu] < -1e-12):
        raise ProblemDataError("Neumann boundary with inflowing wind (b.n < 0) is not supported")
    return labels


def classify_boundary_point(x, n, spec, tag="boundary"):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = np.atleast_2d(np.asarray(n, dtype=float))
    return BoundaryLabel(int(classify_boundary(x, n, spec, [tag])[0]))


def check_semidefinite(spec, x):
    a = spec.diffusion(x)
    ev = np.linalg.eigvalsh(0.5 * (a + np.swapaxes(a, 1, 2)))
    if np.any(ev[:, 0] < -1e-12 * max(1.0, np.abs(ev).max())):
        raise ProblemDataError("diffusion tensor is not positive semidefinite")
    return True


# --- symbolic construction --------------------------------------------------


def symbolic_problem(name, a, b, c, exact=None, source=None, neumann=None, gamma0=0.0, **kw):
    """ProblemSpec from sympy data; with `exact` and no `source`, f is manufactured."""
    a = sympy.Matrix(a)
    b = sympy.Matrix(b)
    c = sympy.sympify(c)
    div_b = sympy.diff(b[0], X1) + sympy.diff(b[1], X2)
    dirichlet = sympy.Integer(0)
    exact_grad = None
    if exact is not None:
        exact = sympy.sympify(exact)
        grad = sympy.Matrix([sympy.diff(exact, X1), sympy.diff(exact, X2)])
        flux = a * grad
        residual = -(sympy.diff(flux[0], X1) + sympy.diff(flux[1], X2)) + sympy.diff(b[0] * exact, X1) \
            + sympy.diff(b[1] * exact, X2) + c * exact
        if source is None:
            source = residual
        dirichlet = exact
        exact_grad = vector_field(list(grad))
    if source is None:
        raise ConfigError("either an exact solution or a source term is required")
    return ProblemSpec(
        name=name,
        diffusion=tensor_field(a.tolist()),
        wind=vector_field(list(b)),
        div_wind=scalar_field(div_b),
        reaction=scalar_field(c),
        source=scalar_field(sympy.sympify(source)),
        dirichlet=scalar_field(dirichlet),
        neumann=None if neumann is None else scalar_field(sympy.sympify(neumann)),
        exact=None if exact is None else scalar_field(exact),
        exact_grad=exact_grad,
        gamma0=gamma0,
        symbols={"a": a, "b": b, "c": c, "u": exact, "f": sympy.sympify(source)},
        **kw,
    )


SIN_SIN = sympy.sin(sympy.pi * X1) * sympy.sin(sympy.pi * X2)


def example1():
    """Pure diffusion, a = I, u = sin(pi x1) sin(pi x2)."""
    return symbolic_problem("example1", sympy.eye(2), [0, 0], 0, exact=SIN_SIN)


def example2(eps=0.01):
    """a = eps I, b = (1 - x2, 1 - x1), c = 2, u = sin(pi x1) sin(pi x2)."""
    eps = sympy.nsimplify(eps)
    return symbolic_problem("example2", eps * sympy.eye(2), [1 - X2, 1 - X1], 2, exact=SIN_SIN,
                            gamma0=float(np.sqrt(2.0)))


def example3(eps=1e-4):
    """a = eps I, b = (1, 1), c = 0, f = 1, homogeneous Dirichlet data."""
    eps = sympy.nsimplify(eps)
    spec = symbolic_problem("example3", eps * sympy.eye(2), [1, 1], 0, source=1)
    return replace(spec, transport=(eps == 0))


def example4_exact(amp=0.025, omega=8):
    amp, omega = sympy.nsimplify(amp), sympy.nsimplify(omega)
    core = sympy.sin(sympy.pi / 2 * (1 + X2 - amp * sympy.sin(omega * sympy.pi * X1)))
    u1 = core * sympy.exp(-(X1 + sympy.pi ** 2 * X1 ** 3 / 12))
    u2 = core * sympy.exp(-X1)
    return u1, u2


def example4(amp=0.025, omega=8):
    """Changing-type problem on [-1,1]^2 split by x2 = amp sin(omega pi x1).

    Region 1 (above): a = diag(0, x1^2); region 2 (below): a = 0.  Both have
    b = (1, amp omega pi cos(omega pi x1)), c = 1, f = 0.
    """
    amp_s, omega_s = sympy.nsimplify(amp), sympy.nsimplify(omega)
    b = [1, amp_s * omega_s * sympy.pi * sympy.cos(omega_s * sympy.pi * X1)]
    u1, u2 = example4_exact(amp, omega)
    boost = int(np.ceil(float(omega)))
    p1 = symbolic_problem("example4-elliptic", sympy.diag(0, X1 ** 2), b, 1, exact=u1, source=0,
                          gamma0=1.0, quad_boost=boost)
    p2 = symbolic_problem("example4-hyperbolic", sympy.zeros(2, 2), b, 1, exact=u2, source=0,
                          gamma0=1.0, quad_boost=boost)
    return replace(p1, name="example4", pieces={1: p1, 2: p2})


def polynomial_problem():
    """u = x1^2 + x2, a = I, b = (1, 1), c = 1: reproduced exactly for p >= 2."""
    return symbolic_problem("polynomial", sympy.eye(2), [1, 1], 1, exact=X1 ** 2 + X2, gamma0=1.0)


BUILTIN_PROBLEMS = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "example4": example4,
    "polynomial": polynomial_problem,
}


def builtin_problem(name, **params):
    if name not in BUILTIN_PROBLEMS:
        raise ConfigError(f"unknown built-in problem {name!r}; choose from {sorted(BUILTIN_PROBLEMS)}")
    return BUILTIN_PROBLEMS[name](**params)


def problem_from_config(cfg):
    """ProblemSpec from a parsed TOML [problem] table."""
    cfg = dict(cfg)
    kinds = dict(cfg.pop("boundary", {}))
    default_kind = kinds.pop("default", "dirichlet")
    for lab, kind in kinds.items():
        if kind not in ("dirichlet", "neumann"):
            raise ConfigError(f"boundary kind for {lab!r} must be 'dirichlet' or 'neumann'")
    if "builtin" in cfg:
        spec = builtin_problem(cfg.pop("builtin"), **cfg.pop("params", {}))
        return replace(spec, boundary_kinds=kinds, default_kind=default_kind) if kinds else spec
    diff = cfg.get("diffusion", 0)
    if isinstance(diff, list):
        a = [[parse_expression(v) for v in row] for row in diff]
    else:
        a = (parse_expression(diff) * sympy.eye(2)).tolist()
    if (isinstance(diff, list) and any(X1 in e.free_symbols or X2 in e.free_symbols for r in a for e in r)) or (
        not isinstance(diff, list) and parse_expression(diff).free_symbols
    ):
        warnings.warn("spatially varying diffusion is evaluated pointwise at quadrature points", stacklevel=2)
    b = [parse_expression(v) for v in cfg.get("wind", [0, 0])]
    c = parse_expression(cfg.get("reaction", 0))
    exact = parse_expression(cfg["exact"]) if "exact" in cfg else None
    source = parse_expression(cfg["source"]) if "source" in cfg else None
    neumann = parse_expression(cfg["neumann"]) if "neumann" in cfg else None
    spec = symbolic_problem(cfg.get("name", "custom"), a, b, c, exact=exact, source=source, neumann=neumann,
                            gamma0=float(cfg.get("gamma0", 0.0)), boundary_kinds=kinds, default_kind=default_kind)
    if exact is None and "dirichlet" in cfg:
        spec = replace(spec, dirichlet=scalar_field(parse_expression(cfg["dirichlet"])))
    return spec


def load_config(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)
