"""dG and streamline norms, error reports, convergence rates and output files."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .assembly import _Triplets
from .problem import BoundaryLabel

COMPONENTS = ("reaction", "upwind", "gradient", "penalty", "streamline")


@dataclass
class ErrorReport:
    p: int
    n_elem: int
    dofs: int
    h_max: float
    h_eff: float
    l2_error: float
    dg_error: float
    s_error: float
    components: dict = field(default_factory=dict)

    def as_row(self):
        d = asdict(self)
        d.update(d.pop("components"))
        return d


def _sq(x):
    return x * x


def norm_components(disc, fn, lambdas=None, extra=2):
    """Squared norm components of a piecewise function.

    fn(k, x) returns (values (n,), gradients (n, 2)) of the restriction to element k.
    Returns dict with l2, reaction, upwind, gradient, penalty and streamline.
    """
    lambdas = disc.snorm_lambdas() if lambdas is None else np.asarray(lambdas)
    out = dict.fromkeys(("l2",) + COMPONENTS, 0.0)
    for e in disc.element_data(extra):
        v, g = fn(e.k, e.x)
        c0 = e.c + 0.5 * e.divb
        out["l2"] += e.w @ _sq(v)
        out["reaction"] += e.w @ (c0 * _sq(v))
        out["gradient"] += e.w @ np.einsum("pi,pij,pj->p", g, e.a, g)
        out["streamline"] += lambdas[e.k] * (e.w @ _sq(np.einsum("pi,pi->p", e.b, g)))
    interior, boundary = disc.face_data(extra)
    for f in interior:
        v1, _ = fn(f.k, f.x)
        v2, _ = fn(f.k2, f.x)
        jump = _sq(v1 - v2)
        bn = np.abs(np.einsum("pi,pi->p", f.b, f.n))
        out["upwind"] += 0.5 * (f.w * bn) @ jump
        out["penalty"] += (f.w * f.sigma) @ jump
    for f in boundary:
        v, _ = fn(f.k, f.x)
        bn = np.abs(np.einsum("pi,pi->p", f.b, f.n))
        out["upwind"] += 0.5 * (f.w * bn) @ _sq(v)
        out["penalty"] += (f.w * f.sigma * (f.labels == BoundaryLabel.DIRICHLET)) @ _sq(v)
    return {k: float(v) for k, v in out.items()}


def dg_norm(components):
    return math.sqrt(sum(components[k] for k in COMPONENTS[:4]))


def s_norm(components):
    return math.sqrt(sum(components[k] for k in COMPONENTS))


def discrete_function(disc, coeffs):
    """fn(k, x) for the discrete function with global coefficients `coeffs`."""
    sp_ = disc.space

    def fn(k, x):
        phi, dphi = sp_.bases[k].eval_both(x)
        c = coeffs[sp_.dofs(k)]
        return phi @ c, np.einsum("pmi,m->pi", dphi, c)

    return fn


def error_function(disc, coeffs):
    """fn(k, x) for u - u_h, using the exact solution of the element's piece."""
    uh = discrete_function(disc, coeffs)

    def fn(k, x):
        pc = disc.piece(k)
        v, g = uh(k, x)
        return pc.exact(x) - v, pc.exact_grad(x) - g

    return fn


def error_report(disc, coeffs, lambdas=None):
    if disc.spec.exact is None:
        raise ValueError("problem has no exact solution")
    comps = norm_components(disc, error_function(disc, coeffs), lambdas)
    mesh = disc.mesh
    area = mesh.total_area()
    return ErrorReport(
        p=int(disc.space.degrees.max()), n_elem=mesh.n_elements, dofs=disc.space.ndofs, h_max=mesh.h_max(),
        h_eff=math.sqrt(area / mesh.n_elements), l2_error=math.sqrt(comps["l2"]), dg_error=dg_norm(comps),
        s_error=s_norm(comps), components=comps,
    )


def max_abs_discrete(disc, coeffs):
    """max |u_h| over volume quadrature points and a flag for non-finite values."""
    fn = discrete_function(disc, coeffs)
    vals = np.concatenate([fn(e.k, e.x)[0] for e in disc.element_data()])
    return float(np.max(np.abs(vals))), bool(np.all(np.isfinite(vals)))


# --- Gram matrices of the norms -------------------------------------------------


def norm_matrices(disc, lambdas=None):
    """Sparse Gram matrices of the squared norm components on the discrete space."""
    sp_ = disc.space
    lambdas = disc.lambdas if lambdas is None else np.asarray(lambdas)
    T = {k: _Triplets(sp_.ndofs) for k in COMPONENTS}
    for e in disc.element_data():
        d = sp_.dofs(e.k)
        c0 = e.c + 0.5 * e.divb
        T["reaction"].add(d, d, np.einsum("p,pm,pl->lm", e.w * c0, e.phi, e.phi))
        T["gradient"].add(d, d, np.einsum("p,pij,pmj,pli->lm", e.w, e.a, e.dphi, e.dphi))
        bg = np.einsum("pi,pmi->pm", e.b, e.dphi)
        T["streamline"].add(d, d, lambdas[e.k] * np.einsum("p,pm,pl->lm", e.w, bg, bg))
    interior, boundary = disc.face_data()
    for f in interior:
        bn = np.abs(np.einsum("pi,pi->p", f.b, f.n))
        sides = [(sp_.dofs(f.k), f.phi1, 1.0), (sp_.dofs(f.k2), f.phi2, -1.0)]
        for dt, vt, st in sides:
            for ds, us, ss in sides:
                T["upwind"].add(dt, ds, np.einsum("p,pm,pl->lm", 0.5 * f.w * bn * ss * st, us, vt))
                T["penalty"].add(dt, ds, np.einsum("p,pm,pl->lm", f.w * f.sigma * ss * st, us, vt))
    for f in boundary:
        d = sp_.dofs(f.k)
        bn = np.abs(np.einsum("pi,pi->p", f.b, f.n))
        T["upwind"].add(d, d, np.einsum("p,pm,pl->lm", 0.5 * f.w * bn, f.phi, f.phi))
        dd = f.labels == BoundaryLabel.DIRICHLET
        T["penalty"].add(d, d, np.einsum("p,pm,pl->lm", f.w * f.sigma * dd, f.phi, f.phi))
    return {k: t.tocsr() for k, t in T.items()}


def combine(mats, keys):
    out = sp.csr_matrix(mats[keys[0]].shape)
    for k in keys:
        out = out + mats[k]
    return out


def ar_matrix(mats):
    return combine(mats, ("reaction", "upwind"))


def d_matrix(mats):
    return combine(mats, ("gradient", "penalty"))


def dg_matrix(mats):
    return combine(mats, COMPONENTS[:4])


def s_matrix(mats):
    return combine(mats, COMPONENTS)


# --- rates ----------------------------------------------------------------------


def eoc_table(pairs):
    """Consecutive slopes of (h, error) pairs; zero errors give 'exact'."""
    if len(pairs) < 2:
        raise ValueError("need at least two refinement levels")
    out = []
    for (h0, e0), (h1, e1) in zip(pairs[:-1], pairs[1:]):
        if e0 == 0.0 or e1 == 0.0:
            out.append("exact")
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


def exp_fit(dofs, errors):
    """Least-squares fit log e = a + b sqrt(N); returns (slope, intercept, R^2)."""
    x = np.sqrt(np.asarray(dofs, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


# --- output ---------------------------------------------------------------------

CSV_COLUMNS = ("run_id", "p", "n_elem", "h_max", "dofs", "l2", "dg", "s", "eoc_l2", "eoc_dg")


def csv_rows(run_id, reports, h_attr="h_eff"):
    """Rows in the CSV schema; eoc columns compare with the previous report of equal p."""
    rows, last = [], {}
    for r in reports:
        h = getattr(r, h_attr)
        eoc_l2 = eoc_dg = ""
        if r.p in last:
            prev = last[r.p]
            hp = getattr(prev, h_attr)
            eoc_l2 = eoc_table([(hp, prev.l2_error), (h, r.l2_error)])[0]
            eoc_dg = eoc_table([(hp, prev.dg_error), (h, r.dg_error)])[0]
        last[r.p] = r
        rows.append({"run_id": run_id, "p": r.p, "n_elem": r.n_elem, "h_max": r.h_max, "dofs": r.dofs,
                     "l2": r.l2_error, "dg": r.dg_error, "s": r.s_error, "eoc_l2": eoc_l2, "eoc_dg": eoc_dg})
    return rows


def write_csv(path, rows, columns=CSV_COLUMNS):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in r.items()})


def plot_convergence(path, reports, x="h", title=""):
    """Log-log error vs h (x='h') or log-linear error vs sqrt(dofs) (x='sqrt_dofs') as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    if x == "h":
        groups = [(f"p={p} ", [r for r in reports if r.p == p]) for p in sorted({r.p for r in reports})]
    else:
        groups = [("", list(reports))]
    for name, rs in groups:
        xs = [r.h_eff for r in rs] if x == "h" else [math.sqrt(r.dofs) for r in rs]
        for attr, style in (("l2_error", "o-"), ("dg_error", "s--")):
            ax.plot(xs, [getattr(r, attr) for r in rs], style, label=name + attr[:2])
    if x == "h":
        ax.set_xscale("log")
        ax.set_xlabel("h")
    else:
        ax.set_xlabel("sqrt(dofs)")
    ax.set_yscale("log")
    ax.set_ylabel("error")
    ax.set_title(title)
    ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
