"""Convergence studies, the four numerical examples and the acceptance checks."""
from __future__ import annotations

import functools
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import analysis as A
from . import verify as V
from .assembly import Discretization, assemble, assemble_diffusion, dump_matrix_market, solve
from .geometry.meshes import (
    annulus_mesh,
    interface_rectangles,
    structured_rectangle,
    wavy_square_mesh,
    wavy_square_with_holes,
)
from .geometry.polymesh import agglomerate, cells_as_elements, grouped_mesh
from .problem import example1, example2, example3, example4, polynomial_problem

log = logging.getLogger(__name__)

RATE_TOL = 0.25
FIT_R2 = 0.97
STEP_FACTOR = 3.0
ERROR_FLOOR = 1e-9
ROUNDOFF = 1e-12

# desk-scale mesh settings
ANNULUS_LADDER = ((15, 2), (30, 4), (60, 8))
WAVY_BACKGROUND = 158
WAVY_LADDER = (32, 128, 512)
HOLES_BACKGROUND = 100
HOLES_ELEMENTS = 128
INFSUP_LADDER = (8, 32, 128)


@dataclass
class Criterion:
    name: str
    target: str
    measured: object
    passed: bool

    def as_dict(self):
        return {"name": self.name, "target": self.target, "measured": self.measured, "pass": bool(self.passed)}

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: measured {self.measured} (target {self.target})"


@dataclass
class Bundle:
    """Reports of one experiment: labelled error studies, criteria and extra numbers."""

    name: str
    studies: dict = field(default_factory=dict)
    criteria: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.criteria)

    def failed(self):
        return [c.name for c in self.criteria if not c.passed]


def _round(x, n=4):
    return float(f"{x:.{n}g}")


# --- meshes ---------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def annulus_ladder(levels=ANNULUS_LADDER):
    return [cells_as_elements(annulus_mesh(nt, nr)) for nt, nr in levels]


@functools.lru_cache(maxsize=None)
def _wavy_background(n):
    return wavy_square_mesh(n)


@functools.lru_cache(maxsize=None)
def wavy_mesh(n_elem, background=WAVY_BACKGROUND, seed=0):
    return agglomerate(_wavy_background(background), n_elem, seed=seed)


@functools.lru_cache(maxsize=None)
def holes_mesh(n_elem=HOLES_ELEMENTS, background=HOLES_BACKGROUND, seed=0):
    return agglomerate(wavy_square_with_holes(background), n_elem, seed=seed)


@functools.lru_cache(maxsize=None)
def interface_mesh(omega=8.0, amp=0.025, n=8):
    bg, labels = interface_rectangles(n, amp, omega)
    return grouped_mesh(bg, labels)


@functools.lru_cache(maxsize=None)
def square_agglomerate(n_elem=16, n=16, seed=0):
    return agglomerate(structured_rectangle(n, n), n_elem, seed=seed)


# --- studies --------------------------------------------------------------


def solve_and_report(mesh, spec, p, snorm_scale=1.0, dump=None):
    disc = Discretization(mesh, spec, degree=p, snorm_scale=snorm_scale)
    system = assemble(disc)
    if dump:
        dump_matrix_market(system, dump)
    u = solve(system)
    return A.error_report(disc, u)


def h_study(meshes, spec, degrees, **kw):
    """Error reports ordered by degree, then by mesh."""
    return [solve_and_report(m, spec, p, **kw) for p in degrees for m in meshes]


def p_study(mesh, spec, degrees, **kw):
    return [solve_and_report(mesh, spec, p, **kw) for p in degrees]


def last_eoc(reports, p, attr):
    """EOC of the last two meshes; 'exact' when both errors are at round-off level."""
    rs = [r for r in reports if r.p == p]
    (h0, e0), (h1, e1) = (rs[-2].h_eff, getattr(rs[-2], attr)), (rs[-1].h_eff, getattr(rs[-1], attr))
    if max(e0, e1) < ROUNDOFF:
        return "exact"
    return A.eoc_table([(h0, e0), (h1, e1)])[0]


def rate_criteria(label, reports, degrees, norms=("l2", "dg")):
    """Last-pair EOC within the expected rate +- RATE_TOL for each degree and norm."""
    out = []
    for p in degrees:
        for norm in norms:
            expected = p + 1 if norm == "l2" else p
            eoc = last_eoc(reports, p, f"{norm}_error")
            ok = eoc == "exact" or abs(eoc - expected) <= RATE_TOL
            out.append(Criterion(f"{label} p={p} {norm} EOC", f"{expected} +- {RATE_TOL}",
                                 eoc if eoc == "exact" else _round(eoc), ok))
    return out


def step_reductions(errors, floor=ERROR_FLOOR):
    """Ratios e_p / e_{p+1} while e_p is above the floor."""
    return [e0 / e1 for e0, e1 in zip(errors[:-1], errors[1:]) if e0 >= floor]


def exponential_criteria(label, reports, steps=True, r2_min=FIT_R2, factor=STEP_FACTOR):
    """Fit log e vs sqrt(N) with R^2 >= r2_min; with `steps` each degree step must
    also reduce the error by `factor`, otherwise the errors must decrease."""
    dofs = [r.dofs for r in reports]
    errs = [r.l2_error for r in reports]
    slope, _, r2 = A.exp_fit(dofs, errs)
    red = step_reductions(errs)
    out = [Criterion(f"{label} exponential fit R^2", f">= {r2_min} with negative slope",
                     _round(r2), bool(r2 >= r2_min and slope < 0))]
    if steps:
        out.append(Criterion(f"{label} error reduction per degree", f">= {factor}x until {ERROR_FLOOR:g}",
                             _round(min(red)) if red else "n/a", all(x >= factor for x in red)))
    else:
        out.append(Criterion(f"{label} monotone decrease", "each degree step lowers the error",
                             _round(min(red)) if red else "n/a", all(x > 1.0 for x in red)))
    return out


# --- examples -------------------------------------------------------------


def run_example1(scale="desk", degrees_h=(1, 2, 3), degrees_p=tuple(range(1, 9))):
    b = Bundle("example1")
    levels = ANNULUS_LADDER if scale == "desk" else ANNULUS_LADDER + ((120, 16),)
    spec = example1()
    t0 = time.perf_counter()
    meshes = annulus_ladder(levels)
    b.studies["h"] = h_study(meshes, spec, degrees_h)
    elapsed = time.perf_counter() - t0
    b.criteria += rate_criteria("C1 example1", b.studies["h"], degrees_h)
    b.criteria.append(Criterion("C1 example1 runtime [s]", "< 300", _round(elapsed, 3), elapsed < 300))
    b.studies["p"] = p_study(meshes[0], spec, degrees_p if scale == "desk" else tuple(range(1, 11)))
    b.criteria += exponential_criteria("C2 example1", b.studies["p"])
    return b


def run_example2(scale="desk", degrees=(1, 2)):
    b = Bundle("example2")
    ladder = WAVY_LADDER if scale == "desk" else WAVY_LADDER + (2048,)
    meshes = [wavy_mesh(n) for n in ladder]
    reps = h_study(meshes, example2(), degrees)
    b.studies["h"] = reps
    b.criteria += rate_criteria("C3 example2", reps, degrees, norms=("l2", "dg", "s"))
    b.info["s_dg_relative_difference"] = [_round(abs(r.s_error - r.dg_error) / r.dg_error) for r in reps]
    b.info["background_triangles"] = int(meshes[0].background.n_cells)
    return b


def run_example3(eps_values=(1e-4, 0.0), bound=5.0):
    b = Bundle("example3")
    mesh = holes_mesh()
    for eps in eps_values:
        disc = Discretization(mesh, example3(eps), degree=1)
        u = solve(assemble(disc))
        umax, finite = A.max_abs_discrete(disc, u)
        b.criteria.append(Criterion(f"C4 example3 eps={eps:g} max|u_h|", f"<= {bound}, finite",
                                    _round(umax), bool(finite and umax <= bound)))
        if eps == 0.0:
            diff = assemble_diffusion(disc)
            dmax = float(abs(diff).max()) if diff.nnz else 0.0
            b.criteria.append(Criterion("C4 example3 eps=0 sigma and diffusion matrix", "sigma == 0, B_d == 0",
                                        dmax, bool(disc.sigma_is_zero() and dmax == 0.0)))
    return b


def run_example4(omegas=(8.0, 16.0), degrees=tuple(range(1, 9)), plateau_max=5):
    """Exponential decay at omega = 8; at larger omega only degrees past the plateau are fitted."""
    b = Bundle("example4")
    for om in omegas:
        reps = p_study(interface_mesh(om), example4(0.025, om), degrees)
        b.studies[f"p_omega{om:g}"] = reps
        if om <= 8:
            b.criteria += exponential_criteria(f"C5 example4 omega={om:g}", reps, steps=False)
        else:
            tail = [r for r in reps if r.p > plateau_max]
            b.criteria += exponential_criteria(f"C5 example4 omega={om:g} p>{plateau_max}", tail, steps=False)
    return b


EXAMPLES = {1: run_example1, 2: run_example2, 3: run_example3, 4: run_example4}


def run_example(n, scale="desk"):
    if n not in EXAMPLES:
        raise ValueError(f"example must be one of {sorted(EXAMPLES)}")
    if n in (1, 2):
        return EXAMPLES[n](scale=scale)
    return EXAMPLES[n]()


# --- verification criteria ------------------------------------------------


def check_battery(pmax=6, time_limit=60.0):
    b = Bundle("battery")
    t0 = time.perf_counter()
    reports = V.run_battery(pmax=pmax)
    elapsed = time.perf_counter() - t0
    worst = max(reports, key=lambda r: r.ratio)
    b.info["reports"] = reports
    b.criteria.append(Criterion("C6 inverse-inequality battery max ratio", f"<= 1 + {V.RATIO_TOL:g}",
                                f"{worst.ratio:.15f} ({worst.inequality}, {worst.shape}, p={worst.p})",
                                all(r.ok for r in reports)))
    b.criteria.append(Criterion("C6 battery runtime [s]", f"< {time_limit:g}", _round(elapsed, 3),
                                elapsed < time_limit))
    return b


def check_coercivity(degrees=(1, 2, 3), n_elem=32, n_probes=500):
    b = Bundle("coercivity")
    mesh = wavy_mesh(n_elem)
    for p in degrees:
        res = V.coercivity_continuity_check(Discretization(mesh, example2(), degree=p), n_probes=n_probes)
        b.info[p] = res
        b.criteria.append(Criterion(f"C7 coercivity p={p}", ">= 0.5 - 1e-8", _round(res["coercivity_probe"]),
                                    res["coercivity_probe"] >= 0.5 - 1e-8))
        b.criteria.append(Criterion(f"C7 continuity p={p}", "<= 2 + 1e-8", _round(res["continuity_probe"]),
                                    res["continuity_probe"] <= 2 + 1e-8))
    return b


def check_strip(shapes=("unit_square", "curved_prism"), degrees=(1, 2, 3, 4), n_probes=500):
    b = Bundle("strip")
    for s in shapes:
        for p in degrees:
            probe, eig = V.strip_perturbation_check(s, p, n_probes=n_probes)
            b.criteria.append(Criterion(f"C8 strip {s} p={p}", ">= 0.5", _round(probe), probe >= 0.5))
            b.info[(s, p)] = eig
    return b


def check_polynomial(p=2, n_elem=16, tol=1e-8):
    b = Bundle("polynomial")
    r = solve_and_report(square_agglomerate(n_elem), polynomial_problem(), p)
    b.criteria.append(Criterion(f"C9 polynomial exactness p={p}", f"L2 < {tol:g}", float(f"{r.l2_error:.3e}"),
                                r.l2_error < tol))
    return b


def check_infsup(ladder=INFSUP_LADDER, p=1, max_ratio=2.0):
    b = Bundle("infsup")
    vals = [V.infsup_estimate(Discretization(wavy_mesh(n), example2(), degree=p)) for n in ladder]
    b.info["lambda_s"] = dict(zip(ladder, vals))
    ratio = max(vals) / min(vals) if min(vals) > 0 else math.inf
    b.criteria.append(Criterion("C10 inf-sup positive", "> 0 at every level", [_round(v) for v in vals],
                                min(vals) > 0))
    b.criteria.append(Criterion("C10 inf-sup max/min", f"<= {max_ratio}", _round(ratio), ratio <= max_ratio))
    return b


# --- output ---------------------------------------------------------------


def write_outputs(bundle, outdir, plots=True):
    """CSV per study, SVG plots and a JSON summary of the criteria."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    for label, reps in bundle.studies.items():
        run_id = f"{bundle.name}-{label}"
        path = os.path.join(outdir, f"{run_id}.csv")
        A.write_csv(path, A.csv_rows(run_id, reps))
        paths.append(path)
        if plots:
            svg = os.path.join(outdir, f"{run_id}.svg")
            A.plot_convergence(svg, reps, x="h" if label == "h" else "sqrt_dofs", title=run_id)
            paths.append(svg)
    summary = os.path.join(outdir, f"{bundle.name}-summary.json")
    info = {k: v for k, v in bundle.info.items() if isinstance(k, str) and isinstance(v, (int, float, str, list))}
    write_summary(summary, bundle.criteria, info)
    paths.append(summary)
    return paths


def write_summary(path, criteria, info=None):
    out = {"criteria": [c.as_dict() for c in criteria]}
    if info:
        out["info"] = info
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, default=_jsonable)


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return str(x)
