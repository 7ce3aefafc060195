"""Command-line driver: meshes, solves, convergence studies, verification and examples."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, field

from threadpoolctl import threadpool_limits

from . import analysis as A
from . import constants as C
from . import experiments as E
from . import verify as V
from .curves import GeometryError, builtin_levelset
from .geometry import io
from .geometry.background import fit_curved_boundary
from .geometry.meshes import (
    annulus_mesh,
    interface_rectangles,
    structured_rectangle,
    wavy_square_mesh,
    wavy_square_with_holes,
)
from .geometry.polymesh import agglomerate, cells_as_elements, grouped_mesh
from .problem import ConfigError, builtin_problem, load_config, problem_from_config

log = logging.getLogger("dgease")

BACKGROUNDS = {
    "rect": (structured_rectangle, (8, 8, 0.0, 1.0, 0.0, 1.0)),
    "annulus": (annulus_mesh, (15, 2)),
    "wavy": (wavy_square_mesh, (E.WAVY_BACKGROUND,)),
    "holes": (wavy_square_with_holes, (E.HOLES_BACKGROUND,)),
    "interface": (interface_rectangles, (8, 0.025, 8.0)),
}


# --- configuration --------------------------------------------------------


@dataclass
class RunConfig:
    problem: dict
    background: str = ""
    mesh_files: list = field(default_factory=list)
    ladder: list = field(default_factory=list)
    degrees: list = field(default_factory=lambda: [1])
    output: str = "dgease-out"
    seed: int = 0
    levelset: str | None = None
    force: bool = False
    dump_system: bool = False
    snorm_scale: float = 1.0
    quad_boost: int = 0
    plots: bool = True

    def __post_init__(self):
        if not self.degrees:
            raise ConfigError("degree ladder is empty")
        if any(int(p) < 1 for p in self.degrees):
            raise ConfigError("degrees must be >= 1")
        if not self.mesh_files and not self.ladder:
            raise ConfigError("refinement ladder is empty")
        if not self.mesh_files and not self.background and any(not isinstance(x, str) for x in self.ladder):
            raise ConfigError("element-count ladders need mesh.background")

    @classmethod
    def from_toml(cls, cfg):
        mesh, run = cfg.get("mesh", {}), cfg.get("run", {})
        if "problem" not in cfg:
            raise ConfigError("config has no [problem] table")
        source = mesh.get("source", "file" if "files" in mesh else "generate")
        if source not in ("file", "generate"):
            raise ConfigError("mesh.source must be 'file' or 'generate'")
        return cls(
            problem=cfg["problem"],
            background=mesh.get("background", "") if source == "generate" else "",
            mesh_files=list(mesh.get("files", [])) if source == "file" else [],
            ladder=list(mesh.get("ladder", [])),
            degrees=list(run.get("degrees", [1])),
            output=run.get("output", "dgease-out"),
            seed=int(mesh.get("seed", 0)),
            levelset=mesh.get("levelset"),
            force=bool(run.get("force", False)),
            dump_system=bool(run.get("dump_system", False)),
            snorm_scale=float(run.get("snorm_scale", 1.0)),
            quad_boost=int(run.get("quad_boost", 0)),
            plots=bool(run.get("plots", True)),
        )

    def spec(self):
        spec = problem_from_config(self.problem)
        if self.quad_boost:
            spec = dataclasses.replace(spec, quad_boost=spec.quad_boost + self.quad_boost)
        return spec

    def meshes(self):
        if self.mesh_files:
            return [io.load_mesh(f, force=self.force) for f in self.mesh_files]
        # string entries are background specs used cell by cell, numbers are agglomeration targets
        return [build_mesh(x, None, self.seed, self.levelset, self.force) if isinstance(x, str)
                else build_mesh(self.background, x, self.seed, self.levelset, self.force) for x in self.ladder]


# --- meshes ---------------------------------------------------------------


def background_from_spec(text):
    """A background mesh from a JSON file or a generator spec 'name:arg,arg'."""
    if os.path.exists(text):
        return io.load_background(text), None
    name, _, args = text.partition(":")
    if name not in BACKGROUNDS:
        raise ConfigError(f"{text!r} is neither a file nor one of the generators {sorted(BACKGROUNDS)}")
    fn, defaults = BACKGROUNDS[name]
    vals = [type(d)(a) for d, a in zip(defaults, args.split(","))] if args else list(defaults)
    out = fn(*vals)
    return out if isinstance(out, tuple) else (out, None)


def build_mesh(background, n_elem=None, seed=0, levelset=None, force=False):
    bg, labels = background_from_spec(background)
    if levelset:
        bg = fit_curved_boundary(bg, builtin_levelset(levelset))
    if n_elem:
        return agglomerate(bg, int(n_elem), seed=seed, force=force)
    if labels is not None:
        return grouped_mesh(bg, labels, force=force)
    return cells_as_elements(bg, force=force)


def _problem(name_or_path):
    if name_or_path.endswith(".toml"):
        return problem_from_config(load_config(name_or_path)["problem"])
    return builtin_problem(name_or_path)


# --- subcommands ----------------------------------------------------------


def cmd_mesh(args):
    mesh = build_mesh(args.bg, args.agglomerate, args.seed, args.levelset, args.force)
    if args.degree:
        mesh.set_degree(args.degree)
    io.save_mesh(mesh, args.output)
    flagged = sum("assumption-violating" in K.flags for K in mesh.elements)
    print(f"{mesh.n_elements} elements, {sum(len(K.face_groups) for K in mesh.elements)} face groups, "
          f"{flagged} flagged -> {args.output}")
    return 0


def cmd_solve(args):
    from .estimator import DGEASESolver

    mesh = io.load_mesh(args.mesh, force=args.force)
    spec = _problem(args.problem)
    if args.quad_boost:
        spec = dataclasses.replace(spec, quad_boost=spec.quad_boost + args.quad_boost)
    est = DGEASESolver(degree=args.p, snorm_scale=args.snorm_scale, dump_system=args.dump_system)
    est.fit(mesh, spec)
    print(f"solved: {est.n_dofs_} dofs, {est.system_.info}")
    if spec.exact is not None:
        r = est.error_report()
        print(f"l2 {r.l2_error:.6e}  dg {r.dg_error:.6e}  s {r.s_error:.6e}")
        if args.report:
            A.write_csv(args.report, A.csv_rows("solve", [r]))
    return 0


def _study(cfg, kind):
    spec = cfg.spec()
    meshes = cfg.meshes()
    os.makedirs(cfg.output, exist_ok=True)
    reports = []
    for p in cfg.degrees:
        for i, m in enumerate(meshes if kind == "h" else meshes[:1]):
            dump = os.path.join(cfg.output, f"system-p{p}-m{i}.mtx") if cfg.dump_system else None
            r = E.solve_and_report(m, spec, int(p), snorm_scale=cfg.snorm_scale, dump=dump)
            print(f"p={r.p} n_elem={r.n_elem} dofs={r.dofs} l2={r.l2_error:.4e} dg={r.dg_error:.4e}")
            reports.append(r)
    b = E.Bundle(spec.name, studies={kind: reports})
    if kind == "h" and len(meshes) > 1:
        b.criteria = E.rate_criteria(spec.name, reports, sorted(set(cfg.degrees)))
    elif kind == "p" and len(reports) > 2:
        b.criteria = E.exponential_criteria(spec.name, reports, steps=False)
    return _finish(b, cfg.output, cfg.plots)


def cmd_converge(args):
    return _study(_config(args), "h")


def cmd_pstudy(args):
    cfg = _config(args)
    if args.pmax:
        cfg.degrees = list(range(args.pmin, args.pmax + 1))
    return _study(cfg, "p")


def _config(args):
    cfg = RunConfig.from_toml(load_config(args.config))
    if args.output:
        cfg.output = args.output
    cfg.force |= args.force
    cfg.dump_system |= args.dump_system
    return cfg


def cmd_verify(args):
    if args.battery != "standard":
        raise ConfigError("only the 'standard' battery is available")
    reports = V.run_battery(pmax=args.pmax)
    if args.report:
        V.write_reports(args.report, reports)
    bad = [r for r in reports if not r.ok]
    worst = max(reports, key=lambda r: r.ratio)
    print(f"{len(reports)} checks, worst ratio {worst.ratio:.6f} ({worst.inequality}, {worst.shape}, p={worst.p})")
    for r in bad:
        print(f"VIOLATED {r.inequality} {r.shape} p={r.p}: {r.empirical:.6e} > {r.bound:.6e}")
    return 1 if bad else 0


def cmd_constants(args):
    mesh = io.load_mesh(args.mesh, force=args.force)
    rows = C.constants_rows(mesh, args.p)
    out = open(args.report, "w", newline="") if args.report else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(C.CONSTANT_COLUMNS))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.6e}" if isinstance(v, float) else v) for k, v in r.items()})
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_example(args):
    b = E.run_example(args.n, scale=args.scale)
    return _finish(b, args.output or f"example{args.n}", not args.no_plots)


def _finish(bundle, outdir, plots=True):
    paths = E.write_outputs(bundle, outdir, plots=plots)
    for c in bundle.criteria:
        print(c.line())
    print("wrote " + ", ".join(paths))
    if not bundle.passed:
        print("failed criteria: " + "; ".join(bundle.failed()), file=sys.stderr)
        return 1
    return 0


# --- entry point ----------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="dgease", description=__doc__)
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads for linear algebra (env DGEASE_THREADS overrides)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def flags(p):
        p.add_argument("--force", action="store_true", help="floor min m.n instead of aborting on bad faces")

    p = sub.add_parser("mesh", help="build an agglomerated mesh and write JSON")
    p.add_argument("--bg", required=True, help="background JSON file or generator spec such as wavy:158")
    p.add_argument("--agglomerate", type=int, default=None, help="target number of elements")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--levelset", default=None, help="fit the boundary onto a built-in level set")
    p.add_argument("-p", "--degree", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    flags(p)
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("solve", help="solve one problem on one mesh")
    p.add_argument("mesh")
    p.add_argument("--problem", required=True, help="built-in name or TOML file with a [problem] table")
    p.add_argument("-p", type=int, default=1)
    p.add_argument("--snorm-scale", type=float, default=1.0)
    p.add_argument("--quad-boost", type=int, default=0)
    p.add_argument("--dump-system", default=None, help="MatrixMarket file for the system matrix")
    p.add_argument("--report", default=None, help="CSV error report")
    flags(p)
    p.set_defaults(func=cmd_solve)

    for name, func, helptext in (("converge", cmd_converge, "h-convergence study from a TOML config"),
                                 ("pstudy", cmd_pstudy, "p-convergence study on the first mesh of a config")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("-o", "--output", default=None)
        p.add_argument("--dump-system", action="store_true")
        if name == "pstudy":
            p.add_argument("--pmin", type=int, default=1)
            p.add_argument("--pmax", type=int, default=None)
        flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("verify", help="inverse-inequality battery")
    p.add_argument("--battery", default="standard")
    p.add_argument("--pmax", type=int, default=6)
    p.add_argument("--report", default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("constants", help="per-element and per-face-group constants")
    p.add_argument("mesh")
    p.add_argument("-p", type=int, required=True)
    p.add_argument("--report", default=None)
    flags(p)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("example", help="run numerical example N with its acceptance checks")
    p.add_argument("n", type=int, choices=sorted(E.EXAMPLES))
    p.add_argument("--scale", choices=("desk", "large"), default="desk")
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_example)
    return ap


def thread_count(flag):
    env = os.environ.get("DGEASE_THREADS")
    if env:
        return int(env)
    return flag if flag else os.cpu_count()


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with threadpool_limits(limits=thread_count(args.threads)):
            return args.func(args)
    except (ConfigError, GeometryError, OSError) as err:
        print(f"dgease: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
