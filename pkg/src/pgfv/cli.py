"""Command-line front end.

Every subcommand exits with status 0 on success. Library errors are printed
on stderr as a single ``pgfv: error: <ErrorClass>: <message>`` line and exit
with status 1; invalid arguments exit with status 2.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConstraintRankError, PGFVError
from .fv_solver import solve_pgfv
from .mesh import build_structured_mesh, edge_vicinity, read_mesh, shape_regularity, write_mesh
from .mixed_fem import DISTANCE_RULES, balance_residual, cell_integrals
from .pg_stencil import (
    STRATEGIES,
    WEIGHT_NAMES,
    affine_flux_deviation,
    build_all_stencils,
    build_constraints,
    solve_weights,
)
from .plots import write_heatmap, write_loglog
from .verify import SCHEMES, convergence_study, manufactured, solve_scheme

DEFAULT_SEED = 42
CELLS_CSV_VERSION = "pgfv-cells v1"
EDGES_CSV_VERSION = "pgfv-edges v1"
CHECK_CSV_VERSION = "pgfv-stencil-check v1"


class CommandFailed(Exception):
    """Raised by a subcommand to exit 1 after it has written its outputs."""


def _default_seed() -> int:
    raw = os.environ.get("PGFV_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"pgfv: error: PGFV_SEED must be an integer, got {raw!r}") from None


def _levels(text: str) -> list[int]:
    try:
        levels = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text!r}")
    if len(levels) < 2:
        raise argparse.ArgumentTypeError("at least two levels are required")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise argparse.ArgumentTypeError("levels must be strictly increasing")
    if levels[0] < 1:
        raise argparse.ArgumentTypeError("levels must be positive")
    return levels


def _add_mesh_source(p: argparse.ArgumentParser, required: bool = False) -> None:
    src = p.add_mutually_exclusive_group(required=required)
    src.add_argument("--n", type=int, help="structured mesh subdivision count")
    src.add_argument("--mesh", metavar="FILE", help="read a PGFV-MESH file")
    p.add_argument("--perturb", type=float, default=0.0, help="interior vertex jitter in [0, 0.5)")
    p.add_argument("--seed", type=int, default=None, help="jitter seed (default: $PGFV_SEED or 42)")


def _load_mesh(args):
    if args.mesh:
        with open(args.mesh) as fh:
            return read_mesh(fh)
    n = args.n if args.n is not None else 8
    return build_structured_mesh(n, args.perturb, args.seed)


def _summary(mesh) -> str:
    meta = mesh.metadata
    lines = [
        f"vertices {mesh.n_vertices}",
        f"edges {mesh.n_edges} ({len(mesh.interior_edges)} interior)",
        f"triangles {mesh.n_triangles}",
        f"theta {shape_regularity(mesh):.10g}",
        f"min_area {mesh.areas.min():.6g}",
    ]
    if meta.get("generator") == "structured":
        lines.append(f"seed {meta['seed']} perturbation {meta['perturbation']}")
    return "\n".join(lines)


def cmd_mesh(args) -> int:
    mesh = build_structured_mesh(args.n, args.perturb, args.seed)
    with open(args.out, "w") as fh:
        write_mesh(mesh, fh)
    print(f"wrote {args.out}")
    print(_summary(mesh))
    return 0


def cmd_info(args) -> int:
    with open(args.file) as fh:
        mesh = read_mesh(fh)
    print(_summary(mesh))
    return 0


def cmd_solve(args) -> int:
    mesh = _load_mesh(args)
    case = manufactured(args.case)
    f = None if args.f_zero else case.f
    if args.scheme == "pgfv":
        stencils = build_all_stencils(mesh, args.strategy, args.distance_rule)
        if not stencils.pg_edges:
            print("notice: no complete edge vicinity; all edges use the two-point closure")
        sol = solve_pgfv(mesh, stencils, f, args.tol)
    else:
        rule = args.distance_rule if args.scheme == "twopoint" else "centroid-normal"
        sol = solve_scheme(mesh, args.scheme, f, args.strategy, rule)

    with open(args.cells_csv, "w") as fh:
        fh.write(f"# {CELLS_CSV_VERSION} scheme={args.scheme} case={args.case} "
                 f"seed={mesh.metadata.get('seed', '')}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["cell", "x", "y", "u"])
        for k, (c, u) in enumerate(zip(mesh.centroids, sol.u)):
            w.writerow([k, f"{c[0]:.17g}", f"{c[1]:.17g}", f"{u:.17g}"])
    with open(args.edges_csv, "w") as fh:
        fh.write(f"# {EDGES_CSV_VERSION} scheme={args.scheme} case={args.case}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge", "S", "N", "flux"])
        for e, ((s, n), p) in enumerate(zip(mesh.edge_vertices, sol.p)):
            w.writerow([e, s, n, f"{p:.17g}"])
    if args.svg:
        with open(args.svg, "w") as fh:
            write_heatmap(mesh, sol.u, fh, title=f"{args.scheme} {args.case}")

    F = cell_integrals(mesh, f)
    res = np.max(np.abs(balance_residual(mesh, sol.p, F)))
    print(f"cells {mesh.n_triangles} -> {args.cells_csv}")
    print(f"edges {mesh.n_edges} -> {args.edges_csv}")
    print(f"conservation_residual {res:.3e}")
    return 0


def cmd_converge(args) -> int:
    report = convergence_study(
        args.scheme, args.case, args.levels, args.perturb, args.strategy,
        args.distance_rule, args.seed,
    )
    with open(args.csv, "w") as fh:
        report.write_csv(fh)
    if args.json:
        with open(args.json, "w") as fh:
            report.write_json(fh)
    if args.svg:
        ok = [lv for lv in report.levels if lv.status == "ok"]
        h = [lv.h for lv in ok]
        with open(args.svg, "w") as fh:
            write_loglog(
                {
                    "e_u": (h, [lv.e_u for lv in ok]),
                    "e_p": (h, [lv.e_p for lv in ok]),
                    "e_div": (h, [lv.e_div for lv in ok]),
                },
                fh,
                title=f"{report.scheme} / {report.case}, perturbation {report.perturbation}",
            )
    for lv in report.levels:
        cov = "" if lv.coverage is None else f" coverage={lv.coverage:.3f}"
        print(f"n={lv.n} e_u={lv.e_u:.4e} e_p={lv.e_p:.4e} e_div={lv.e_div:.4e}{cov} {lv.status}")
    print("rates e_u " + " ".join(f"{r:.3f}" for r in report.rates_u))
    print("rates e_momentum " + " ".join(f"{r:.3f}" for r in report.rates_momentum))
    if report.failed:
        raise CommandFailed("one or more levels failed; see the report")
    return 0


def cmd_stencil_check(args) -> int:
    mesh = _load_mesh(args)
    rng = np.random.default_rng(args.seed)
    fields = [(rng.normal(size=2), rng.normal()) for _ in range(args.trials)]
    failures = []
    rows = []
    for e in mesh.interior_edges:
        vic = edge_vicinity(mesh, int(e))
        if vic is None:
            continue
        try:
            sw = solve_weights(build_constraints(mesh, vic), args.strategy)
        except ConstraintRankError as exc:
            failures.append((int(e), exc.rank))
            continue
        dev = max(affine_flux_deviation(mesh, sw, g, c) for g, c in fields)
        rows.append((sw, dev))

    interior = len(mesh.interior_edges)
    with open(args.csv, "w") as fh:
        fh.write(f"# {CHECK_CSV_VERSION} strategy={args.strategy} trials={args.trials} "
                 f"seed={args.seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["edge", "S", "N", *WEIGHT_NAMES, "residual", "relative_residual",
                    "weight_norm", "nullspace_dim", "affine_deviation"])
        for sw, dev in rows:
            s, n = mesh.edge_vertices[sw.edge]
            w.writerow([sw.edge, s, n, *(f"{x:.17g}" for x in sw.weights),
                        f"{sw.residual:.3e}", f"{sw.residual / sw.scale:.3e}",
                        f"{np.linalg.norm(sw.weights):.17g}", sw.nullity, f"{dev:.3e}"])
        for e, rank in failures:
            fh.write(f"# rank-failure edge={e} rank={rank}\n")
        max_res = max((sw.residual for sw, _ in rows), default=0.0)
        max_dev = max((d for _, d in rows), default=0.0)
        coverage = len(rows) / interior if interior else 0.0
        summary = (f"stencils {len(rows)} coverage {coverage:.4f} max_residual {max_res:.3e} "
                   f"max_affine_deviation {max_dev:.3e} rank_failures {len(failures)}")
        fh.write(f"# summary {summary}\n")
    print(summary)
    if not rows:
        print("notice: zero coverage, no edge has a complete vicinity")
    if failures:
        raise CommandFailed(
            "constraint rank failures on edges " + ", ".join(str(e) for e, _ in failures)
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pgfv",
        description="Mixed RT0, two-point and Petrov-Galerkin finite volume Poisson solvers.",
    )
    parser.add_argument("--version", action="version", version=f"pgfv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a structured (optionally jittered) mesh")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--perturb", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--out", default="mesh.pgfv")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("info", help="print the quality summary of a mesh file")
    p.add_argument("file")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("solve", help="solve a manufactured problem")
    _add_mesh_source(p)
    p.add_argument("--scheme", choices=SCHEMES, default="mixed")
    p.add_argument("--case", default="sinsin", choices=("sinsin", "bubble"))
    p.add_argument("--strategy", choices=STRATEGIES, default="minnorm")
    p.add_argument("--distance-rule", choices=DISTANCE_RULES, default=None)
    p.add_argument("--f-zero", action="store_true", help="replace the source term by zero")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--cells-csv", default="cells.csv")
    p.add_argument("--edges-csv", default="edges.csv")
    p.add_argument("--svg", default=None, help="write a heatmap of u")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="convergence study over refinement levels")
    p.add_argument("--scheme", choices=SCHEMES, default="mixed")
    p.add_argument("--case", default="sinsin", choices=("sinsin", "bubble"))
    p.add_argument("--levels", type=_levels, default=[4, 8, 16])
    p.add_argument("--perturb", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--strategy", choices=STRATEGIES, default="minnorm")
    p.add_argument("--distance-rule", choices=DISTANCE_RULES, default=None)
    p.add_argument("--csv", default="convergence.csv")
    p.add_argument("--json", default=None)
    p.add_argument("--svg", default=None)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("stencil-check", help="constraint residuals and affine exactness per edge")
    _add_mesh_source(p)
    p.add_argument("--strategy", choices=STRATEGIES, default="minnorm")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--csv", default="stencils.csv")
    p.set_defaults(func=cmd_stencil_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is None:
        args.seed = _default_seed()
    if getattr(args, "distance_rule", "") is None:
        args.distance_rule = "circumcenter" if args.scheme == "twopoint" else "centroid-normal"
    try:
        return args.func(args)
    except (PGFVError, ValueError, OSError, CommandFailed) as exc:
        print(f"pgfv: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
