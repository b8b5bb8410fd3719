"""Manufactured solutions, discrete error norms and convergence studies."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Callable, Optional, Sequence

import numpy as np

from . import quadrature as quad
from .errors import PGFVError
from .fv_solver import solve_pgfv
from .mesh import Mesh, build_structured_mesh
from .mixed_fem import (
    DiscreteSolution,
    balance_residual,
    cell_integrals,
    solve_mixed,
    solve_two_point_fv,
)
from .pg_stencil import affine_flux_deviation, build_all_stencils
from .rt0 import cell_divergence, evaluate_field

SCHEMES = ("mixed", "twopoint", "pgfv")


@dataclass(frozen=True)
class ManufacturedCase:
    name: str
    u: Callable
    gradient: Callable  # returns (du/dx, du/dy)
    f: Callable


def _sinsin():
    pi = math.pi

    def u(x, y):
        return np.sin(pi * x) * np.sin(pi * y)

    def grad(x, y):
        return (
            pi * np.cos(pi * x) * np.sin(pi * y),
            pi * np.sin(pi * x) * np.cos(pi * y),
        )

    def f(x, y):
        return 2.0 * pi**2 * np.sin(pi * x) * np.sin(pi * y)

    return ManufacturedCase("sinsin", u, grad, f)


def _bubble():
    def u(x, y):
        return x * (1 - x) * y * (1 - y)

    def grad(x, y):
        return (1 - 2 * x) * y * (1 - y), x * (1 - x) * (1 - 2 * y)

    def f(x, y):
        return 2.0 * (x * (1 - x) + y * (1 - y))

    return ManufacturedCase("bubble", u, grad, f)


_CASES = {"sinsin": _sinsin, "bubble": _bubble}


def manufactured(name: str) -> ManufacturedCase:
    """Exact solution of ``-lap u = f`` on the unit square, zero on the boundary."""
    try:
        return _CASES[name]()
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(_CASES)}") from None


def zero_case() -> ManufacturedCase:
    def zero(x, y):
        return np.zeros(np.broadcast(x, y).shape)

    return ManufacturedCase("zero", zero, lambda x, y: (zero(x, y), zero(x, y)), zero)


def error_norms(mesh: Mesh, solution: DiscreteSolution, case: ManufacturedCase):
    """L2 errors of the cell values, the RT0 field and its divergence.

    The edge fluxes of every scheme are expanded in the RT0 basis, so all
    schemes share this code path. Integrals use a degree-5 rule.

    Returns:
        ``(e_u, e_p, e_div)``.
    """
    corners = mesh.vertices[mesh.triangles]
    pts = quad.map_points(corners, quad.DEG5_POINTS)
    x, y = pts[..., 0], pts[..., 1]
    w = mesh.areas[:, None] * quad.DEG5_WEIGHTS[None, :]

    du = solution.u[:, None] - case.u(x, y)
    e_u = math.sqrt(float(np.sum(w * du**2)))

    field_vals = evaluate_field(mesh, solution.p, pts)
    gx, gy = case.gradient(x, y)
    dp = (field_vals[..., 0] - gx) ** 2 + (field_vals[..., 1] - gy) ** 2
    e_p = math.sqrt(float(np.sum(w * dp)))

    div = cell_divergence(mesh, solution.p)
    e_div = math.sqrt(float(np.sum(w * (div[:, None] + case.f(x, y)) ** 2)))
    return e_u, e_p, e_div


def observed_rates(h: Sequence[float], errors: Sequence[float]) -> list[float]:
    """``log(e_{k-1} / e_k) / log(h_{k-1} / h_k)`` between consecutive levels."""
    rates = []
    for k in range(1, len(errors)):
        e0, e1 = errors[k - 1], errors[k]
        if not (e0 > 0 and e1 > 0):
            rates.append(float("nan"))
            continue
        rates.append(math.log(e0 / e1) / math.log(h[k - 1] / h[k]))
    return rates


@dataclass
class LevelResult:
    n: int
    h: float = float("nan")
    e_u: float = float("nan")
    e_p: float = float("nan")
    e_div: float = float("nan")
    coverage: Optional[float] = None
    balance: float = float("nan")
    status: str = "ok"

    @property
    def e_momentum(self) -> float:
        return math.hypot(self.e_p, self.e_div)


@dataclass
class ConvergenceReport:
    scheme: str
    case: str
    perturbation: float
    seed: int
    strategy: Optional[str]
    distance_rule: str
    levels: list = field(default_factory=list)

    def _rates(self, attr):
        ok = [lv for lv in self.levels if lv.status == "ok"]
        return observed_rates([lv.h for lv in ok], [getattr(lv, attr) for lv in ok])

    @property
    def rates_u(self) -> list[float]:
        return self._rates("e_u")

    @property
    def rates_p(self) -> list[float]:
        return self._rates("e_p")

    @property
    def rates_momentum(self) -> list[float]:
        return self._rates("e_momentum")

    @property
    def failed(self) -> bool:
        return any(lv.status != "ok" for lv in self.levels)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "levels"}
        out["schema"] = REPORT_SCHEMA
        out["levels"] = [dict(asdict(lv), e_momentum=lv.e_momentum) for lv in self.levels]
        out["rates"] = {
            "e_u": self.rates_u,
            "e_p": self.rates_p,
            "e_momentum": self.rates_momentum,
        }
        return out

    def write_json(self, sink: IO[str]) -> None:
        json.dump(_json_safe(self.to_dict()), sink, indent=2)
        sink.write("\n")

    def write_csv(self, sink: IO[str]) -> None:
        """One row per level; the rate columns refer to the previous ok level."""
        sink.write(f"# {REPORT_SCHEMA} scheme={self.scheme} case={self.case} "
                   f"perturbation={self.perturbation} seed={self.seed} "
                   f"strategy={self.strategy} distance_rule={self.distance_rule}\n")
        writer = csv.writer(sink, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        rates = {"e_u": self.rates_u, "e_p": self.rates_p, "e_momentum": self.rates_momentum}
        ok_index = -1
        for lv in self.levels:
            row_rates = ["", "", ""]
            if lv.status == "ok":
                ok_index += 1
                if ok_index > 0:
                    row_rates = [_fmt(rates[k][ok_index - 1]) for k in ("e_u", "e_p", "e_momentum")]
            writer.writerow([
                lv.n, _fmt(lv.h), _fmt(lv.e_u), _fmt(lv.e_p), _fmt(lv.e_div),
                _fmt(lv.e_momentum), *row_rates,
                "" if lv.coverage is None else _fmt(lv.coverage),
                _fmt(lv.balance), lv.status,
            ])


REPORT_SCHEMA = "pgfv-convergence v1"
REPORT_COLUMNS = (
    "n", "h", "e_u", "e_p", "e_div", "e_momentum",
    "rate_u", "rate_p", "rate_momentum", "coverage", "balance_residual", "status",
)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


def solve_scheme(
    mesh: Mesh,
    scheme: str,
    f,
    strategy: str = "minnorm",
    distance_rule: str = "centroid-normal",
) -> DiscreteSolution:
    """Dispatch to one of the three solvers."""
    if scheme == "mixed":
        return solve_mixed(mesh, f)
    if scheme == "twopoint":
        return solve_two_point_fv(mesh, f, distance_rule)
    if scheme == "pgfv":
        return solve_pgfv(mesh, build_all_stencils(mesh, strategy, distance_rule), f)
    raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def convergence_study(
    scheme: str,
    case: ManufacturedCase | str,
    levels: Sequence[int],
    perturbation: float = 0.0,
    strategy: str = "minnorm",
    distance_rule: Optional[str] = None,
    seed: int = 42,
) -> ConvergenceReport:
    """Solve on ``build_structured_mesh(n, perturbation, seed)`` for each level.

    A failing level is recorded with its error text as status; later levels
    still run. ``distance_rule`` defaults to ``circumcenter`` for the
    two-point scheme and ``centroid-normal`` (the fallback rule) for pgfv.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if isinstance(case, str):
        case = manufactured(case)
    if distance_rule is None:
        distance_rule = "circumcenter" if scheme == "twopoint" else "centroid-normal"
    report = ConvergenceReport(
        scheme, case.name, perturbation, seed,
        strategy if scheme == "pgfv" else None, distance_rule,
    )
    for n in levels:
        level = LevelResult(n)
        try:
            mesh = build_structured_mesh(n, perturbation, seed)
            level.h = float(mesh.diameters.max())
            if scheme == "pgfv":
                stencils = build_all_stencils(mesh, strategy, distance_rule)
                level.coverage = stencils.coverage
                sol = solve_pgfv(mesh, stencils, case.f)
            else:
                sol = solve_scheme(mesh, scheme, case.f, strategy, distance_rule)
            level.e_u, level.e_p, level.e_div = error_norms(mesh, sol, case)
            level.balance = max_balance_residual(mesh, sol, case.f)
        except PGFVError as exc:
            level.status = f"error: {type(exc).__name__}: {exc}"
        report.levels.append(level)
    return report


def max_balance_residual(mesh: Mesh, solution: DiscreteSolution, f) -> float:
    """``max_K |sum_a s_Ka p_a + F_K| / max(1, max_K |F_K|)``."""
    F = cell_integrals(mesh, f)
    r = balance_residual(mesh, solution.p, F)
    return float(np.max(np.abs(r)) / max(1.0, float(np.max(np.abs(F)))))


def affine_exactness_suite(
    mesh: Mesh,
    strategy: str = "minnorm",
    trials: int = 50,
    seed: int = 0,
    stencils=None,
) -> float:
    """Max relative flux deviation over random affine fields and all PG edges.

    Cell means of an affine field equal its values at the barycenters.
    """
    if stencils is None:
        stencils = build_all_stencils(mesh, strategy)
    pg = [stencils[e] for e in stencils.pg_edges]
    if not pg:
        raise ValueError("mesh has no complete edge vicinity")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        g = rng.normal(size=2)
        offset = rng.normal()
        for s in pg:
            worst = max(worst, affine_flux_deviation(mesh, s, g, offset))
    return worst


def exact_cell_means(mesh: Mesh, u) -> np.ndarray:
    """Cell averages of ``u`` with the degree-5 rule."""
    pts = quad.map_points(mesh.vertices[mesh.triangles], quad.DEG5_POINTS)
    return u(pts[..., 0], pts[..., 1]) @ quad.DEG5_WEIGHTS


def exact_edge_fluxes(mesh: Mesh, gradient, order: int = 5) -> np.ndarray:
    """``int_a grad u . n`` by Gauss-Legendre quadrature on every edge."""
    t, w = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    s = mesh.vertices[mesh.edge_vertices[:, 0]]
    e = mesh.vertices[mesh.edge_vertices[:, 1]]
    pts = s[:, None, :] + t[None, :, None] * (e - s)[:, None, :]
    gx, gy = gradient(pts[..., 0], pts[..., 1])
    gn = gx * mesh.normals[:, :1] + gy * mesh.normals[:, 1:]
    return mesh.lengths * (gn @ w)
