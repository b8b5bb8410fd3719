"""Six-point Petrov-Galerkin flux stencils.

For an interior edge ``SN`` with vicinity ``{K, L, M, P, Q, R}`` the total
normal flux is modelled as

    eta (u_L - u_K) + alpha (u_M - u_L) + beta (u_K - u_P)
        + gamma (u_K - u_Q) + delta (u_R - u_L)

with five weights tied by three linear constraints: two that make the formula
exact on affine fields (barycenter-to-barycenter vectors) and one built from
the apex vectors ``WA, EB, EC, WD``. The remaining two degrees of freedom are
fixed by a strategy: minimum norm, or closest to the two-point weight.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import IO, Union

import numpy as np

from .errors import ConstraintRankError, RankDeficientError
from .linalg import least_squares_min_norm, null_space, numerical_rank
from .mesh import Mesh, Vicinity, edge_vicinity
from .mixed_fem import two_point_coefficients, two_point_distances

STRATEGIES = ("minnorm", "anchor")
WEIGHT_NAMES = ("eta", "alpha", "beta", "gamma", "delta")


@dataclass(frozen=True)
class ConstraintSystem:
    matrix: np.ndarray  # (3, 5)
    rhs: np.ndarray  # (3,)
    vicinity: Vicinity
    length: float
    normal: np.ndarray
    vectors: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StencilWeights:
    edge: int
    weights: np.ndarray  # eta, alpha, beta, gamma, delta
    strategy: str
    residual: float  # max-norm constraint residual
    vicinity: Vicinity
    length: float
    nullity: int = 2

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))

    @property
    def scale(self) -> float:
        return self.length * (1.0 + float(np.abs(self.weights).sum()))

    # cell order matching ``cell_coefficients``
    @property
    def cells(self) -> np.ndarray:
        v = self.vicinity
        return np.array([v.K, v.L, v.M, v.P, v.Q, v.R])

    @property
    def cell_coefficients(self) -> np.ndarray:
        eta, alpha, beta, gamma, delta = self.weights
        return np.array(
            [
                -eta + beta + gamma,  # K
                eta - alpha - delta,  # L
                alpha,  # M
                -beta,  # P
                -gamma,  # Q
                delta,  # R
            ]
        )


@dataclass(frozen=True)
class TwoPointFallback:
    edge: int
    transmissibility: float
    cells: np.ndarray  # (L, K) or (K,)
    cell_coefficients: np.ndarray
    reason: str


Stencil = Union[StencilWeights, TwoPointFallback]


def build_constraints(mesh: Mesh, vicinity: Vicinity) -> ConstraintSystem:
    """Assemble the 3x5 constraint system of an edge.

    Raises:
        ConstraintRankError: if the barycenter vectors are all parallel.
    """
    v = vicinity
    c = mesh.centroids
    x = mesh.vertices
    kl = c[v.L] - c[v.K]
    lm = c[v.M] - c[v.L]
    pk = c[v.K] - c[v.P]
    qk = c[v.K] - c[v.Q]
    lr = c[v.R] - c[v.L]
    wa = x[v.A] - x[v.W]
    eb = x[v.B] - x[v.E]
    ec = x[v.C] - x[v.E]
    wd = x[v.D] - x[v.W]
    ol = c[v.L] - v.O
    ok = c[v.K] - v.O
    length = float(mesh.lengths[v.edge])
    normal = mesh.normals[v.edge]

    matrix = np.empty((3, 5))
    matrix[:2] = np.column_stack([kl, lm, pk, qk, lr])
    matrix[2] = [0.0, lm @ wa, pk @ eb, qk @ ec, lr @ wd]
    rhs = np.empty(3)
    rhs[:2] = length * normal
    rhs[2] = -3.0 * length * (normal @ (ol + ok))

    rank = numerical_rank(matrix[:2])
    if rank < 2:
        raise ConstraintRankError(v.edge, rank)
    vectors = dict(KL=kl, LM=lm, PK=pk, QK=qk, LR=lr, WA=wa, EB=eb, EC=ec, WD=wd, OL=ol, OK=ok)
    return ConstraintSystem(matrix, rhs, v, length, normal, vectors)


def anchor_weights(system: ConstraintSystem) -> np.ndarray:
    """Two-point weight vector ``(|SN| / d_a, 0, 0, 0, 0)``, ``d_a = KL . n``."""
    w0 = np.zeros(5)
    w0[0] = system.length / (system.vectors["KL"] @ system.normal)
    return w0


def solve_weights(system: ConstraintSystem, strategy: str = "minnorm") -> StencilWeights:
    """Pick one member of the two-parameter family of admissible weights.

    ``minnorm`` returns the minimum Euclidean norm solution. ``anchor``
    returns the solution closest to the two-point weight ``w0``, i.e. ``w0``
    plus the minimum-norm correction of the residual.

    Raises:
        ConstraintRankError: if the full system is rank deficient.
    """
    a, b = system.matrix, system.rhs
    edge = system.vicinity.edge
    if strategy == "minnorm":
        base = np.zeros(5)
    elif strategy == "anchor":
        base = anchor_weights(system)
    else:
        raise ValueError(f"unknown strategy {strategy!r}; use one of {STRATEGIES}")
    try:
        w = base + least_squares_min_norm(a, b - a @ base)
    except RankDeficientError as exc:
        raise ConstraintRankError(edge, exc.rank) from exc
    residual = float(np.max(np.abs(a @ w - b)))
    nullity = null_space(a).shape[1]
    return StencilWeights(edge, w, strategy, residual, system.vicinity, system.length, nullity)


def reconstruct_flux(weights, u_K, u_L, u_M, u_P, u_Q, u_R) -> float:
    """Total flux through ``SN`` along its normal from six cell values."""
    if isinstance(weights, StencilWeights):
        weights = weights.weights
    eta, alpha, beta, gamma, delta = weights
    return (
        eta * (u_L - u_K)
        + alpha * (u_M - u_L)
        + beta * (u_K - u_P)
        + gamma * (u_K - u_Q)
        + delta * (u_R - u_L)
    )


@dataclass
class StencilSet:
    """Flux closure for every edge of a mesh."""

    stencils: dict  # edge id -> StencilWeights | TwoPointFallback
    strategy: str
    fallback: str

    @property
    def pg_edges(self) -> list[int]:
        return sorted(e for e, s in self.stencils.items() if isinstance(s, StencilWeights))

    @property
    def fallback_edges(self) -> list[int]:
        return sorted(e for e, s in self.stencils.items() if isinstance(s, TwoPointFallback))

    @property
    def coverage(self) -> float:
        """Fraction of interior edges closed by a six-point stencil."""
        interior = [
            s for s in self.stencils.values()
            if isinstance(s, StencilWeights) or s.reason != "boundary"
        ]
        if not interior:
            return 0.0
        return len(self.pg_edges) / len(interior)

    def __getitem__(self, edge: int) -> Stencil:
        return self.stencils[edge]

    def __len__(self) -> int:
        return len(self.stencils)


def _fallback(mesh: Mesh, edge: int, trans: np.ndarray, reason: str) -> TwoPointFallback:
    k, l = mesh.edge_cells[edge]
    t = float(trans[edge])
    if l >= 0:
        return TwoPointFallback(edge, t, np.array([l, k]), np.array([t, -t]), reason)
    return TwoPointFallback(edge, t, np.array([k]), np.array([-t]), reason)


def build_all_stencils(
    mesh: Mesh,
    strategy: str = "minnorm",
    fallback: str = "centroid-normal",
    force_fallback: bool = False,
) -> StencilSet:
    """Six-point stencils where the vicinity is complete, two-point elsewhere.

    ``fallback`` names the two-point distance rule. With ``force_fallback``
    every edge uses the two-point closure.

    Raises:
        ConstraintRankError: carrying the id of the first degenerate edge.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; use one of {STRATEGIES}")
    trans = two_point_coefficients(mesh, two_point_distances(mesh, fallback))
    stencils: dict = {}
    for e in range(mesh.n_edges):
        if mesh.is_boundary(e):
            stencils[e] = _fallback(mesh, e, trans, "boundary")
            continue
        vic = None if force_fallback else edge_vicinity(mesh, e)
        if vic is None:
            reason = "forced" if force_fallback else "incomplete-vicinity"
            stencils[e] = _fallback(mesh, e, trans, reason)
            continue
        stencils[e] = solve_weights(build_constraints(mesh, vic), strategy)
    return StencilSet(stencils, strategy, fallback)


def affine_flux_deviation(mesh: Mesh, stencil: StencilWeights, gradient, offset=0.0) -> float:
    """Relative deviation of the stencil flux from the exact affine flux."""
    g = np.asarray(gradient, dtype=float)
    means = offset + mesh.centroids[stencil.cells] @ g
    approx = reconstruct_flux(stencil, *means)
    length = mesh.lengths[stencil.edge]
    exact = length * (g @ mesh.normals[stencil.edge])
    return abs(approx - exact) / ((1.0 + np.linalg.norm(g)) * length)


STENCIL_CSV_VERSION = "pgfv-stencils v1"
STENCIL_CSV_COLUMNS = ("edge", "S", "N", *WEIGHT_NAMES, "residual", "strategy")


def write_stencils_csv(mesh: Mesh, stencils: StencilSet, sink: IO[str]) -> None:
    """Dump the six-point stencils, one row per edge."""
    sink.write(f"# {STENCIL_CSV_VERSION}\n")
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(STENCIL_CSV_COLUMNS)
    for e in stencils.pg_edges:
        s = stencils[e]
        S, N = mesh.edge_vertices[e]
        writer.writerow(
            [e, S, N, *(f"{w:.17g}" for w in s.weights), f"{s.residual:.3e}", s.strategy]
        )
