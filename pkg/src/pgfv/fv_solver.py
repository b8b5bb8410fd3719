"""Cell-centred finite volumes with stencil-reconstructed edge fluxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

from .errors import AssemblyError, SingularMatrixError
from .linalg import DEFAULT_TOL, solve_general
from .mesh import Mesh
from .mixed_fem import (
    DiscreteSolution,
    ScalarField,
    assemble_balance,
    cell_integrals,
    evaluate_fluxes,
)
from .pg_stencil import StencilSet


@dataclass
class FVSystem:
    matrix: sps.csr_matrix
    rhs: np.ndarray  # -F_K
    flux_entries: list  # per edge: (cells, coefficients)


def assemble_fv(mesh: Mesh, stencils: StencilSet, f: ScalarField | None) -> FVSystem:
    """Cell balances ``sum_a s_Ka F_a(u) = -F_K`` with each edge's closure.

    Raises:
        AssemblyError: if an edge has no stencil.
    """
    entries = []
    for e in range(mesh.n_edges):
        try:
            s = stencils[e]
        except KeyError:
            raise AssemblyError(f"edge {e} has no flux closure") from None
        entries.append((np.asarray(s.cells), np.asarray(s.cell_coefficients)))
    return FVSystem(assemble_balance(mesh, entries), -cell_integrals(mesh, f), entries)


def solve_pgfv(
    mesh: Mesh,
    stencils: StencilSet,
    f: ScalarField | None,
    tol: float = DEFAULT_TOL,
) -> DiscreteSolution:
    """Solve the (generally nonsymmetric) finite-volume system.

    Raises:
        SingularMatrixError: with mesh and strategy details; a singular
            system is reported, never patched.
    """
    system = assemble_fv(mesh, stencils, f)
    try:
        u = solve_general(system.matrix, system.rhs, tol)
    except SingularMatrixError as exc:
        meta = {k: mesh.metadata.get(k) for k in ("n", "perturbation", "seed")}
        raise SingularMatrixError(
            f"{exc} [mesh {meta}, strategy {stencils.strategy}, "
            f"fallback {stencils.fallback}]"
        ) from exc
    p = evaluate_fluxes(system.flux_entries, u)
    info = {
        "strategy": stencils.strategy,
        "fallback": stencils.fallback,
        "coverage": stencils.coverage,
        "pg_edges": len(stencils.pg_edges),
    }
    return DiscreteSolution(u=u, p=p, scheme="pgfv", info=info)
