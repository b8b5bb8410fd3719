import numpy as np
import pytest

from pgfv.errors import AssemblyError, SingularMatrixError
from pgfv.fv_solver import assemble_fv, solve_pgfv
from pgfv.mesh import build_structured_mesh
from pgfv.mixed_fem import assemble_two_point, cell_integrals, solve_two_point_fv
from pgfv.pg_stencil import StencilSet, StencilWeights, build_all_stencils
from pgfv.verify import error_norms, manufactured, max_balance_residual

SINSIN = manufactured("sinsin")


@pytest.fixture(scope="module", params=["minnorm", "anchor"])
def strategy(request):
    return request.param


def test_zero_source(mesh8, strategy):
    stencils = build_all_stencils(mesh8, strategy)
    system = assemble_fv(mesh8, stencils, None)
    assert not np.any(system.rhs)
    sol = solve_pgfv(mesh8, stencils, None)
    assert not np.any(sol.u) and not np.any(sol.p)


def test_constants_annihilated_by_interior_rows(mesh8_perturbed, strategy):
    mesh = mesh8_perturbed
    a = assemble_fv(mesh, build_all_stencils(mesh, strategy), None).matrix
    interior_rows = [
        k for k in range(mesh.n_triangles)
        if not any(mesh.is_boundary(e) for e in mesh.tri_edges[k])
    ]
    assert interior_rows
    row_values = a @ np.ones(mesh.n_triangles)
    assert np.max(np.abs(row_values[interior_rows])) <= 1e-12


def test_all_fallback_matrix_equals_two_point():
    mesh = build_structured_mesh(2)
    stencils = build_all_stencils(mesh)
    assert stencils.pg_edges == []
    fv = assemble_fv(mesh, stencils, SINSIN.f)
    a, rhs, _ = assemble_two_point(mesh, SINSIN.f)
    assert (fv.matrix != a).nnz == 0
    assert np.array_equal(fv.rhs, rhs)


def test_forced_fallback_reproduces_two_point_solution(mesh8_perturbed):
    mesh = mesh8_perturbed
    forced = solve_pgfv(mesh, build_all_stencils(mesh, force_fallback=True), SINSIN.f)
    baseline = solve_two_point_fv(mesh, SINSIN.f, "centroid-normal")
    # identical systems, solved by LU and by CG to the same relative tolerance
    assert np.max(np.abs(forced.u - baseline.u)) <= 1e-9 * np.max(np.abs(baseline.u))
    assert np.max(np.abs(forced.p - baseline.p)) <= 1e-9 * np.max(np.abs(baseline.p))


def test_conservation(mesh8, strategy):
    sol = solve_pgfv(mesh8, build_all_stencils(mesh8, strategy), SINSIN.f)
    assert max_balance_residual(mesh8, sol, SINSIN.f) <= 1e-9
    assert sol.info["strategy"] == strategy
    assert sol.info["pg_edges"] == 120


def test_refinement_reduces_error():
    errs = []
    for n in (8, 16):
        mesh = build_structured_mesh(n)
        errs.append(error_norms(mesh, solve_pgfv(mesh, build_all_stencils(mesh), SINSIN.f), SINSIN)[0])
    assert errs[1] < errs[0]


def test_affine_patch(mesh8_perturbed, strategy):
    # f = 0 and exact affine means everywhere: rows of cells closed entirely
    # by six-point stencils balance to zero
    mesh = mesh8_perturbed
    stencils = build_all_stencils(mesh, strategy)
    pg = set(stencils.pg_edges)
    rows = [k for k in range(mesh.n_triangles) if set(mesh.tri_edges[k]) <= pg]
    assert rows
    a = assemble_fv(mesh, stencils, None).matrix
    g = np.array([0.7, -1.3])
    u = 2.0 + mesh.centroids @ g
    assert np.max(np.abs((a @ u)[rows])) <= 1e-10


def test_uncovered_edge(mesh4):
    stencils = build_all_stencils(mesh4)
    partial = StencilSet(
        {e: s for e, s in stencils.stencils.items() if e != 3}, stencils.strategy, stencils.fallback
    )
    with pytest.raises(AssemblyError, match="edge 3"):
        assemble_fv(mesh4, partial, SINSIN.f)


def test_singular_system_reports_context(mesh4):
    # zero weights on every six-point edge decouple the interior cells
    stencils = build_all_stencils(mesh4)
    for e in stencils.pg_edges:
        s = stencils[e]
        stencils.stencils[e] = StencilWeights(
            e, np.zeros(5), s.strategy, s.residual, s.vicinity, s.length
        )
    with pytest.raises(SingularMatrixError, match="strategy minnorm"):
        solve_pgfv(mesh4, stencils, SINSIN.f)


def test_fluxes_match_cell_balance(mesh8_perturbed):
    mesh = mesh8_perturbed
    sol = solve_pgfv(mesh, build_all_stencils(mesh), SINSIN.f)
    F = cell_integrals(mesh, SINSIN.f)
    div = (mesh.tri_signs * sol.p[mesh.tri_edges]).sum(axis=1)
    assert np.allclose(div, -F, atol=1e-9)
