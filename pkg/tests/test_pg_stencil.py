import dataclasses
import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pgfv.errors import ConstraintRankError
from pgfv.linalg import least_squares_min_norm, null_space, numerical_rank
from pgfv.mesh import build_mesh, build_structured_mesh, edge_vicinity
from pgfv.pg_stencil import (
    StencilWeights,
    TwoPointFallback,
    anchor_weights,
    build_all_stencils,
    build_constraints,
    reconstruct_flux,
    solve_weights,
    write_stencils_csv,
)


def diagonal_edge(mesh):
    """An interior edge along a square diagonal with a complete vicinity."""
    for e in mesh.interior_edges:
        s, n = mesh.vertices[mesh.edge_vertices[e]]
        d = n - s
        if abs(d[0]) > 0 and abs(d[1]) > 0 and edge_vicinity(mesh, e) is not None:
            return e
    raise AssertionError("no diagonal edge with complete vicinity")


@pytest.fixture(scope="module")
def diag_system():
    mesh = build_structured_mesh(8)
    e = diagonal_edge(mesh)
    return mesh, build_constraints(mesh, edge_vicinity(mesh, e))


def test_symmetric_vicinity_has_full_rank(diag_system):
    _, system = diag_system
    assert numerical_rank(system.matrix) == 3
    assert null_space(system.matrix).shape[1] == 2


def test_constraint_rows_follow_barycenters(diag_system):
    mesh, system = diag_system
    v = system.vicinity
    c = mesh.centroids
    assert np.allclose(system.matrix[:2, 0], c[v.L] - c[v.K])
    assert system.matrix[2, 0] == 0.0
    assert np.allclose(system.rhs[:2], system.length * system.normal)


def test_minnorm_solves_constraints(diag_system):
    _, system = diag_system
    w = solve_weights(system, "minnorm")
    assert np.max(np.abs(system.matrix @ w.weights - system.rhs)) <= 1e-12
    assert w.residual <= 1e-12
    assert w.nullity == 2


def test_minnorm_is_shortest_feasible_point(diag_system):
    _, system = diag_system
    w = solve_weights(system, "minnorm").weights
    basis = null_space(system.matrix)
    rng = np.random.default_rng(7)
    for _ in range(100):
        other = w + basis @ rng.normal(scale=0.5, size=2)
        assert np.max(np.abs(system.matrix @ other - system.rhs)) <= 1e-10
        assert np.linalg.norm(w) <= np.linalg.norm(other)


def test_minnorm_orthogonal_to_null_space(mesh8_perturbed):
    stencils = build_all_stencils(mesh8_perturbed)
    for e in stencils.pg_edges:
        system = build_constraints(mesh8_perturbed, stencils[e].vicinity)
        w = stencils[e].weights
        dots = null_space(system.matrix).T @ w
        assert np.max(np.abs(dots)) <= 1e-10 * np.linalg.norm(w)


def test_anchor_is_closest_to_two_point_weight(diag_system):
    _, system = diag_system
    w0 = anchor_weights(system)
    anchor = solve_weights(system, "anchor").weights
    minnorm = solve_weights(system, "minnorm").weights
    assert np.max(np.abs(system.matrix @ anchor - system.rhs)) <= 1e-12
    assert np.linalg.norm(anchor - w0) <= np.linalg.norm(minnorm - w0) + 1e-15


def test_raw_solver_zero_rhs():
    a = np.random.default_rng(1).normal(size=(3, 5))
    assert not np.any(least_squares_min_norm(a, np.zeros(3)))


def test_unknown_strategy(diag_system):
    with pytest.raises(ValueError):
        solve_weights(diag_system[1], "optimal")


def test_constant_field_gives_zero_flux(diag_system):
    _, system = diag_system
    w = solve_weights(system).weights
    assert reconstruct_flux(w, *([3.7] * 6)) == pytest.approx(0.0, abs=1e-13)


def test_cell_coefficients_match_flux_formula(mesh8_perturbed):
    stencils = build_all_stencils(mesh8_perturbed)
    s = stencils[stencils.pg_edges[0]]
    u = np.random.default_rng(3).normal(size=6)
    assert s.cell_coefficients @ u == pytest.approx(reconstruct_flux(s, *u), abs=1e-13)
    assert s.cell_coefficients.sum() == pytest.approx(0.0, abs=1e-13)


def test_x_equals_flux_on_vertical_edge():
    mesh = build_structured_mesh(8)
    stencils = build_all_stencils(mesh)
    for e in stencils.pg_edges:
        s, n = mesh.vertices[mesh.edge_vertices[e]]
        if s[0] == n[0]:
            break
    st_ = stencils[e]
    means = mesh.centroids[st_.cells, 0]  # u = x
    flux = reconstruct_flux(st_, *means)
    assert flux == pytest.approx(mesh.lengths[e] * mesh.normals[e, 0], abs=1e-10 * mesh.lengths[e])


def test_quadratic_field_double_entry(diag_system):
    mesh, system = diag_system
    sw = solve_weights(system)
    # u = x^2 sampled at the barycenters
    xs = mesh.centroids[sw.cells, 0]
    values = xs**2
    got = reconstruct_flux(sw, *values)

    w = [Fraction(float(x)) for x in sw.weights]
    u = [Fraction(float(x)) ** 2 for x in xs]
    uK, uL, uM, uP, uQ, uR = u
    exact = (
        w[0] * (uL - uK) + w[1] * (uM - uL) + w[2] * (uK - uP)
        + w[3] * (uK - uQ) + w[4] * (uR - uL)
    )
    assert abs(Fraction(got) - exact) <= Fraction(1, 10**13) * (1 + abs(exact))


_PERTURBED = build_structured_mesh(8, 0.2, seed=42)
_PERTURBED_STENCILS = build_all_stencils(_PERTURBED)


@settings(max_examples=40, deadline=None)
@given(
    gx=st.floats(-50, 50),
    gy=st.floats(-50, 50),
    offset=st.floats(-100, 100),
)
def test_affine_exactness(gx, gy, offset):
    mesh = _PERTURBED
    g = np.array([gx, gy])
    for e in _PERTURBED_STENCILS.pg_edges:
        s = _PERTURBED_STENCILS[e]
        means = offset + mesh.centroids[s.cells] @ g
        flux = reconstruct_flux(s, *means)
        exact = mesh.lengths[e] * (g @ mesh.normals[e])
        assert abs(flux - exact) <= 1e-10 * (1 + np.hypot(gx, gy)) * mesh.lengths[e]


def test_single_square_has_no_pg_stencil():
    stencils = build_all_stencils(build_structured_mesh(1))
    assert stencils.pg_edges == []
    assert stencils.coverage == 0.0
    assert [stencils[e].reason for e in range(5)].count("incomplete-vicinity") == 1


def test_structured_coverage():
    mesh = build_structured_mesh(8)
    stencils = build_all_stencils(mesh)
    assert len(stencils.pg_edges) == 120
    for e in stencils.fallback_edges:
        s = stencils[e]
        assert isinstance(s, TwoPointFallback)
        assert s.reason == "boundary" or edge_vicinity(mesh, e) is None
    # edges at least one cell away from the boundary are all covered
    for e in mesh.interior_edges:
        mid = mesh.midpoints[e]
        if np.all(mid > 1 / 8) and np.all(mid < 7 / 8):
            assert isinstance(stencils[e], StencilWeights)


def test_perturbed_residual_invariant(mesh8_perturbed):
    stencils = build_all_stencils(mesh8_perturbed, "anchor")
    assert stencils.pg_edges
    for e in stencils.pg_edges:
        s = stencils[e]
        assert s.residual <= 1e-10 * s.scale
        assert s.nullity == 2


def test_force_fallback(mesh4):
    stencils = build_all_stencils(mesh4, force_fallback=True)
    assert stencils.pg_edges == []
    assert {stencils[e].reason for e in mesh4.interior_edges} == {"forced"}


def test_boundary_edge_has_no_vicinity(mesh4):
    with pytest.raises(ValueError):
        edge_vicinity(mesh4, int(mesh4.boundary_edges[0]))


def test_collinear_barycenters_rejected(diag_system):
    mesh, system = diag_system
    v = system.vicinity
    # squash all centroids onto the x axis: the barycenter vectors become parallel
    flat = mesh.centroids.copy()
    flat[:, 1] = 0.0
    squashed = dataclasses.replace(mesh, centroids=flat)
    with pytest.raises(ConstraintRankError) as info:
        build_constraints(squashed, v)
    assert info.value.edge == v.edge


def test_stencil_csv(mesh4):
    stencils = build_all_stencils(mesh4)
    sink = io.StringIO()
    write_stencils_csv(mesh4, stencils, sink)
    lines = sink.getvalue().splitlines()
    assert lines[0] == "# pgfv-stencils v1"
    assert lines[1].split(",")[:3] == ["edge", "S", "N"]
    assert len(lines) == 2 + len(stencils.pg_edges)
