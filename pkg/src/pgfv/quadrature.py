"""Quadrature rules on triangles (barycentric points, weights summing to 1)
and on segments (parameter in [0, 1], weights summing to 1)."""

import numpy as np

# Edge-midpoint rule, exact for polynomials of degree 2.
MIDPOINT3_POINTS = np.array(
    [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]
)
MIDPOINT3_WEIGHTS = np.full(3, 1.0 / 3.0)


def _strang_fix7():
    # Degree-5 rule (Radon / Strang-Fix).
    a1 = (6.0 - np.sqrt(15.0)) / 21.0
    a2 = (6.0 + np.sqrt(15.0)) / 21.0
    w1 = (155.0 - np.sqrt(15.0)) / 1200.0
    w2 = (155.0 + np.sqrt(15.0)) / 1200.0
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [[a, a, b], [a, b, a], [b, a, a]]
        wts += [w] * 3
    return np.array(pts), np.array(wts)


DEG5_POINTS, DEG5_WEIGHTS = _strang_fix7()

GAUSS2_POINTS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
GAUSS2_WEIGHTS = np.array([0.5, 0.5])


def map_points(corners, bary):
    """Physical quadrature points for triangles.

    Args:
        corners: array (nt, 3, 2) of vertex coordinates.
        bary: array (nq, 3) of barycentric coordinates.

    Returns:
        Array (nt, nq, 2).
    """
    return np.einsum("qi,tid->tqd", bary, corners)
