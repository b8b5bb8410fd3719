"""Oriented triangular cellular complexes.

A :class:`Mesh` stores vertices, counter-clockwise triangles and edges with
their co-boundary. Every edge carries a tail ``S`` and head ``N``, a left
cell ``K`` and an optional right cell ``L``, and a unit normal ``n`` pointing
from ``K`` to ``L`` (outward on the boundary) such that ``(n, N - S)`` is a
direct frame. ``K`` is always the lower-id co-boundary triangle, and ``S -> N``
is the counter-clockwise traversal of ``K``, so ``K = (S, N, W)`` and
``L = (N, S, E)``.

``inradius`` holds the *diameter* of the inscribed circle, ``4 * area /
perimeter``; the shape-regularity ratio uses that convention.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np

from .errors import MeshParseError, MeshQualityError, MeshTopologyError

MESH_HEADER = "PGFV-MESH 1"


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray  # (nv, 2)
    triangles: np.ndarray  # (nt, 3), CCW
    edge_vertices: np.ndarray  # (ne, 2): S, N
    edge_cells: np.ndarray  # (ne, 2): K, L (L = -1 on the boundary)
    normals: np.ndarray  # (ne, 2)
    lengths: np.ndarray  # (ne,)
    tri_edges: np.ndarray  # (nt, 3): edge opposite local vertex i
    tri_signs: np.ndarray  # (nt, 3): +1 if the triangle is K of that edge
    areas: np.ndarray
    centroids: np.ndarray
    diameters: np.ndarray
    inradius: np.ndarray  # inscribed-circle diameter
    metadata: dict = field(default_factory=dict)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edge_vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] < 0)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_cells[:, 1] >= 0)

    def is_boundary(self, edge: int) -> bool:
        return self.edge_cells[edge, 1] < 0

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * self.vertices[self.edge_vertices].sum(axis=1)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    def edge_id(self, v0: int, v1: int) -> Optional[int]:
        """Edge joining two vertices, or None."""
        return self._edge_lookup.get((min(v0, v1), max(v0, v1)))

    @property
    def _edge_lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            lo = self.edge_vertices.min(axis=1)
            hi = self.edge_vertices.max(axis=1)
            cache = {(int(a), int(b)): i for i, (a, b) in enumerate(zip(lo, hi))}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def vertex_edges(self, vertex: int) -> np.ndarray:
        """Ids of the edges incident to a vertex, sorted."""
        cache = self.__dict__.get("_vertex_edges_cache")
        if cache is None:
            ev = self.edge_vertices.ravel()
            order = np.argsort(ev, kind="stable")
            offsets = np.searchsorted(ev[order], np.arange(self.n_vertices + 1))
            cache = (order // 2, offsets)
            object.__setattr__(self, "_vertex_edges_cache", cache)
        edges, offsets = cache
        return np.sort(edges[offsets[vertex] : offsets[vertex + 1]])

    def opposite_vertex(self, triangle: int, edge: int) -> int:
        local = int(np.flatnonzero(self.tri_edges[triangle] == edge)[0])
        return int(self.triangles[triangle, local])

    def validate(self) -> None:
        """Raise if any structural invariant is violated."""
        if not np.all(np.isfinite(self.vertices)):
            raise MeshQualityError("non-finite vertex coordinates")
        if np.any(self.areas <= 0):
            bad = int(np.flatnonzero(self.areas <= 0)[0])
            raise MeshQualityError(f"triangle {bad} has non-positive area")
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        if not used.all():
            raise MeshTopologyError(
                f"vertex {int(np.flatnonzero(~used)[0])} belongs to no triangle"
            )


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_mesh(vertices, triangles, metadata: Optional[dict] = None) -> Mesh:
    """Build the oriented complex from coordinates and CCW vertex triples.

    Edges are numbered by sorted ``(min_vid, max_vid)`` pairs, so the result
    depends only on the vertex and triangle arrays.
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
    triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    nt = len(triangles)
    if nt == 0:
        raise MeshTopologyError("mesh has no triangles")
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshTopologyError("triangle references a missing vertex")

    areas = _signed_areas(vertices, triangles)
    if np.any(areas <= 0):
        bad = int(np.flatnonzero(areas <= 0)[0])
        raise MeshQualityError(
            f"triangle {bad} is inverted or degenerate (signed area {areas[bad]:.3e})"
        )

    # Local edge i is opposite local vertex i, traversed CCW.
    tail = triangles[:, [1, 2, 0]]
    head = triangles[:, [2, 0, 1]]
    keys = np.stack([np.minimum(tail, head), np.maximum(tail, head)], axis=-1)
    keys = keys.reshape(-1, 2)
    uniq, inverse, counts = np.unique(
        keys, axis=0, return_inverse=True, return_counts=True
    )
    inverse = inverse.ravel()
    if np.any(counts > 2):
        bad = uniq[np.flatnonzero(counts > 2)[0]]
        raise MeshTopologyError(f"edge {tuple(bad)} shared by more than two triangles")
    ne = len(uniq)
    tri_edges = inverse.reshape(nt, 3)

    # Half-edges sorted by (edge, triangle): first one belongs to K.
    owner = np.repeat(np.arange(nt), 3)
    order = np.lexsort((owner, inverse))
    first = np.searchsorted(inverse[order], np.arange(ne))
    k_half = order[first]
    edge_cells = np.full((ne, 2), -1, dtype=np.int64)
    edge_cells[:, 0] = owner[k_half]
    interior = counts == 2
    edge_cells[interior, 1] = owner[order[first[interior] + 1]]

    edge_vertices = np.stack([tail.ravel()[k_half], head.ravel()[k_half]], axis=1)
    l_half = order[first[interior] + 1]
    same_dir = tail.ravel()[l_half] == edge_vertices[interior, 0]
    if np.any(same_dir):
        bad = np.flatnonzero(interior)[np.flatnonzero(same_dir)[0]]
        raise MeshTopologyError(f"edge {bad}: neighbouring triangles inconsistently oriented")

    tri_signs = np.where(edge_cells[tri_edges, 0] == np.arange(nt)[:, None], 1.0, -1.0)

    t = vertices[edge_vertices[:, 1]] - vertices[edge_vertices[:, 0]]
    lengths = np.hypot(t[:, 0], t[:, 1])
    normals = np.stack([t[:, 1], -t[:, 0]], axis=1) / lengths[:, None]

    sides = lengths[tri_edges]
    perimeter = sides.sum(axis=1)
    return Mesh(
        vertices=_frozen(vertices),
        triangles=_frozen(triangles),
        edge_vertices=_frozen(edge_vertices),
        edge_cells=_frozen(edge_cells),
        normals=_frozen(normals),
        lengths=_frozen(lengths),
        tri_edges=_frozen(tri_edges),
        tri_signs=_frozen(tri_signs),
        areas=_frozen(areas),
        centroids=_frozen(vertices[triangles].mean(axis=1)),
        diameters=_frozen(sides.max(axis=1)),
        inradius=_frozen(4.0 * areas / perimeter),
        metadata=dict(metadata or {}),
    )


def build_structured_mesh(n: int, perturbation: float = 0.0, seed: int = 42) -> Mesh:
    """Unit square split into ``n x n`` cells, each cut along its rising diagonal.

    Interior vertices are moved by ``perturbation * h / sqrt(2)`` in a random
    direction drawn from a generator seeded with ``seed``.

    Raises:
        ValueError: if ``n < 1`` or ``perturbation`` is outside ``[0, 0.5)``.
        MeshQualityError: if the perturbation inverts a triangle.
    """
    if n < 1:
        raise ValueError(f"subdivision count must be >= 1, got {n}")
    if not 0.0 <= perturbation < 0.5:
        raise ValueError(f"perturbation must lie in [0, 0.5), got {perturbation}")
    h = 1.0 / n
    ticks = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(ticks, ticks)
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=1)

    if perturbation > 0 and n > 1:
        rng = np.random.default_rng(seed)
        ix, iy = np.meshgrid(np.arange(1, n), np.arange(1, n))
        inner = (iy * (n + 1) + ix).ravel()
        angles = rng.uniform(0.0, 2.0 * np.pi, size=len(inner))
        shift = perturbation * h / math.sqrt(2.0)
        vertices[inner] += shift * np.stack([np.cos(angles), np.sin(angles)], axis=1)

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10, v01, v11 = v00 + 1, v00 + n + 1, v00 + n + 2
    lower = np.stack([v00, v10, v11], axis=1)
    upper = np.stack([v00, v11, v01], axis=1)
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)

    meta = {"generator": "structured", "n": n, "perturbation": perturbation, "seed": seed}
    return build_mesh(vertices, triangles, meta)


def shape_regularity(mesh: Mesh) -> float:
    """Largest diameter / inscribed-diameter ratio over the triangles."""
    return float(np.max(mesh.diameters / mesh.inradius))


@dataclass(frozen=True)
class Vicinity:
    """Six triangles around an interior edge SN and their labelled vertices.

    ``M``, ``P``, ``Q``, ``R`` lie across ``EN``, ``WN``, ``WS``, ``SE``;
    ``A``, ``B``, ``C``, ``D`` are their apexes opposite those edges.
    """

    edge: int
    K: int
    L: int
    M: int
    P: int
    Q: int
    R: int
    S: int
    N: int
    W: int
    E: int
    A: int
    B: int
    C: int
    D: int
    O: np.ndarray

    @property
    def cells(self) -> tuple[int, ...]:
        return (self.K, self.L, self.M, self.P, self.Q, self.R)


def _across(mesh: Mesh, v0: int, v1: int, cell: int):
    e = mesh.edge_id(v0, v1)
    k, l = mesh.edge_cells[e]
    other = int(l if k == cell else k)
    if other < 0:
        return None, None
    return other, mesh.opposite_vertex(other, e)


def edge_vicinity(mesh: Mesh, edge: int) -> Optional[Vicinity]:
    """Six-triangle vicinity of an interior edge, or None if incomplete.

    Raises:
        ValueError: if ``edge`` is a boundary edge.
    """
    if mesh.is_boundary(edge):
        raise ValueError(f"edge {edge} is on the boundary; it has no vicinity")
    K, L = (int(c) for c in mesh.edge_cells[edge])
    S, N = (int(v) for v in mesh.edge_vertices[edge])
    W = mesh.opposite_vertex(K, edge)
    E = mesh.opposite_vertex(L, edge)
    M, A = _across(mesh, E, N, L)
    P, B = _across(mesh, W, N, K)
    Q, C = _across(mesh, W, S, K)
    R, D = _across(mesh, S, E, L)
    if None in (M, P, Q, R):
        return None
    if len({K, L, M, P, Q, R}) < 6:
        return None
    O = 0.5 * (mesh.vertices[S] + mesh.vertices[N])
    return Vicinity(edge, K, L, M, P, Q, R, S, N, W, E, A, B, C, D, O)


def write_mesh(mesh: Mesh, sink: IO[str]) -> None:
    sink.write(MESH_HEADER + "\n")
    sink.write(f"{mesh.n_vertices}\n")
    for x, y in mesh.vertices:
        sink.write(f"{x:.17g} {y:.17g}\n")
    sink.write(f"{mesh.n_triangles}\n")
    for a, b, c in mesh.triangles:
        sink.write(f"{a} {b} {c}\n")


def mesh_to_string(mesh: Mesh) -> str:
    buf = io.StringIO()
    write_mesh(mesh, buf)
    return buf.getvalue()


def read_mesh(source: IO[str]) -> Mesh:
    """Parse the text format written by :func:`write_mesh`.

    Blank lines and ``#`` comments are skipped. Errors carry the 1-based
    line number of the offending record.
    """
    lines = [
        (no, raw.split("#", 1)[0].strip())
        for no, raw in enumerate(source.read().splitlines(), start=1)
    ]
    lines = [(no, text) for no, text in lines if text]
    it = iter(lines)

    def next_line(what):
        try:
            return next(it)
        except StopIteration:
            raise MeshParseError(f"unexpected end of file, expected {what}") from None

    no, text = next_line("header")
    if text != MESH_HEADER:
        raise MeshParseError(f"bad header {text!r}, expected {MESH_HEADER!r}", no)

    def count(what):
        no, text = next_line(what)
        try:
            value = int(text)
        except ValueError:
            raise MeshParseError(f"expected {what}, got {text!r}", no) from None
        if value < 0:
            raise MeshParseError(f"negative {what}", no)
        return value

    nv = count("vertex count")
    vertices = np.empty((nv, 2))
    for i in range(nv):
        no, text = next_line(f"vertex {i}")
        parts = text.split()
        try:
            if len(parts) != 2:
                raise ValueError
            vertices[i] = [float(p) for p in parts]
        except ValueError:
            raise MeshParseError(f"vertex {i}: expected two coordinates", no) from None
        if not np.all(np.isfinite(vertices[i])):
            raise MeshParseError(f"vertex {i}: non-finite coordinate", no)

    nt = count("triangle count")
    triangles = np.empty((nt, 3), dtype=np.int64)
    for t in range(nt):
        no, text = next_line(f"triangle {t}")
        parts = text.split()
        try:
            if len(parts) != 3:
                raise ValueError
            triangles[t] = [int(p) for p in parts]
        except ValueError:
            raise MeshParseError(f"triangle {t}: expected three vertex ids", no) from None
        if triangles[t].min() < 0 or triangles[t].max() >= nv:
            raise MeshParseError(f"triangle {t}: vertex id out of range [0, {nv})", no)
        if len(set(triangles[t].tolist())) < 3:
            raise MeshParseError(f"triangle {t}: repeated vertex id", no)
        area = _signed_areas(vertices, triangles[t : t + 1])[0]
        if area <= 0:
            raise MeshParseError(
                f"triangle {t} is not counter-clockwise (signed area {area:.3e})", no
            )
    extra = next(it, None)
    if extra is not None:
        raise MeshParseError("trailing data after triangles", extra[0])

    try:
        mesh = build_mesh(vertices, triangles, {"generator": "file"})
        mesh.validate()
    except (MeshQualityError, MeshTopologyError) as exc:
        raise MeshParseError(str(exc)) from exc
    return mesh


def mesh_from_string(text: str) -> Mesh:
    return read_mesh(io.StringIO(text))
