"""Indexed triangle mesh with adjacency, guarded local edits, and discrete operators.

The mesh is a plain (vertices, faces) pair. Edits (flips, collapses) never
mutate their input: they either return a new mesh or a rejection reason, so a
rejected edit provably leaves the caller's mesh untouched. Every candidate
edit is screened by an :class:`EditGuard` (normal rotation, triangle quality,
manifoldness, link condition) before it is accepted.
"""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

__all__ = [
    "TriMesh",
    "AdjacencyIndex",
    "EditGuard",
    "NonManifoldError",
    "build_adjacency",
    "edge_flip",
    "edge_collapse",
    "simplify_short_edges",
    "cotangent_laplacian",
]


class NonManifoldError(ValueError):
    """An edge borders more than two faces."""

    def __init__(self, edge, count):
        self.edge = (int(edge[0]), int(edge[1]))
        self.count = int(count)
        super().__init__(
            f"non-manifold edge {self.edge}: {self.count} incident faces (max 2)"
        )


class TriMesh:
    """Triangle mesh: ``vertices`` (n, 3) float64 and ``faces`` (m, 3) int64.

    Faces are counterclockwise vertex-index triples. Instances are treated as
    immutable once shared; all edit operations return new meshes.

    Parameters
    ----------
    vertices : array_like
        (n, 3) float coordinates.
    faces : array_like
        (m, 3) integer indices into ``vertices``.
    validate : bool
        Check index bounds, repeated indices and finiteness (default True).
    """

    def __init__(self, vertices, faces, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64).reshape(-1, 3)
        if validate:
            self._validate()

    def _validate(self):
        if not np.isfinite(self.vertices).all():
            raise ValueError("vertices contain non-finite coordinates")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError("face index out of range")
            f = self.faces
            if ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 2] == f[:, 0])).any():
                raise ValueError("face with repeated vertex index")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def copy(self) -> "TriMesh":
        return TriMesh(self.vertices.copy(), self.faces.copy(), validate=False)

    def triangles(self) -> np.ndarray:
        """(m, 3, 3) corner coordinates per face."""
        return self.vertices[self.faces]

    def face_normals(self, normalize=True) -> np.ndarray:
        tri = self.triangles()
        n = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        if normalize:
            lens = np.linalg.norm(n, axis=1, keepdims=True)
            n = np.divide(n, lens, out=np.zeros_like(n), where=lens > 0)
        return n

    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.face_normals(normalize=False), axis=1)

    def face_centroids(self) -> np.ndarray:
        return self.triangles().mean(axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def bounds(self) -> np.ndarray:
        """(2, 3) min/max corner of the bounding box."""
        if not len(self.vertices):
            return np.zeros((2, 3))
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def bbox_diagonal(self) -> float:
        b = self.bounds()
        return float(np.linalg.norm(b[1] - b[0]))

    def median_edge_length(self) -> float:
        adj = build_adjacency(self)
        d = self.vertices[adj.edges[:, 0]] - self.vertices[adj.edges[:, 1]]
        return float(np.median(np.linalg.norm(d, axis=1)))

    def euler_characteristic(self) -> int:
        adj = build_adjacency(self)
        return self.n_vertices - len(adj.edges) + self.n_faces

    def is_edge_manifold(self) -> bool:
        try:
            build_adjacency(self)
        except NonManifoldError:
            return False
        return True

    def __repr__(self):
        return f"TriMesh(V={self.n_vertices}, F={self.n_faces})"


class AdjacencyIndex:
    """Derived incidence tables for a mesh; rebuildable from faces alone.

    Edge identity is the sorted undirected vertex pair; the edge list is
    sorted lexicographically so rebuilding from the same faces is
    byte-identical.

    Attributes
    ----------
    edges : (E, 2) int64
        Sorted vertex pairs, lexicographically ordered.
    edge_faces : (E, 2) int64
        Incident faces per edge, ascending, -1 padding for boundary edges.
    face_edges : (m, 3) int64
        ``face_edges[f, k]`` is the edge between corners k and k+1 of face f.
    face_neighbors : (m, 3) int64
        Neighbor face across ``face_edges[f, k]``, -1 at boundaries.
    """

    def __init__(self, mesh: TriMesh):
        faces = mesh.faces
        m = len(faces)
        he = faces[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        he_sorted = np.sort(he, axis=1)
        edges, inverse, counts = np.unique(
            he_sorted, axis=0, return_inverse=True, return_counts=True
        )
        inverse = inverse.ravel()
        if counts.size and counts.max() > 2:
            bad = int(np.argmax(counts > 2))
            raise NonManifoldError(edges[bad], counts[bad])

        edge_faces = np.full((len(edges), 2), -1, dtype=np.int64)
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)])
        slots = np.arange(len(inverse)) - np.repeat(starts[:-1], counts)
        edge_faces[inverse[order], slots] = order // 3

        face_edges = inverse.reshape(m, 3)
        face_neighbors = np.full((m, 3), -1, dtype=np.int64)
        ef = edge_faces[face_edges]  # (m, 3, 2)
        fid = np.arange(m)[:, None]
        other = np.where(ef[:, :, 0] == fid, ef[:, :, 1], ef[:, :, 0])
        face_neighbors[:] = other

        self.edges = edges
        self.edge_faces = edge_faces
        self.face_edges = face_edges
        self.face_neighbors = face_neighbors
        self.boundary_edge = edge_faces[:, 1] < 0

        n = mesh.n_vertices
        # vertex -> incident faces (CSR, face ids ascending per vertex)
        v = faces.ravel()
        f_rep = np.repeat(np.arange(m, dtype=np.int64), 3)
        vorder = np.lexsort((f_rep, v))
        self.vf_faces = f_rep[vorder]
        self.vf_indptr = np.concatenate([[0], np.cumsum(np.bincount(v, minlength=n))])
        # vertex -> neighbor vertices (CSR, ascending)
        both = np.concatenate([edges, edges[:, ::-1]])
        norder = np.lexsort((both[:, 1], both[:, 0]))
        self.vv_vertices = both[norder, 1]
        self.vv_indptr = np.concatenate(
            [[0], np.cumsum(np.bincount(both[:, 0], minlength=n))]
        )

        self.edge_index = {
            (int(a), int(b)): i for i, (a, b) in enumerate(edges)
        }
        bverts = np.zeros(n, dtype=bool)
        if self.boundary_edge.any():
            bverts[edges[self.boundary_edge].ravel()] = True
        self.boundary_vertex = bverts

    def vertex_faces(self, v: int) -> np.ndarray:
        return self.vf_faces[self.vf_indptr[v]: self.vf_indptr[v + 1]]

    def vertex_neighbors(self, v: int) -> np.ndarray:
        return self.vv_vertices[self.vv_indptr[v]: self.vv_indptr[v + 1]]

    def lookup_edge(self, a: int, b: int) -> int | None:
        key = (a, b) if a < b else (b, a)
        return self.edge_index.get(key)


def build_adjacency(mesh: TriMesh) -> AdjacencyIndex:
    """Build the incidence tables for ``mesh``.

    Raises :class:`NonManifoldError` if any edge borders more than two faces.
    """
    return AdjacencyIndex(mesh)


@dataclass
class EditGuard:
    """Invariant checklist applied to every candidate edit.

    Attributes
    ----------
    max_normal_rotation : float
        Largest allowed rotation of any affected face normal, radians.
    min_triangle_angle : float
        Smallest allowed interior angle of any resulting triangle, radians.
    require_manifold : bool
        Reject edits that would break edge-manifoldness.
    require_link_condition : bool
        Apply the link condition to collapses.
    """

    max_normal_rotation: float = np.deg2rad(75.0)
    min_triangle_angle: float = np.deg2rad(1.0)
    require_manifold: bool = True
    require_link_condition: bool = True

    def __post_init__(self):
        if not (0 < self.max_normal_rotation < np.pi):
            raise ValueError("max_normal_rotation must be in (0, pi)")
        if not (0 < self.min_triangle_angle < np.pi / 3):
            raise ValueError("min_triangle_angle must be in (0, pi/3)")


def _triangle_normal_area(p0, p1, p2):
    n = np.cross(p1 - p0, p2 - p0)
    a = 0.5 * np.linalg.norm(n)
    return (n / (2.0 * a) if a > 0 else np.zeros(3)), a


def _min_angle(p0, p1, p2) -> float:
    e = np.array([p1 - p0, p2 - p1, p0 - p2])
    lens = np.linalg.norm(e, axis=1)
    if (lens == 0).any():
        return 0.0
    # law of cosines per corner
    a, b, c = lens
    cosines = np.array(
        [
            (a * a + c * c - b * b) / (2 * a * c),
            (a * a + b * b - c * c) / (2 * a * b),
            (b * b + c * c - a * a) / (2 * b * c),
        ]
    )
    return float(np.arccos(np.clip(cosines, -1.0, 1.0)).min())


def _rotation_angle(n_old, n_new) -> float:
    if not n_old.any() or not n_new.any():
        return np.pi
    return float(np.arccos(np.clip(np.dot(n_old, n_new), -1.0, 1.0)))


def _area_floor(mesh: TriMesh) -> float:
    d = mesh.bbox_diagonal()
    return 1e-12 * d * d if d > 0 else 1e-300


def _check_new_triangle(p0, p1, p2, old_normals, guard: EditGuard, area_floor):
    """Degeneracy / quality / rotation screen shared by flips and collapses.

    ``old_normals`` is the list of reference normals; the new normal must stay
    within the guard rotation of at least one of them.
    """
    n, a = _triangle_normal_area(p0, p1, p2)
    if not np.isfinite((p0, p1, p2)).all():
        return "non-finite coordinates"
    if a <= area_floor:
        return "degenerate triangle"
    if _min_angle(p0, p1, p2) < guard.min_triangle_angle:
        return "triangle angle below guard minimum"
    rot = min(_rotation_angle(o, n) for o in old_normals)
    if rot > guard.max_normal_rotation:
        return "normal rotation exceeds guard"
    return None


def _resolve_edge(adj: AdjacencyIndex, edge):
    if isinstance(edge, (int, np.integer)):
        if not 0 <= edge < len(adj.edges):
            raise ValueError(f"edge id {edge} out of range")
        return int(edge)
    a, b = int(edge[0]), int(edge[1])
    eid = adj.lookup_edge(a, b)
    if eid is None:
        raise ValueError(f"edge {(a, b)} does not exist")
    return eid


def _flip_quad(mesh: TriMesh, adj: AdjacencyIndex, eid: int):
    """Return (a, b, c, d, f_ab, f_ba) where face f_ab traverses a->b and has
    opposite vertex c, and f_ba traverses b->a with opposite vertex d."""
    a, b = (int(x) for x in adj.edges[eid])
    f1, f2 = (int(x) for x in adj.edge_faces[eid])
    tri1 = mesh.faces[f1]
    i_a = int(np.where(tri1 == a)[0][0])
    if tri1[(i_a + 1) % 3] == b:  # f1 traverses a -> b
        c = int(tri1[(i_a + 2) % 3])
        d = int(np.setdiff1d(mesh.faces[f2], (a, b))[0])
        return a, b, c, d, f1, f2
    c = int(np.setdiff1d(mesh.faces[f2], (a, b))[0])
    d = int(tri1[(i_a + 1) % 3] if tri1[(i_a + 1) % 3] not in (a, b) else tri1[(i_a + 2) % 3])
    return a, b, c, d, f2, f1


def check_flip(mesh: TriMesh, adj: AdjacencyIndex, eid: int, guard: EditGuard,
               area_floor=None, extra_edges=None):
    """Validate flipping edge ``eid``; return (quad, None) or (None, reason).

    ``extra_edges`` is an optional set of packed ``a * n + b`` keys counting as
    already existing (used when several flips are validated as a batch).
    """
    if adj.edge_faces[eid, 1] < 0:
        return None, "boundary edge"
    a, b, c, d, f_ab, f_ba = _flip_quad(mesh, adj, eid)
    lo, hi = (c, d) if c < d else (d, c)
    if adj.lookup_edge(lo, hi) is not None:
        return None, "flip would duplicate an existing edge"
    if extra_edges is not None and (lo, hi) in extra_edges:
        return None, "flip would duplicate an edge created in this batch"
    if area_floor is None:
        area_floor = _area_floor(mesh)
    V = mesh.vertices
    pa, pb, pc, pd = V[a], V[b], V[c], V[d]
    n1, _ = _triangle_normal_area(pa, pb, pc)
    n2, _ = _triangle_normal_area(pb, pa, pd)
    old = [n1, n2]
    reason = _check_new_triangle(pa, pd, pc, old, guard, area_floor)
    if reason is None:
        reason = _check_new_triangle(pd, pb, pc, old, guard, area_floor)
    if reason is not None:
        return None, reason
    return (a, b, c, d, f_ab, f_ba), None


def edge_flip(mesh: TriMesh, edge, guard: EditGuard | None = None,
              adjacency: AdjacencyIndex | None = None):
    """Flip an interior edge, replacing diagonal (a, b) with (c, d).

    Parameters
    ----------
    edge : int or (int, int)
        Edge id into the adjacency edge list, or an undirected vertex pair.

    Returns
    -------
    (TriMesh, None) on acceptance, (None, str) with the rejection reason
    otherwise. The input mesh is never modified.
    """
    guard = guard or EditGuard()
    adj = adjacency or build_adjacency(mesh)
    eid = _resolve_edge(adj, edge)
    quad, reason = check_flip(mesh, adj, eid, guard)
    if reason is not None:
        return None, reason
    a, b, c, d, f_ab, f_ba = quad
    faces = mesh.faces.copy()
    faces[f_ab] = (a, d, c)
    faces[f_ba] = (d, b, c)
    return TriMesh(mesh.vertices, faces, validate=False), None


def _collapse_checks(mesh, adj, a, b, guard, target_pos, area_floor):
    """Link condition plus geometric guard for collapsing b into a."""
    eid = adj.lookup_edge(a, b)
    opposite = set()
    for f in adj.edge_faces[eid]:
        if f >= 0:
            opposite.add(int(np.setdiff1d(mesh.faces[f], (a, b))[0]))
    if guard.require_link_condition:
        na = set(int(x) for x in adj.vertex_neighbors(a))
        nb = set(int(x) for x in adj.vertex_neighbors(b))
        if (na & nb) != opposite:
            return "link condition violated (common neighbors beyond shared faces)"
        if (
            adj.boundary_vertex[a]
            and adj.boundary_vertex[b]
            and not adj.boundary_edge[eid]
        ):
            return "link condition violated (interior edge between boundary vertices)"
        # duplicate-face variant: faces (a, x, y) and (b, x, y) both present
        faces_a = {frozenset(mesh.faces[f]) for f in adj.vertex_faces(a)}
        for f in adj.vertex_faces(b):
            tri = mesh.faces[f]
            if a in tri or b not in tri:
                continue
            merged = frozenset(int(x) if x != b else a for x in tri)
            if merged in faces_a:
                return "link condition violated (collapse duplicates a face)"
    V = mesh.vertices
    survivors = [
        f
        for f in np.union1d(adj.vertex_faces(a), adj.vertex_faces(b))
        if not (a in mesh.faces[f] and b in mesh.faces[f])
    ]
    for f in survivors:
        tri = mesh.faces[f]
        old_n, _ = _triangle_normal_area(V[tri[0]], V[tri[1]], V[tri[2]])
        pts = [target_pos if v in (a, b) else V[v] for v in tri]
        reason = _check_new_triangle(pts[0], pts[1], pts[2], [old_n], guard, area_floor)
        if reason is not None:
            return reason
    return None


def edge_collapse(mesh: TriMesh, edge, target="midpoint",
                  guard: EditGuard | None = None,
                  adjacency: AdjacencyIndex | None = None):
    """Collapse an edge, merging its two vertices into one.

    Parameters
    ----------
    target : {'midpoint', 'endpoint'} or array_like
        Placement of the merged vertex: edge midpoint, the lower-id endpoint,
        or an explicit position.

    Returns
    -------
    (TriMesh, None) on acceptance, (None, str) otherwise. The surviving
    vertex is the lower-id endpoint; the other vertex is removed and indices
    above it shift down by one.
    """
    guard = guard or EditGuard()
    adj = adjacency or build_adjacency(mesh)
    eid = _resolve_edge(adj, edge)
    a, b = (int(x) for x in adj.edges[eid])
    if isinstance(target, str):
        if target == "midpoint":
            pos = 0.5 * (mesh.vertices[a] + mesh.vertices[b])
        elif target == "endpoint":
            pos = mesh.vertices[a].copy()
        else:
            raise ValueError(f"unknown collapse target {target!r}")
    else:
        pos = np.asarray(target, dtype=np.float64).reshape(3)
    area_floor = _area_floor(mesh)
    reason = _collapse_checks(mesh, adj, a, b, guard, pos, area_floor)
    if reason is not None:
        return None, reason

    faces = mesh.faces.copy()
    dead = (faces == a).any(axis=1) & (faces == b).any(axis=1)
    faces[faces == b] = a
    faces = faces[~dead]
    vertices = mesh.vertices.copy()
    vertices[a] = pos
    vertices = np.delete(vertices, b, axis=0)
    faces[faces > b] -= 1
    return TriMesh(vertices, faces, validate=False), None


class _CollapseEditor:
    """Mutable scratch structure for running many collapses efficiently."""

    def __init__(self, mesh: TriMesh, guard: EditGuard):
        self.guard = guard
        self.pos = mesh.vertices.copy()
        self.faces = mesh.faces.copy()
        self.vertex_faces = [set() for _ in range(len(self.pos))]
        for f, tri in enumerate(self.faces):
            for v in tri:
                self.vertex_faces[v].add(f)
        self.alive = np.ones(len(self.faces), dtype=bool)
        self.n_alive = len(self.faces)
        self.area_floor = _area_floor(mesh)
        adj = build_adjacency(mesh)
        self.boundary_vertex = adj.boundary_vertex.copy()
        self._bedges = {
            (int(e[0]), int(e[1])) for e in adj.edges[adj.boundary_edge]
        }

    def neighbors(self, v):
        out = set()
        for f in self.vertex_faces[v]:
            for u in self.faces[f]:
                if u != v:
                    out.add(int(u))
        return out

    def edge_alive(self, a, b):
        return any(b in self.faces[f] for f in self.vertex_faces[a])

    def length(self, a, b):
        return float(np.linalg.norm(self.pos[a] - self.pos[b]))

    def _target(self, a, b):
        ba, bb = self.boundary_vertex[a], self.boundary_vertex[b]
        if ba and not bb:
            return self.pos[a].copy()
        if bb and not ba:
            return self.pos[b].copy()
        return 0.5 * (self.pos[a] + self.pos[b])

    def try_collapse(self, a, b):
        """Collapse b into a (after possibly swapping to keep boundary fixed).

        Returns the surviving vertex id on success, None on rejection.
        """
        shared = [f for f in self.vertex_faces[a] if b in self.faces[f]]
        if not shared:
            return None
        opposite = set()
        for f in shared:
            opposite.add(int(np.setdiff1d(self.faces[f], (a, b))[0]))
        na, nb = self.neighbors(a), self.neighbors(b)
        if (na & nb) != opposite:
            return None
        key = (a, b) if a < b else (b, a)
        if (
            self.boundary_vertex[a]
            and self.boundary_vertex[b]
            and key not in self._bedges
        ):
            return None
        if self.boundary_vertex[b] and not self.boundary_vertex[a]:
            a, b = b, a
        pos = self._target(a, b)
        # duplicate-face screen
        faces_a = {
            frozenset(int(x) for x in self.faces[f]) for f in self.vertex_faces[a]
        }
        for f in self.vertex_faces[b]:
            tri = self.faces[f]
            if a in tri:
                continue
            merged = frozenset(int(x) if x != b else a for x in tri)
            if merged in faces_a:
                return None
        # geometric guard on all surviving faces
        survivors = (self.vertex_faces[a] | self.vertex_faces[b]) - set(shared)
        for f in survivors:
            tri = self.faces[f]
            old_n, _ = _triangle_normal_area(*(self.pos[v] for v in tri))
            pts = [pos if v in (a, b) else self.pos[v] for v in tri]
            if _check_new_triangle(
                pts[0], pts[1], pts[2], [old_n], self.guard, self.area_floor
            ) is not None:
                return None
        # commit
        for f in shared:
            self.alive[f] = False
            self.n_alive -= 1
            for v in self.faces[f]:
                self.vertex_faces[v].discard(f)
        for f in list(self.vertex_faces[b]):
            tri = self.faces[f]
            tri[tri == b] = a
            self.vertex_faces[b].discard(f)
            self.vertex_faces[a].add(f)
        self.pos[a] = pos
        self.boundary_vertex[a] = self.boundary_vertex[a] or self.boundary_vertex[b]
        if self.boundary_vertex[a]:
            # keep the boundary-edge set usable for later screens
            for u in self.neighbors(a):
                k = (a, u) if a < u else (u, a)
                old = (b, u) if b < u else (u, b)
                if old in self._bedges:
                    self._bedges.discard(old)
                    self._bedges.add(k)
        return a

    def to_mesh(self) -> TriMesh:
        faces = self.faces[self.alive]
        used = np.unique(faces)
        remap = np.full(len(self.pos), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return TriMesh(self.pos[used], remap[faces], validate=False)


def simplify_short_edges(mesh: TriMesh, face_fraction: float,
                         lam: float | None = None,
                         alpha_short: float | None = None,
                         guard: EditGuard | None = None) -> TriMesh:
    """Repeatedly collapse the shortest edges until a face budget is met.

    Collapses are ordered by edge length (ties broken by vertex pair),
    placed at the midpoint (boundary endpoints stay fixed), and individually
    screened by the guard and the link condition. Stops when the number of
    faces drops to ``face_fraction`` of the input, when every remaining
    collapse is rejected, or (if ``alpha_short`` and ``lam`` are given) when
    the shortest remaining edge exceeds ``alpha_short * lam``.
    """
    if not 0 < face_fraction <= 1:
        raise ValueError("face_fraction must be in (0, 1]")
    guard = guard or EditGuard()
    if face_fraction == 1.0 and alpha_short is None:
        return mesh
    target = int(np.ceil(face_fraction * mesh.n_faces))
    editor = _CollapseEditor(mesh, guard)
    adj = build_adjacency(mesh)
    length_cap = alpha_short * lam if (alpha_short is not None and lam) else None

    heap = []
    for a, b in adj.edges:
        a, b = int(a), int(b)
        heapq.heappush(heap, (editor.length(a, b), a, b))
    collapsed = 0
    while heap and editor.n_alive > target:
        length, a, b = heapq.heappop(heap)
        if not editor.edge_alive(a, b):
            continue
        if editor.length(a, b) != length:
            continue  # stale entry; a fresh one is already queued
        if length_cap is not None and length > length_cap:
            break
        survivor = editor.try_collapse(a, b)
        if survivor is None:
            continue
        collapsed += 1
        for u in sorted(editor.neighbors(survivor)):
            heapq.heappush(heap, (editor.length(survivor, u), *sorted((survivor, u))))
    if collapsed == 0:
        logger.warning(
            "simplify_short_edges: no collapse passed the guard; mesh unchanged"
        )
        return mesh
    return editor.to_mesh()


def cotangent_laplacian(mesh: TriMesh, values, adjacency=None, clamp=1e4,
                        return_clamp_count=False):
    """Normalized cotangent Laplacian of a per-vertex scalar field.

    Computes ``(1/Z) * sum_u w_vu * f(u) - f(v)`` with cotangent weights
    ``w_vu`` and ``Z = sum_u w_vu``; boundary vertices use the weights of the
    faces that exist (one-sided). Cotangents of degenerate corners are clamped
    to ``clamp`` in magnitude and the number of clamped entries is reported.

    Parameters
    ----------
    values : (n,) array
        Scalar field, one value per vertex.

    Returns
    -------
    (n,) array, or (array, n_clamped) if ``return_clamp_count``.
    """
    f = np.asarray(values, dtype=np.float64).reshape(-1)
    if len(f) != mesh.n_vertices:
        raise ValueError("field length does not match vertex count")
    tri = mesh.triangles()
    n_clamped = 0
    rows, cols, vals = [], [], []
    for k in range(3):
        i = mesh.faces[:, (k + 1) % 3]
        j = mesh.faces[:, (k + 2) % 3]
        pk = tri[:, k]
        u = tri[:, (k + 1) % 3] - pk
        v = tri[:, (k + 2) % 3] - pk
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        dot = (u * v).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            cot = np.where(cross > 0, dot / np.where(cross > 0, cross, 1.0),
                           np.sign(dot) * clamp)
        over = np.abs(cot) > clamp
        n_clamped += int(over.sum()) + int((cross == 0).sum())
        cot = np.clip(cot, -clamp, clamp)
        rows.append(i)
        cols.append(j)
        vals.append(cot)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = 0.5 * np.concatenate(vals)
    n = mesh.n_vertices
    # difference form: exactly zero for constant fields
    diff = vals * (f[cols] - f[rows])
    num = np.bincount(rows, weights=diff, minlength=n) \
        - np.bincount(cols, weights=diff, minlength=n)
    Z = np.bincount(rows, weights=vals, minlength=n) \
        + np.bincount(cols, weights=vals, minlength=n)
    out = np.where(np.abs(Z) > 1e-12, num / np.where(Z != 0, Z, 1.0), 0.0)
    if n_clamped:
        logger.debug("cotangent_laplacian: %d cotangent(s) clamped", n_clamped)
    if return_clamp_count:
        return out, n_clamped
    return out
