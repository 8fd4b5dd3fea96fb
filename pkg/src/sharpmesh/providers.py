"""Uniform interface for obtaining guidance fields on a patch.

A provider answers three per-patch queries: vertex distances to features,
vertex directions to features, and per-edge surface improvement. Built-ins:
an oracle (exact fields from ground truth), a ground-truth-free heuristic,
and a file adapter for externally predicted fields. Providers declare their
capabilities and decline queries they cannot answer instead of fabricating
values; everything they return is clamped/renormalized at the interface
boundary and violations are counted.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from scipy.sparse.csgraph import dijkstra

from .correspond import correspondence_map, default_density
from .curves import FeatureCurveSet
from .fields import EdgeField, VertexField, sanitize_direction, sanitize_distance
from .guidance import distance_direction_fields, surface_improvement_field
from .mesh import EditGuard, TriMesh, build_adjacency
from .patches import Patch, _edge_graph
from .spatial import PolylineLocator, SurfaceLocator

logger = logging.getLogger(__name__)

__all__ = [
    "FieldUnavailable",
    "FieldProvider",
    "OracleFieldProvider",
    "HeuristicFieldProvider",
    "FileFieldProvider",
]

DISTANCE = "distance"
DIRECTION = "direction"
IMPROVEMENT = "improvement"


class FieldUnavailable(RuntimeError):
    """The provider does not support the requested field."""


class FieldProvider:
    """Base provider: capability gating plus boundary sanitation.

    Subclasses implement ``_distance``, ``_direction``, ``_improvement`` for
    the capabilities they declare. ``violation_counts`` tallies values the
    boundary had to clamp or renormalize.
    """

    provenance = "unknown"
    #: exact fields need no reliability screening during fusion
    exact_fields = False

    def __init__(self, epsilon: float):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.epsilon = float(epsilon)
        self.violation_counts = {DISTANCE: 0, DIRECTION: 0}

    def capabilities(self) -> frozenset:
        return frozenset()

    def _require(self, capability):
        if capability not in self.capabilities():
            raise FieldUnavailable(
                f"{self.provenance} provider has no {capability} capability"
            )

    def vertex_distance(self, patch: Patch) -> VertexField:
        self._require(DISTANCE)
        values, fixed = sanitize_distance(self._distance(patch), self.epsilon)
        self.violation_counts[DISTANCE] += fixed
        if fixed:
            logger.warning("%s provider: clamped %d distance value(s)",
                           self.provenance, fixed)
        return VertexField(values, epsilon=self.epsilon)

    def vertex_direction(self, patch: Patch) -> VertexField:
        self._require(DIRECTION)
        values, fixed = sanitize_direction(self._direction(patch))
        self.violation_counts[DIRECTION] += fixed
        if fixed:
            logger.warning("%s provider: renormalized %d direction value(s)",
                           self.provenance, fixed)
        return VertexField(values, epsilon=self.epsilon)

    def edge_improvement(self, patch: Patch) -> EdgeField:
        self._require(IMPROVEMENT)
        return self._improvement(patch)

    def _distance(self, patch):
        raise NotImplementedError

    def _direction(self, patch):
        raise NotImplementedError

    def _improvement(self, patch):
        raise NotImplementedError


class OracleFieldProvider(FieldProvider):
    """Exact fields computed from the ground-truth mesh and feature curves.

    Per-patch values coincide with the whole-shape fields restricted to the
    patch, so fusing overlapping oracle patches reproduces the whole-shape
    fields exactly.
    """

    provenance = "oracle"
    exact_fields = True

    def __init__(self, gt: TriMesh, curves: FeatureCurveSet, epsilon: float,
                 density: float | None = None, seed: int = 0,
                 guard: EditGuard | None = None):
        super().__init__(epsilon)
        self.gt = gt
        self.curves = curves
        self.density = density
        self.seed = int(seed)
        self.guard = guard or EditGuard()
        self._curve_locator = (
            PolylineLocator(curves.curves) if len(curves) else None
        )
        self._gt_locator = SurfaceLocator(gt)

    def capabilities(self):
        return frozenset({DISTANCE, DIRECTION, IMPROVEMENT})

    def _fields(self, patch):
        return distance_direction_fields(
            patch.mesh, self.curves, self.epsilon, locator=self._curve_locator
        )

    def _distance(self, patch):
        return self._fields(patch)[0].values

    def _direction(self, patch):
        return self._fields(patch)[1].values

    def _improvement(self, patch):
        density = self.density
        if density is None:
            density = default_density(patch.mesh)
        cmap = correspondence_map(
            patch.mesh, self.gt, density, seed=self.seed,
            vertex_keys=patch.vertex_ids, locator=self._gt_locator,
        )
        return surface_improvement_field(
            patch.mesh, self.gt, cmap, guard=self.guard,
            gt_locator=self._gt_locator, vertex_keys=patch.vertex_ids,
        )


class HeuristicFieldProvider(FieldProvider):
    """Ground-truth-free baseline fields from the patch geometry alone.

    Creases are edges whose dihedral angle exceeds ``theta_feat``. Distances
    diffuse outward from crease vertices along edges (truncated); directions
    point at the nearest crease vertex. Improvement scores each flip against
    a local two-plane fit of nearby face normals.
    """

    provenance = "heuristic"

    def __init__(self, epsilon: float, theta_feat_deg: float = 40.0,
                 guard: EditGuard | None = None):
        super().__init__(epsilon)
        self.theta_feat = np.deg2rad(theta_feat_deg)
        self.guard = guard or EditGuard()

    def capabilities(self):
        return frozenset({DISTANCE, DIRECTION, IMPROVEMENT})

    def _crease_vertices(self, mesh, adj):
        normals = mesh.face_normals()
        ef = adj.edge_faces
        interior = ~adj.boundary_edge
        dots = np.ones(len(adj.edges))
        dots[interior] = (
            normals[ef[interior, 0]] * normals[ef[interior, 1]]
        ).sum(axis=1)
        crease = interior & (dots < np.cos(self.theta_feat))
        verts = np.zeros(mesh.n_vertices, dtype=bool)
        verts[adj.edges[crease].ravel()] = True
        return verts

    def _distance_direction(self, patch):
        mesh = patch.mesh
        adj = build_adjacency(mesh)
        crease = self._crease_vertices(mesh, adj)
        n = mesh.n_vertices
        d = np.full(n, self.epsilon)
        r = np.zeros((n, 3))
        if crease.any():
            graph, _ = _edge_graph(mesh, adj)
            sources = np.nonzero(crease)[0]
            dist = dijkstra(graph, directed=False, indices=sources,
                            limit=self.epsilon, min_only=True)
            d = np.minimum(dist, self.epsilon)
            crease_pos = mesh.vertices[sources]
            for i in range(n):
                if crease[i] or d[i] >= self.epsilon:
                    continue
                delta = crease_pos - mesh.vertices[i]
                j = int(np.argmin((delta ** 2).sum(axis=1)))
                norm = np.linalg.norm(delta[j])
                if norm > 1e-12:
                    r[i] = delta[j] / norm
            d[crease] = 0.0
        return d, r

    def _distance(self, patch):
        return self._distance_direction(patch)[0]

    def _direction(self, patch):
        return self._distance_direction(patch)[1]

    def _improvement(self, patch):
        mesh = patch.mesh
        adj = build_adjacency(mesh)
        normals = mesh.face_normals()
        areas = mesh.face_areas()
        centroids = mesh.face_centroids()
        values = np.zeros(len(adj.edges))
        from .mesh import check_flip, _area_floor, _flip_quad

        area_floor = _area_floor(mesh)
        for eid in range(len(adj.edges)):
            if adj.boundary_edge[eid]:
                continue
            quad, reason = check_flip(mesh, adj, eid, self.guard, area_floor)
            if reason is not None:
                continue
            a, b, c, d, f_ab, f_ba = quad
            ring = self._local_faces(mesh, adj, (a, b, c, d))
            # the edge's own faces are the ones in question; the surrounding
            # ring defines the local two-plane model
            ring = ring[(ring != f_ab) & (ring != f_ba)]
            if len(ring) == 0:
                continue
            planes = _two_plane_fit(normals[ring], areas[ring], centroids[ring])
            V = mesh.vertices
            old = _two_plane_nc(
                [(V[a], V[b], V[c]), (V[b], V[a], V[d])], planes
            )
            new = _two_plane_nc(
                [(V[a], V[d], V[c]), (V[d], V[b], V[c])], planes
            )
            values[eid] = old - new
        return EdgeField(adj.edges, values)

    @staticmethod
    def _local_faces(mesh, adj, verts):
        out = set()
        for v in verts:
            out.update(int(f) for f in adj.vertex_faces(v))
        return np.array(sorted(out), dtype=np.int64)


def _two_plane_fit(normals, areas, centroids, iters=8):
    """Fit two planes to weighted face normals (farthest-pair k-means init).

    Returns [(normal, offset), (normal, offset)]; degenerates to one plane
    when all normals agree.
    """
    if len(normals) == 1:
        n = normals[0]
        return [(n, float(n @ centroids[0]))] * 2
    dots = normals @ normals.T
    i, j = np.unravel_index(np.argmin(dots), dots.shape)
    centers = np.stack([normals[i], normals[j]])
    assign = np.zeros(len(normals), dtype=np.int64)
    for _ in range(iters):
        assign = np.argmax(normals @ centers.T, axis=1)
        for k in range(2):
            m = assign == k
            if not m.any():
                continue
            c = (normals[m] * areas[m, None]).sum(axis=0)
            norm = np.linalg.norm(c)
            if norm > 1e-12:
                centers[k] = c / norm
    planes = []
    for k in range(2):
        m = assign == k
        if not m.any():
            m = ~m
        w = areas[m]
        offset = float((centroids[m] @ centers[k] * w).sum() / w.sum())
        planes.append((centers[k], offset))
    return planes


def _two_plane_nc(triangles, planes):
    """Mean normal gap of faces against the nearer of two fitted planes,
    probed at the centroid and the three edge midpoints."""
    total = 0.0
    for (p0, p1, p2) in triangles:
        n = np.cross(p1 - p0, p2 - p0)
        norm = np.linalg.norm(n)
        if norm <= 0:
            total += 2.0
            continue
        n = n / norm
        probes = [
            (p0 + p1 + p2) / 3.0,
            (p0 + p1) / 2.0,
            (p1 + p2) / 2.0,
            (p2 + p0) / 2.0,
        ]
        acc = 0.0
        for q in probes:
            d0 = abs(planes[0][0] @ q - planes[0][1])
            d1 = abs(planes[1][0] @ q - planes[1][1])
            pn = planes[0][0] if d0 <= d1 else planes[1][0]
            acc += float(np.linalg.norm(n - pn))
        total += acc / len(probes)
    return total / len(triangles)


class FileFieldProvider(FieldProvider):
    """Fields preloaded from sidecar files keyed against a named mesh.

    Expected sidecars next to (or named after) the mesh: ``<stem>.dist.csv``
    (``vertex_index,value``), ``<stem>.dir.csv`` (``vertex_index,x,y,z``) and
    ``<stem>.simp.csv`` (``v_a,v_b,value`` keyed by the edge's vertex pair).
    Capabilities follow the files that exist. Vertex ids refer to the named
    mesh; edges created by later topology edits simply score zero.
    """

    provenance = "external"

    def __init__(self, mesh: TriMesh, base: str | Path, epsilon: float):
        super().__init__(epsilon)
        from . import io as _io

        base = Path(base)
        if base.is_dir():
            candidates = sorted(base.glob("*.dist.csv"))
            stem = candidates[0].name[: -len(".dist.csv")] if candidates else None
            if stem is None:
                others = sorted(base.glob("*.dir.csv")) + sorted(
                    base.glob("*.simp.csv")
                )
                if not others:
                    raise FileNotFoundError(
                        f"no field sidecars (*.dist.csv, *.dir.csv, *.simp.csv) "
                        f"in {base}"
                    )
                stem = others[0].name.rsplit(".", 2)[0]
            base = base / stem
        self._dist = None
        self._dir = None
        self._simp = None
        n = mesh.n_vertices
        dist_path = Path(str(base) + ".dist.csv")
        if dist_path.exists():
            values = _io.read_vertex_field_csv(dist_path, n, width=1)
            values, fixed = sanitize_distance(values, self.epsilon)
            self.violation_counts[DISTANCE] += fixed
            self._dist = values
        dir_path = Path(str(base) + ".dir.csv")
        if dir_path.exists():
            values = _io.read_vertex_field_csv(dir_path, n, width=3)
            values, fixed = sanitize_direction(values)
            self.violation_counts[DIRECTION] += fixed
            self._dir = values
        simp_path = Path(str(base) + ".simp.csv")
        if simp_path.exists():
            adj = build_adjacency(mesh)
            self._simp = _io.read_edge_field_csv(simp_path, adj)
        if self._dist is None and self._dir is None and self._simp is None:
            raise FileNotFoundError(f"no field sidecars found at {base}.*")

    def capabilities(self):
        caps = set()
        if self._dist is not None:
            caps.add(DISTANCE)
        if self._dir is not None:
            caps.add(DIRECTION)
        if self._simp is not None:
            caps.add(IMPROVEMENT)
        return frozenset(caps)

    def _distance(self, patch):
        return self._dist[patch.vertex_ids]

    def _direction(self, patch):
        return self._dir[patch.vertex_ids]

    def _improvement(self, patch):
        adj = build_adjacency(patch.mesh)
        glob = np.sort(patch.vertex_ids[adj.edges], axis=1)
        values = np.array(
            [self._simp.get((int(a), int(b)), 0.0) for a, b in glob]
        )
        return EdgeField(adj.edges, values)
