"""Patch extraction from large meshes and fusion of overlapping per-patch
field predictions back onto the whole shape."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .curves import FeatureCurveSet
from .fields import EdgeField, VertexField
from .mesh import TriMesh, build_adjacency
from .spatial import SurfaceLocator

logger = logging.getLogger(__name__)

__all__ = [
    "Patch",
    "FusionConfig",
    "poisson_seeds",
    "crop_patch",
    "refresh_patch",
    "select_interior_features",
    "fuse_vertex_fields",
    "fuse_edge_fields",
]

MAX_SEEDS = 1000


@dataclass
class Patch:
    """Connected submesh of a parent mesh with its id maps.

    ``vertex_ids[i]`` and ``face_ids[j]`` are the parent indices of
    patch-local vertex ``i`` / face ``j``.
    """

    mesh: TriMesh
    vertex_ids: np.ndarray
    face_ids: np.ndarray
    seed_point: np.ndarray
    radius: float

    def __post_init__(self):
        self.vertex_ids = np.asarray(self.vertex_ids, dtype=np.int64)
        self.face_ids = np.asarray(self.face_ids, dtype=np.int64)
        self.seed_point = np.asarray(self.seed_point, dtype=np.float64).reshape(3)

    @property
    def n_vertices(self):
        return self.mesh.n_vertices


@dataclass
class FusionConfig:
    """Controls fusion of per-patch predictions.

    A distance-field patch is excluded when its ``alpha_exclude`` quantile
    exceeds ``exclude_threshold`` (half a grid spacing by default): the whole
    patch sits too far from any feature to contribute reliably. The rule
    guards against unreliable predictions; exact sources disable it via
    ``exclude=False``.
    """

    alpha_exclude: float = 0.10
    exclude_threshold_mult: float = 0.5  # multiplied by the grid spacing
    weighting: str = "uniform"  # or "area"
    exclude: bool = True

    def __post_init__(self):
        if not 0 < self.alpha_exclude < 1:
            raise ValueError("alpha_exclude must be in (0, 1)")
        if self.weighting not in ("uniform", "area"):
            raise ValueError("weighting must be 'uniform' or 'area'")


def poisson_seeds(mesh: TriMesh, spacing: float, seed: int = 0,
                  max_seeds: int = MAX_SEEDS) -> np.ndarray:
    """Poisson-disk sample points on the mesh surface.

    Dart throwing over area-uniform candidates: accepted points are pairwise
    at least ``spacing`` apart (Euclidean); at most ``max_seeds`` points are
    returned.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if mesh.n_faces == 0:
        raise ValueError("cannot seed an empty mesh")
    area = mesh.area()
    n_cand = int(np.clip(20 * area / (spacing * spacing), 256, 200000))
    rng = np.random.default_rng(seed)
    cand = _area_uniform_samples(mesh, n_cand, rng)[0]
    accepted = np.empty((0, 3))
    picked = []
    for i, p in enumerate(cand):
        if len(picked) >= max_seeds:
            break
        if len(picked):
            d2 = ((accepted[: len(picked)] - p) ** 2).sum(axis=1)
            if d2.min() < spacing * spacing:
                continue
        if len(picked) == len(accepted):
            accepted = np.vstack([accepted, np.empty((max(64, len(accepted)), 3))])
        accepted[len(picked)] = p
        picked.append(i)
    return accepted[: len(picked)].copy()


def _area_uniform_samples(mesh: TriMesh, n: int, rng):
    """(points, face ids) of n area-uniform samples (sequential RNG)."""
    areas = mesh.face_areas()
    cum = np.cumsum(areas)
    if cum[-1] <= 0:
        raise ValueError("mesh has zero total area")
    face = np.searchsorted(cum, rng.random(n) * cum[-1])
    face = np.minimum(face, mesh.n_faces - 1)
    u = rng.random(n)
    v = rng.random(n)
    over = u + v > 1
    u[over] = 1 - u[over]
    v[over] = 1 - v[over]
    tri = mesh.vertices[mesh.faces[face]]
    pts = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) \
        + v[:, None] * (tri[:, 2] - tri[:, 0])
    return pts, face


def _edge_graph(mesh: TriMesh, adjacency):
    adj = adjacency or build_adjacency(mesh)
    e = adj.edges
    w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
    n = mesh.n_vertices
    g = coo_matrix(
        (np.concatenate([w, w]),
         (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))),
        shape=(n, n),
    )
    return g.tocsr(), adj


def crop_patch(mesh: TriMesh, seed_point, radius: float, n_v: int = 2000,
               adjacency=None, locator: SurfaceLocator | None = None) -> Patch:
    """Cut the connected submesh within graph-geodesic ``radius`` of a seed.

    The source is the mesh vertex nearest to the seed point; a face belongs
    to the patch when all three vertices are within the geodesic radius. If
    that exceeds ``n_v`` vertices the radius shrinks to the largest admissible
    value. The result is the face-connected component around the source.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    seed_point = np.asarray(seed_point, dtype=np.float64).reshape(3)
    locator = locator or SurfaceLocator(mesh)
    d_surf, _, _ = locator.query(seed_point[None])
    if d_surf[0] > radius:
        raise ValueError(
            f"seed point is {d_surf[0]:.3g} from the surface, beyond the "
            f"patch radius {radius:.3g}"
        )
    graph, adj = _edge_graph(mesh, adjacency)
    src = int(np.argmin(((mesh.vertices - seed_point) ** 2).sum(axis=1)))
    dist = dijkstra(graph, directed=False, indices=src, limit=radius)

    face_max = dist[mesh.faces].max(axis=1)  # inf when any vertex unreachable
    radius_used = radius
    chosen = face_max <= radius_used
    if chosen.any():
        order = np.unique(face_max[chosen])
        # largest admissible geodesic radius keeping the patch within n_v
        lo, hi = 0, len(order) - 1
        best = None
        while lo <= hi:
            mid = (lo + hi) // 2
            sel = face_max <= order[mid]
            n_verts = len(np.unique(mesh.faces[sel]))
            if n_verts <= n_v:
                best = mid
                lo = mid + 1
            else:
                hi = mid - 1
        if best is None:
            raise ValueError(
                f"no patch at most {n_v} vertices exists around this seed"
            )
        radius_used = float(order[best])
        chosen = face_max <= radius_used
    if not chosen.any():
        raise ValueError("patch radius too small: no face fully inside")

    face_ids = np.nonzero(chosen)[0]
    face_ids = _face_component(mesh, adj, face_ids, src)
    vertex_ids = np.unique(mesh.faces[face_ids])
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[vertex_ids] = np.arange(len(vertex_ids))
    sub = TriMesh(mesh.vertices[vertex_ids], remap[mesh.faces[face_ids]],
                  validate=False)
    return Patch(mesh=sub, vertex_ids=vertex_ids, face_ids=face_ids,
                 seed_point=seed_point, radius=radius_used)


def _face_component(mesh, adj, face_ids, src_vertex):
    """Restrict a face set to the face-connected component nearest the source."""
    sel = np.zeros(mesh.n_faces, dtype=bool)
    sel[face_ids] = True
    nbrs = adj.face_neighbors[face_ids]
    pos = np.full(mesh.n_faces, -1, dtype=np.int64)
    pos[face_ids] = np.arange(len(face_ids))
    rows, cols = [], []
    for k in range(3):
        nb = nbrs[:, k]
        ok = (nb >= 0) & sel[np.maximum(nb, 0)]
        rows.append(np.arange(len(face_ids))[ok])
        cols.append(pos[nb[ok]])
    g = coo_matrix(
        (np.ones(sum(len(r) for r in rows)),
         (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(face_ids), len(face_ids)),
    )
    n_comp, labels = connected_components(g, directed=False)
    if n_comp == 1:
        return face_ids
    src_faces = [f for f in adj.vertex_faces(src_vertex) if sel[f]]
    if not src_faces:
        # source vertex has no face fully inside; keep the largest component
        keep = np.argmax(np.bincount(labels))
    else:
        keep = labels[pos[src_faces[0]]]
    return face_ids[labels == keep]


def refresh_patch(mesh: TriMesh, patch: Patch, adjacency=None) -> Patch:
    """Rebuild a patch submesh from the current mesh, keeping its vertex set.

    Used between edit rounds: flips rewrite faces but never vertices, so the
    patch is re-derived as all faces whose vertices lie in the stored set.
    """
    member = np.zeros(mesh.n_vertices, dtype=bool)
    member[patch.vertex_ids] = True
    face_ids = np.nonzero(member[mesh.faces].all(axis=1))[0]
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[patch.vertex_ids] = np.arange(len(patch.vertex_ids))
    sub = TriMesh(mesh.vertices[patch.vertex_ids], remap[mesh.faces[face_ids]],
                  validate=False)
    return Patch(mesh=sub, vertex_ids=patch.vertex_ids, face_ids=face_ids,
                 seed_point=patch.seed_point, radius=patch.radius)


def select_interior_features(patch: Patch, curves: FeatureCurveSet,
                             cmap=None, keep_radius: float | None = None,
                             step: float | None = None) -> FeatureCurveSet:
    """Keep curves that run through the patch interior; drop the rest.

    A curve is kept when some point along it is within ``keep_radius`` of the
    patch surface and its closest patch face has no boundary edge, i.e. the
    curve's nearest region is strictly interior rather than grazing the
    boundary ring. ``keep_radius`` defaults to radius / 8 (the truncation
    radius under default patch parameters).
    """
    if len(curves) == 0:
        return curves
    keep_radius = keep_radius if keep_radius is not None else patch.radius / 8.0
    step = step if step is not None else keep_radius / 4.0
    adj = build_adjacency(patch.mesh)
    face_has_boundary = adj.boundary_edge[adj.face_edges].any(axis=1)
    locator = SurfaceLocator(patch.mesh)
    kept = []
    for ci, polyline in enumerate(curves):
        pts = FeatureCurveSet([polyline]).sampled_points(step)
        d, _, fid = locator.query(pts)
        hit = (d <= keep_radius) & ~face_has_boundary[fid]
        if hit.any():
            kept.append(ci)
    return curves.select(kept)


def _patch_weights(patch: Patch, cfg: FusionConfig) -> np.ndarray:
    if cfg.weighting == "uniform":
        return np.ones(patch.n_vertices)
    areas = patch.mesh.face_areas()
    w = np.zeros(patch.n_vertices)
    np.add.at(w, patch.mesh.faces.ravel(), np.repeat(areas / 3.0, 3))
    return np.maximum(w, 1e-300)


def _segment_mean(idx, values, weights, size, width):
    """Weighted mean per index with contribution order fixed by sorting, so
    fusion is exactly permutation-invariant in the patch list."""
    cols = [idx] + [values[:, k] for k in range(width)] + [weights]
    order = np.lexsort(tuple(reversed(cols)))
    idx = idx[order]
    values = values[order]
    weights = weights[order]
    wsum = np.bincount(idx, weights=weights, minlength=size)
    out = np.zeros((size, width))
    for k in range(width):
        out[:, k] = np.bincount(idx, weights=weights * values[:, k],
                                minlength=size)
    covered = wsum > 0
    out[covered] /= wsum[covered, None]
    return out, covered


def fuse_vertex_fields(predictions, n_vertices: int, cfg: FusionConfig,
                       lam: float) -> VertexField:
    """Fuse per-patch vertex fields into one whole-shape field.

    ``predictions`` is a sequence of (Patch, VertexField) pairs. Distance
    fields (scalar, with a truncation radius) drop patches whose
    ``alpha_exclude`` quantile exceeds ``lam * exclude_threshold_mult`` and
    default to the truncation radius at uncovered vertices. Direction fields
    are averaged componentwise and renormalized (zero below 1e-6 norm).
    Scalar fields without a truncation radius default to zero.
    """
    preds = list(predictions)
    if not preds:
        raise ValueError("no predictions to fuse")
    first = preds[0][1]
    vector = first.is_vector
    epsilon = first.epsilon
    is_distance = (not vector) and epsilon is not None

    retained = []
    for patch, field in preds:
        if len(field) != patch.n_vertices:
            raise ValueError("field length does not match patch vertex count")
        if cfg.exclude and is_distance and float(
            np.quantile(field.values, cfg.alpha_exclude)
        ) > lam * cfg.exclude_threshold_mult:
            continue
        retained.append((patch, field))
    if not retained:
        logger.warning(
            "fuse_vertex_fields: all %d patches excluded; returning defaults",
            len(preds),
        )
        default = epsilon if is_distance else 0.0
        values = np.full(n_vertices, default) if not vector \
            else np.zeros((n_vertices, 3))
        return VertexField(values, epsilon=epsilon)

    idx = np.concatenate([p.vertex_ids for p, _ in retained])
    weights = np.concatenate([_patch_weights(p, cfg) for p, _ in retained])
    width = 3 if vector else 1
    values = np.concatenate(
        [f.values.reshape(len(f), width) for _, f in retained]
    )
    fused, covered = _segment_mean(idx, values, weights, n_vertices, width)
    if vector:
        norms = np.linalg.norm(fused, axis=1)
        nonzero = norms > 1e-6
        fused[nonzero] /= norms[nonzero, None]
        fused[~nonzero] = 0.0
        return VertexField(fused, epsilon=epsilon)
    out = fused[:, 0]
    if is_distance:
        out[~covered] = epsilon
    return VertexField(out, epsilon=epsilon)


def fuse_edge_fields(predictions, edges: np.ndarray) -> EdgeField:
    """Fuse per-patch edge fields onto a parent edge list (uniform average).

    ``predictions`` pairs each Patch with an EdgeField over the patch
    submesh's edges; patch-local edges map to parent edges through the
    patch's vertex ids. Parent edges covered by no patch score zero.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    n_e = len(edges)
    n_vg = int(edges.max()) + 1 if n_e else 1
    packed_parent = edges[:, 0] * n_vg + edges[:, 1]
    order = np.argsort(packed_parent)
    idx_list, val_list = [], []
    for patch, field in predictions:
        local = np.asarray(field.edges)
        glob = patch.vertex_ids[local]
        glob = np.sort(glob, axis=1)
        packed = glob[:, 0] * n_vg + glob[:, 1]
        where = np.searchsorted(packed_parent[order], packed)
        where = np.clip(where, 0, n_e - 1)
        eid = order[where]
        ok = packed_parent[eid] == packed
        if not ok.all():
            raise ValueError("patch edge not present in the parent edge list")
        idx_list.append(eid)
        val_list.append(field.values)
    if not idx_list:
        return EdgeField(edges, np.zeros(n_e))
    idx = np.concatenate(idx_list)
    values = np.concatenate(val_list).reshape(-1, 1)
    fused, _ = _segment_mean(idx, values, np.ones(len(idx)), n_e, 1)
    return EdgeField(edges, fused[:, 0])
