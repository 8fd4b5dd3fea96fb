"""Exact guidance fields computed from ground truth.

Three signals steer the remeshing engine:

* a per-vertex truncated distance to the nearest feature curve,
* a per-vertex unit direction toward that nearest curve point (zero at and
  beyond the truncation radius), and
* a per-edge surface-improvement score: the drop in sampled normal
  consistency against the reference surface obtained by flipping the edge in
  isolation. Positive values mean the flip reduces normal inconsistency;
  edges whose flip is geometrically invalid score zero.
"""
from __future__ import annotations

import numpy as np

from .correspond import CorrespondenceMap, keyed_face_samples, samples_for_areas
from .curves import FeatureCurveSet
from .fields import EdgeField, VertexField
from .mesh import AdjacencyIndex, EditGuard, TriMesh, build_adjacency, _area_floor
from .spatial import PolylineLocator, SurfaceLocator

__all__ = [
    "distance_direction_fields",
    "normal_consistency_faces",
    "surface_improvement_field",
]

_ON_CURVE_TOL = 1e-9


def distance_direction_fields(mesh: TriMesh, curves: FeatureCurveSet,
                              epsilon: float,
                              locator: PolylineLocator | None = None):
    """Truncated distance and unit direction from each vertex to the curves.

    The distance is ``min(|q(v) - v|, epsilon)`` where ``q(v)`` is the exact
    closest point on any polyline; the direction is ``normalize(q(v) - v)``
    for vertices strictly inside the truncation radius and the zero vector
    elsewhere (including vertices lying on a curve). With no curves at all the
    distance is ``epsilon`` everywhere and all directions are zero.

    Returns
    -------
    (VertexField scalar, VertexField vec3)
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = mesh.n_vertices
    if len(curves) == 0:
        return (
            VertexField(np.full(n, epsilon), epsilon=epsilon),
            VertexField(np.zeros((n, 3)), epsilon=epsilon),
        )
    locator = locator or PolylineLocator(curves.curves)
    dist, q, _ = locator.query(mesh.vertices)
    d = np.minimum(dist, epsilon)
    r = np.zeros((n, 3))
    mask = (dist < epsilon) & (dist >= _ON_CURVE_TOL)
    r[mask] = (q[mask] - mesh.vertices[mask]) / dist[mask, None]
    return VertexField(d, epsilon=epsilon), VertexField(r, epsilon=epsilon)


def normal_consistency_faces(coarse: TriMesh, gt: TriMesh,
                             cmap: CorrespondenceMap,
                             gt_locator: SurfaceLocator | None = None) -> np.ndarray:
    """Per-face normal consistency of the coarse mesh against the reference.

    For each coarse face, the mean over its samples of the Euclidean gap
    between the coarse face normal and the reference normal at the matched
    closest point (range [0, 2]; 0 means perfectly aligned). Faces that the
    map left without samples are scored from a single fresh centroid sample.
    """
    if cmap.direction != "coarse_to_gt":
        raise ValueError("map direction must be coarse_to_gt")
    n_crs = coarse.face_normals()
    n_gt = gt.face_normals()
    diffs = np.linalg.norm(
        n_crs[cmap.src_face] - n_gt[cmap.dst_face], axis=1
    )
    counts = cmap.face_sample_counts(coarse.n_faces)
    sums = np.bincount(cmap.src_face, weights=diffs, minlength=coarse.n_faces)
    nc = np.divide(sums, counts, out=np.zeros(coarse.n_faces), where=counts > 0)
    empty = counts == 0
    if empty.any():
        gt_locator = gt_locator or SurfaceLocator(gt)
        cent = coarse.face_centroids()[empty]
        _, _, fid = gt_locator.query(cent)
        nc[empty] = np.linalg.norm(n_crs[empty] - n_gt[fid], axis=1)
    return nc


def _unit(v, axis=-1):
    n = np.linalg.norm(v, axis=axis, keepdims=True)
    return np.divide(v, n, out=np.zeros_like(v), where=n > 0)


def surface_improvement_field(coarse: TriMesh, gt: TriMesh,
                              cmap: CorrespondenceMap,
                              guard: EditGuard | None = None,
                              adjacency: AdjacencyIndex | None = None,
                              gt_locator: SurfaceLocator | None = None,
                              vertex_keys=None) -> EdgeField:
    """Expected normal-consistency gain of flipping each edge in isolation.

    For an interior edge with incident faces scored ``nc1, nc2`` (sample
    counts ``n1, n2``), the edge score is the count-weighted mean; the score
    of the flipped configuration is computed by sampling the two would-be
    faces at the map's density against the reference. The stored value is

        improvement(e) = nc(e) - nc(e_flipped)

    so positive values mean flipping helps. Boundary edges and flips rejected
    by the guard (duplicate edge, degenerate or over-rotated triangles) score
    exactly zero. Keyed sampling makes the field antisymmetric: applying a
    flip and re-evaluating the new edge yields the negated value bit-for-bit.
    """
    guard = guard or EditGuard()
    adj = adjacency or build_adjacency(coarse)
    gt_locator = gt_locator or SurfaceLocator(gt)
    nc = normal_consistency_faces(coarse, gt, cmap, gt_locator)
    counts = cmap.face_sample_counts(coarse.n_faces)
    counts = np.maximum(counts, 1)  # centroid-scored faces count once

    E = len(adj.edges)
    values = np.zeros(E)
    interior = ~adj.boundary_edge
    if not interior.any():
        return EdgeField(adj.edges, values)

    eids = np.nonzero(interior)[0]
    V = coarse.vertices
    f1 = adj.edge_faces[eids, 0]
    f2 = adj.edge_faces[eids, 1]
    a = adj.edges[eids, 0]
    b = adj.edges[eids, 1]
    tri1 = coarse.faces[f1]
    tri2 = coarse.faces[f2]
    third1 = tri1.sum(axis=1) - a - b
    third2 = tri2.sum(axis=1) - a - b
    i_a = np.argmax(tri1 == a[:, None], axis=1)
    nxt = tri1[np.arange(len(eids)), (i_a + 1) % 3]
    fwd = nxt == b  # whether f1 traverses a -> b
    c = np.where(fwd, third1, third2)
    d = np.where(fwd, third2, third1)
    pa, pb, pc, pd = V[a], V[b], V[c], V[d]

    # static flippability: new edge must not already exist
    n_v = coarse.n_vertices
    lo = np.minimum(c, d)
    hi = np.maximum(c, d)
    packed_new = lo * n_v + hi
    packed_all = adj.edges[:, 0] * n_v + adj.edges[:, 1]
    flippable = ~np.isin(packed_new, packed_all)

    # geometric guard on both new triangles (a, d, c) and (d, b, c)
    area_floor = _area_floor(coarse)
    n1_raw = np.cross(pb - pa, pc - pa)
    n2_raw = np.cross(pa - pb, pd - pb)
    new1_raw = np.cross(pd - pa, pc - pa)
    new2_raw = np.cross(pb - pd, pc - pd)
    area1 = 0.5 * np.linalg.norm(new1_raw, axis=1)
    area2 = 0.5 * np.linalg.norm(new2_raw, axis=1)
    flippable &= (area1 > area_floor) & (area2 > area_floor)
    flippable &= (_min_angles(pa, pd, pc) >= guard.min_triangle_angle)
    flippable &= (_min_angles(pd, pb, pc) >= guard.min_triangle_angle)
    n_old1, n_old2 = _unit(n1_raw), _unit(n2_raw)
    for new_raw in (new1_raw, new2_raw):
        n_new = _unit(new_raw)
        cos1 = np.clip((n_new * n_old1).sum(axis=1), -1, 1)
        cos2 = np.clip((n_new * n_old2).sum(axis=1), -1, 1)
        rot = np.minimum(np.arccos(cos1), np.arccos(cos2))
        flippable &= rot <= guard.max_normal_rotation

    if flippable.any():
        sel = np.nonzero(flippable)[0]
        nc_e = (
            counts[f1[sel]] * nc[f1[sel]] + counts[f2[sel]] * nc[f2[sel]]
        ) / (counts[f1[sel]] + counts[f2[sel]])

        # score the virtual flipped faces by fresh keyed sampling
        new_faces = np.concatenate(
            [
                np.stack([a[sel], d[sel], c[sel]], axis=1),
                np.stack([d[sel], b[sel], c[sel]], axis=1),
            ]
        )
        virtual = TriMesh(V, new_faces, validate=False)
        areas = np.concatenate([area1[sel], area2[sel]])
        k = samples_for_areas(areas, cmap.density)
        face_ids, _, points = keyed_face_samples(
            virtual, k, cmap.seed, vertex_keys
        )
        _, _, dst_face = gt_locator.query(points)
        n_new = virtual.face_normals()
        diffs = np.linalg.norm(
            n_new[face_ids] - gt.face_normals()[dst_face], axis=1
        )
        sums = np.bincount(face_ids, weights=diffs, minlength=len(new_faces))
        nc_new = sums / k
        half = len(sel)
        nc_e_new = (k[:half] * nc_new[:half] + k[half:] * nc_new[half:]) / (
            k[:half] + k[half:]
        )
        values[eids[sel]] = nc_e - nc_e_new
    return EdgeField(adj.edges, values)


def _min_angles(p0, p1, p2):
    """Smallest interior angle per triangle (vectorized)."""
    a = np.linalg.norm(p1 - p0, axis=1)
    b = np.linalg.norm(p2 - p1, axis=1)
    c = np.linalg.norm(p0 - p2, axis=1)
    ok = (a > 0) & (b > 0) & (c > 0)
    cos0 = np.where(ok, (a * a + c * c - b * b) / np.where(ok, 2 * a * c, 1), 1.0)
    cos1 = np.where(ok, (a * a + b * b - c * c) / np.where(ok, 2 * a * b, 1), 1.0)
    cos2 = np.where(ok, (b * b + c * c - a * a) / np.where(ok, 2 * b * c, 1), 1.0)
    angles = np.arccos(np.clip(np.stack([cos0, cos1, cos2]), -1, 1))
    out = angles.min(axis=0)
    out[~ok] = 0.0
    return out
