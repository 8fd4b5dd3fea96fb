"""Iterative refinement engine.

One pipeline pass: optional short-edge simplification, patch extraction,
per-patch field prediction and fusion, vertex snapping onto predicted
feature locations, batched non-interacting edge flips with re-estimation
between batches, and a field-free postprocess that fixes isolated
mis-oriented triangles. Every mutation passes the edit guard; rejected edits
leave the mesh untouched.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import EdgeField, VertexField
from .mesh import (
    EditGuard,
    TriMesh,
    _area_floor,
    _check_new_triangle,
    _triangle_normal_area,
    build_adjacency,
    check_flip,
    simplify_short_edges,
)
from .patches import Patch, crop_patch, fuse_edge_fields, fuse_vertex_fields, \
    poisson_seeds, refresh_patch, FusionConfig
from .providers import DIRECTION, DISTANCE, IMPROVEMENT, FieldProvider
from .spatial import SurfaceLocator

logger = logging.getLogger(__name__)

__all__ = [
    "RemeshConfig",
    "snap_vertices",
    "select_noninteracting_flips",
    "apply_flips",
    "flip_pass",
    "postprocess_flips",
    "run_pipeline",
]


@dataclass
class RemeshConfig:
    """Engine parameters.

    Thresholds in grid-spacing units: vertices within ``alpha_prox`` spacings
    of a feature are snapped; edges are flipped while their fused improvement
    exceeds ``flip_threshold``, for at most ``max_flip_sets`` re-estimation
    rounds; postprocess treats triangles whose best neighbor-normal
    dot-product is below ``post_dot`` and sweeps at most ``max_outer_iters``
    times.
    """

    alpha_prox: float = 2.0
    flip_threshold: float = 0.01
    n_flip: int | None = None
    max_flip_sets: int = 2
    post_dot: float = 0.95
    max_outer_iters: int = 8
    # pipeline stages
    simplify_fraction: float | None = None
    seed_spacing: float = 16.0       # Poisson seed spacing, spacings
    patch_radius: float = 32.0       # geodesic crop radius, spacings
    max_patch_vertices: int = 2000
    epsilon: float = 4.0             # field truncation radius, spacings
    lam: float | None = None         # grid spacing; median edge length if None
    seed: int = 0
    threads: int = 1
    fusion: FusionConfig = field(default_factory=FusionConfig)

    def __post_init__(self):
        if self.alpha_prox <= 0:
            raise ValueError("alpha_prox must be positive")
        if self.flip_threshold <= 0:
            raise ValueError("flip_threshold must be positive")
        if not 0 < self.post_dot < 1:
            raise ValueError("post_dot must be in (0, 1)")
        if self.max_flip_sets < 0 or self.max_outer_iters < 1:
            raise ValueError("iteration limits must be positive")


def snap_vertices(mesh: TriMesh, distance: VertexField, direction: VertexField,
                  cfg: RemeshConfig, guard: EditGuard | None = None,
                  lam: float | None = None):
    """Move near-feature vertices onto their predicted feature locations.

    Every vertex whose predicted feature distance is at most
    ``alpha_prox * lam`` moves by ``distance * direction``, unless the move
    breaks an incident-face invariant (rotation, degeneracy, non-finite), in
    which case it is discarded. Vertices are processed in index order against
    the evolving positions.

    Returns
    -------
    (TriMesh, dict) with counts: moved / discarded / out_of_range / on_feature.
    """
    guard = guard or EditGuard()
    lam = lam if lam is not None else (cfg.lam or mesh.median_edge_length())
    d = np.asarray(distance.values, dtype=np.float64).reshape(-1)
    r = np.asarray(direction.values, dtype=np.float64).reshape(-1, 3)
    if len(d) != mesh.n_vertices or len(r) != mesh.n_vertices:
        raise ValueError("fields must cover every vertex")
    adj = build_adjacency(mesh)
    pos = mesh.vertices.copy()
    area_floor = _area_floor(mesh)
    report = {"moved": 0, "discarded": 0, "out_of_range": 0, "on_feature": 0}
    candidates = np.nonzero(d <= cfg.alpha_prox * lam)[0]
    report["out_of_range"] = mesh.n_vertices - len(candidates)
    for v in candidates:
        step = d[v] * r[v]
        if not np.isfinite(step).all():
            report["discarded"] += 1
            continue
        if (step == 0).all():
            report["on_feature"] += 1
            continue
        target = pos[v] + step
        ok = True
        for f in adj.vertex_faces(v):
            tri = mesh.faces[f]
            p = [pos[u] for u in tri]
            old_n, _ = _triangle_normal_area(*p)
            p_new = [target if u == v else pos[u] for u in tri]
            if _check_new_triangle(
                p_new[0], p_new[1], p_new[2], [old_n], guard, area_floor
            ) is not None:
                ok = False
                break
        if ok:
            pos[v] = target
            report["moved"] += 1
        else:
            report["discarded"] += 1
    return TriMesh(pos, mesh.faces, validate=False), report


def select_noninteracting_flips(mesh: TriMesh, improvement: EdgeField,
                                cfg: RemeshConfig,
                                guard: EditGuard | None = None,
                                adjacency=None):
    """Greedy batch of edge flips with no mutual influence.

    Edges are visited by descending improvement (ties broken by lower edge
    id) and accepted while the value exceeds ``flip_threshold``, the flip is
    geometrically valid, the edge shares no face with an already accepted
    edge, and the new diagonal duplicates no existing or newly created edge.
    At most ``n_flip`` edges are returned.
    """
    guard = guard or EditGuard()
    adj = adjacency or build_adjacency(mesh)
    s = np.asarray(improvement.values, dtype=np.float64)
    if len(s) != len(adj.edges):
        raise ValueError("improvement field must cover every edge")
    order = np.lexsort((np.arange(len(s)), -s))
    used_faces = set()
    created = set()
    accepted = []
    area_floor = _area_floor(mesh)
    limit = cfg.n_flip if cfg.n_flip is not None else len(s)
    for eid in order:
        if s[eid] <= cfg.flip_threshold:
            break
        if len(accepted) >= limit:
            break
        f1, f2 = adj.edge_faces[eid]
        if f2 < 0 or f1 in used_faces or f2 in used_faces:
            continue
        quad, reason = check_flip(mesh, adj, int(eid), guard, area_floor,
                                  extra_edges=created)
        if reason is not None:
            continue
        a, b, c, d, _, _ = quad
        accepted.append(int(eid))
        used_faces.update((int(f1), int(f2)))
        created.add((c, d) if c < d else (d, c))
    return accepted


def apply_flips(mesh: TriMesh, edge_ids, guard: EditGuard | None = None,
                adjacency=None):
    """Apply a batch of validated flips; returns (mesh, n_applied).

    Each flip is re-checked against the guard; failures are skipped (the
    batch built by :func:`select_noninteracting_flips` passes by
    construction).
    """
    guard = guard or EditGuard()
    adj = adjacency or build_adjacency(mesh)
    faces = mesh.faces.copy()
    area_floor = _area_floor(mesh)
    created = set()
    applied = 0
    for eid in edge_ids:
        quad, reason = check_flip(mesh, adj, int(eid), guard, area_floor,
                                  extra_edges=created)
        if reason is not None:
            logger.debug("apply_flips: skipped edge %d (%s)", eid, reason)
            continue
        a, b, c, d, f_ab, f_ba = quad
        faces[f_ab] = (a, d, c)
        faces[f_ba] = (d, b, c)
        created.add((c, d) if c < d else (d, c))
        applied += 1
    if not applied:
        return mesh, 0
    return TriMesh(mesh.vertices, faces, validate=False), applied


def _map_concurrently(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def flip_pass(mesh: TriMesh, provider: FieldProvider, patches, cfg: RemeshConfig,
              guard: EditGuard | None = None):
    """Batched flipping with re-estimation between batches.

    Repeats {refresh patches -> predict improvement per patch -> fuse ->
    select non-interacting flips -> apply} until the selection is empty or
    ``max_flip_sets`` batches have run. Vertices stay fixed throughout.

    Returns
    -------
    (TriMesh, list of per-set dicts)
    """
    guard = guard or EditGuard()
    sets = []
    for _ in range(cfg.max_flip_sets):
        adj = build_adjacency(mesh)
        current = [refresh_patch(mesh, p) for p in patches]
        fields = _map_concurrently(
            provider.edge_improvement, current, cfg.threads
        )
        fused = fuse_edge_fields(list(zip(current, fields)), adj.edges)
        chosen = select_noninteracting_flips(mesh, fused, cfg, guard, adj)
        if not chosen:
            sets.append({"selected": 0, "applied": 0})
            break
        mesh, applied = apply_flips(mesh, chosen, guard, adj)
        sets.append({"selected": len(chosen), "applied": applied})
        if applied == 0:
            break
    return mesh, sets


class _PostprocessState:
    """Mutable face table with incremental neighbor updates for flip sweeps."""

    def __init__(self, mesh: TriMesh):
        adj = build_adjacency(mesh)
        self.V = mesh.vertices
        self.faces = mesh.faces.copy()
        self.neighbors = adj.face_neighbors.copy()
        self.edge_set = {tuple(e) for e in adj.edges.tolist()}
        self.normals = mesh.face_normals()
        self.boundary_vertex = adj.boundary_vertex

    def normal(self, f):
        return self.normals[f]

    def _edge_key(self, a, b):
        return (a, b) if a < b else (b, a)

    def neighbor_across(self, f, a, b):
        """Neighbor of face f across edge (a, b)."""
        tri = self.faces[f]
        for k in range(3):
            u, v = tri[k], tri[(k + 1) % 3]
            if {int(u), int(v)} == {a, b}:
                return int(self.neighbors[f, k])
        return -1

    def replace_neighbor(self, f, old, new):
        if f < 0:
            return
        for k in range(3):
            if self.neighbors[f, k] == old:
                self.neighbors[f, k] = new
                return

    def flip(self, f_ab, f_ba, a, b, c, d):
        """Rewrites the two faces for an already validated flip."""
        x1 = self.neighbor_across(f_ab, b, c)
        x2 = self.neighbor_across(f_ab, c, a)
        y1 = self.neighbor_across(f_ba, a, d)
        y2 = self.neighbor_across(f_ba, d, b)
        self.faces[f_ab] = (a, d, c)
        self.faces[f_ba] = (d, b, c)
        # neighbor slots follow the face_edges convention (corner k, k+1)
        self.neighbors[f_ab] = (y1, f_ba, x2)
        self.neighbors[f_ba] = (y2, x1, f_ab)
        self.replace_neighbor(x1, f_ab, f_ba)
        self.replace_neighbor(y1, f_ba, f_ab)
        self.edge_set.discard(self._edge_key(a, b))
        self.edge_set.add(self._edge_key(c, d))
        for f in (f_ab, f_ba):
            tri = self.V[self.faces[f]]
            n, _ = _triangle_normal_area(tri[0], tri[1], tri[2])
            self.normals[f] = n

    def to_mesh(self):
        return TriMesh(self.V, self.faces, validate=False)


def postprocess_flips(mesh: TriMesh, cfg: RemeshConfig,
                      guard: EditGuard | None = None):
    """Field-free cleanup of isolated mis-oriented triangles.

    Any triangle whose best normal dot-product with its edge neighbors falls
    below ``post_dot`` has each of its edges tried for a flip; a flip is kept
    only when it strictly increases the summed neighbor dot-products over the
    affected edge pairs. Sweeps repeat until no triangle qualifies, every
    candidate flip is prohibited by the guard, or ``max_outer_iters`` sweeps
    have run. Each accepted flip strictly increases the objective, so the
    loop terminates.

    Returns
    -------
    (TriMesh, dict) with counts, sweep number and per-flip objective gains.
    """
    guard = guard or EditGuard()
    if mesh.n_faces == 0:
        return mesh, {"flips": 0, "sweeps": 0, "gains": []}
    state = _PostprocessState(mesh)
    area_floor = _area_floor(mesh)
    gains = []
    sweeps = 0
    total = 0
    for sweep in range(cfg.max_outer_iters):
        sweeps = sweep + 1
        flipped_this_sweep = 0
        for f in range(len(state.faces)):
            best = -np.inf
            for nb in state.neighbors[f]:
                if nb >= 0:
                    best = max(best, float(state.normal(f) @ state.normal(nb)))
            if best == -np.inf or best >= cfg.post_dot:
                continue
            gain, plan = _best_postprocess_flip(state, f, guard, area_floor)
            if plan is not None and gain > 1e-12:
                state.flip(*plan)
                gains.append(gain)
                flipped_this_sweep += 1
                total += 1
        if flipped_this_sweep == 0:
            break
    return state.to_mesh(), {"flips": total, "sweeps": sweeps, "gains": gains}


def _quad_for_edge(state, f, k):
    """Flip configuration of edge k of face f, or None when not flippable."""
    tri = state.faces[f]
    a, b = int(tri[k]), int(tri[(k + 1) % 3])
    c = int(tri[(k + 2) % 3])
    g = int(state.neighbors[f, k])
    if g < 0:
        return None
    d = int(state.faces[g].sum() - a - b)
    if state._edge_key(c, d) in state.edge_set:
        return None
    return a, b, c, d, f, g


def _local_dot_sum(state, faces_pairs):
    total = 0.0
    for (f, g) in faces_pairs:
        if f >= 0 and g >= 0:
            total += float(state.normal(f) @ state.normal(g))
    return total


def _best_postprocess_flip(state, f, guard, area_floor):
    """Best objective-improving flip among the three edges of face f.

    The objective is the sum of neighbor-normal dot-products over the five
    edge pairs whose adjacency changes (quad diagonal plus its four sides).
    """
    best_gain, best_plan = 0.0, None
    for k in range(3):
        quad = _quad_for_edge(state, f, k)
        if quad is None:
            continue
        a, b, c, d, f_ab, f_ba = quad
        V = state.V
        pa, pb, pc, pd = V[a], V[b], V[c], V[d]
        n1 = state.normal(f_ab)
        n2 = state.normal(f_ba)
        new1, a1 = _triangle_normal_area(pa, pd, pc)
        new2, a2 = _triangle_normal_area(pd, pb, pc)
        if a1 <= area_floor or a2 <= area_floor:
            continue
        from .mesh import _min_angle, _rotation_angle

        if min(_min_angle(pa, pd, pc), _min_angle(pd, pb, pc)) \
                < guard.min_triangle_angle:
            continue
        rot1 = min(_rotation_angle(n1, new1), _rotation_angle(n2, new1))
        rot2 = min(_rotation_angle(n1, new2), _rotation_angle(n2, new2))
        if max(rot1, rot2) > guard.max_normal_rotation:
            continue
        x1 = state.neighbor_across(f_ab, b, c)
        x2 = state.neighbor_across(f_ab, c, a)
        y1 = state.neighbor_across(f_ba, a, d)
        y2 = state.neighbor_across(f_ba, d, b)
        before = _local_dot_sum(
            state, [(f_ab, f_ba), (f_ab, x1), (f_ab, x2), (f_ba, y1), (f_ba, y2)]
        )
        after = float(new1 @ new2)
        for nb, nn in ((y1, new1), (x2, new1), (y2, new2), (x1, new2)):
            if nb >= 0:
                after += float(nn @ state.normal(nb))
        gain = after - before
        if gain > best_gain:
            best_gain = gain
            best_plan = (f_ab, f_ba, a, b, c, d)
    return best_gain, best_plan


def run_pipeline(coarse: TriMesh, provider: FieldProvider, cfg: RemeshConfig,
                 lam: float | None = None, guard: EditGuard | None = None,
                 on_stage=None):
    """Full refinement pass over a coarse mesh.

    Stages: optional short-edge simplification, patch extraction, fused
    field prediction, vertex snapping, batched flips with re-estimation, and
    postprocessing. Stages whose fields the provider cannot supply are
    skipped and recorded in the report. ``on_stage(name, mesh)``, when given,
    observes the mesh after every mutating stage.

    Returns
    -------
    (TriMesh, report dict)
    """
    guard = guard or EditGuard()
    t0 = time.perf_counter()
    lam = lam if lam is not None else (cfg.lam or coarse.median_edge_length())
    report = {"lam": lam, "stages": [], "timings_sec": {}}
    mesh = coarse

    def mark(stage, start, **info):
        report["stages"].append({"stage": stage, **info})
        report["timings_sec"][stage] = time.perf_counter() - start
        if on_stage is not None and stage != "patches":
            on_stage(stage, mesh)

    if cfg.simplify_fraction is not None:
        t = time.perf_counter()
        before = mesh.n_faces
        mesh = simplify_short_edges(mesh, cfg.simplify_fraction, lam=lam,
                                    guard=guard)
        mark("simplify", t, faces_before=before, faces_after=mesh.n_faces)

    t = time.perf_counter()
    seeds = poisson_seeds(mesh, cfg.seed_spacing * lam, seed=cfg.seed)
    locator = SurfaceLocator(mesh)
    adjacency = build_adjacency(mesh)
    patches = [
        crop_patch(mesh, s, cfg.patch_radius * lam, cfg.max_patch_vertices,
                   adjacency=adjacency, locator=locator)
        for s in seeds
    ]
    mark("patches", t, seeds=len(seeds), patches=len(patches))

    caps = provider.capabilities()
    fusion = cfg.fusion
    if provider.exact_fields and fusion.exclude:
        # the quantile screen exists to reject unreliable predictions;
        # exact fields would only lose information to it
        fusion = replace(fusion, exclude=False)
    if DISTANCE in caps and DIRECTION in caps:
        t = time.perf_counter()
        d_fields = _map_concurrently(provider.vertex_distance, patches,
                                     cfg.threads)
        r_fields = _map_concurrently(provider.vertex_direction, patches,
                                     cfg.threads)
        fused_d = fuse_vertex_fields(
            list(zip(patches, d_fields)), mesh.n_vertices, fusion, lam
        )
        fused_r = fuse_vertex_fields(
            list(zip(patches, r_fields)), mesh.n_vertices, fusion, lam
        )
        mesh, snap_report = snap_vertices(mesh, fused_d, fused_r, cfg, guard,
                                          lam)
        mark("snap", t, **snap_report)
    else:
        report["stages"].append(
            {"stage": "snap", "skipped": "provider lacks distance/direction"}
        )

    if IMPROVEMENT in caps:
        t = time.perf_counter()
        mesh, flip_sets = flip_pass(mesh, provider, patches, cfg, guard)
        mark("flips", t, sets=flip_sets,
             applied=sum(s["applied"] for s in flip_sets))
    else:
        report["stages"].append(
            {"stage": "flips", "skipped": "provider lacks improvement"}
        )

    t = time.perf_counter()
    mesh, post = postprocess_flips(mesh, cfg, guard)
    mark("postprocess", t, flips=post["flips"], sweeps=post["sweeps"],
         min_gain=min(post["gains"]) if post["gains"] else None)

    report["timings_sec"]["total"] = time.perf_counter() - t0
    return mesh, report
