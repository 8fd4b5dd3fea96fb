"""File formats: OBJ meshes, feature-curve files, SDF grids, field sidecars.

All writers are byte-deterministic: floats are serialized with Python's
shortest round-trip repr and element order follows index order. The field
sidecar CSVs double as the exchange format external predictors must emit:

* ``<stem>.dist.csv``   header ``vertex_index,value``
* ``<stem>.dir.csv``    header ``vertex_index,x,y,z``
* ``<stem>.simp.csv``   header ``v_a,v_b,value`` (undirected vertex pair)

Vertex indices refer to the accompanying mesh file; edge rows are keyed by
vertex pairs so the values survive re-derivation of the edge list.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import yaml

from .curves import FeatureCurveSet
from .mesh import AdjacencyIndex, TriMesh
from .sdf import SdfGrid

__all__ = [
    "read_obj",
    "write_obj",
    "read_curves",
    "write_curves",
    "read_sdf_grid",
    "write_sdf_grid",
    "write_vertex_field_csv",
    "read_vertex_field_csv",
    "write_edge_field_csv",
    "read_edge_field_csv",
    "write_json",
    "export_patch_dataset",
    "load_patch_manifest",
]


def _fmt(x: float) -> str:
    return repr(float(x))


# ---------------------------------------------------------------- OBJ

def read_obj(path) -> TriMesh:
    """Read vertices and triangular faces from an OBJ file.

    Normals/texture data are ignored; polygonal faces are rejected (this
    toolkit is triangles-only).
    """
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{line_no}: malformed vertex")
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [p.split("/")[0] for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(
                        f"{path}:{line_no}: only triangular faces are supported"
                    )
                tri = []
                for raw in idx:
                    i = int(raw)
                    tri.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(tri)
    return TriMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3),
                   np.array(faces, dtype=np.int64).reshape(-1, 3))


def write_obj(path, mesh: TriMesh):
    """Write a mesh as OBJ (vertices then faces, index order)."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}\n")
        for f in mesh.faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


# ---------------------------------------------------------------- curves

def read_curves(path, mesh: TriMesh | None = None) -> FeatureCurveSet:
    """Read feature curves from YAML or JSON.

    Native schema: a list (or ``{"curves": [...]}``) of entries, each either
    a bare list of 3D points or ``{"points": [...], "sharpness": "sharp"}``.
    Annotation files that reference mesh vertices instead of coordinates
    (entries with ``vert_indices``, as in CAD dataset feature files) are
    converted on the fly; they need the mesh, and only entries tagged
    ``sharp: true`` are kept.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        if path.suffix.lower() == ".json":
            data = json.load(fh)
        else:
            data = yaml.safe_load(fh)
    if isinstance(data, dict) and "curves" in data:
        entries = data["curves"]
    elif isinstance(data, list):
        entries = data
    else:
        raise ValueError(f"{path}: unrecognized curve file structure")

    curves, tags = [], []
    for entry in entries:
        if isinstance(entry, dict) and "vert_indices" in entry:
            if mesh is None:
                raise ValueError(
                    f"{path}: vertex-indexed curves need the mesh they index"
                )
            if not entry.get("sharp", False):
                continue
            idx = np.asarray(entry["vert_indices"], dtype=np.int64)
            pts = mesh.vertices[idx]
            keep = np.ones(len(pts), dtype=bool)
            keep[1:] = np.linalg.norm(np.diff(pts, axis=0), axis=1) > 0
            pts = pts[keep]
            if len(pts) < 2:
                continue
            curves.append(pts)
            tags.append("sharp")
        elif isinstance(entry, dict):
            curves.append(np.asarray(entry["points"], dtype=np.float64))
            tags.append(entry.get("sharpness", "sharp"))
        else:
            curves.append(np.asarray(entry, dtype=np.float64))
            tags.append("sharp")
    return FeatureCurveSet(curves, tags)


def write_curves(path, curves: FeatureCurveSet):
    path = Path(path)
    payload = {
        "curves": [
            {"points": [[float(x) for x in p] for p in c.tolist()],
             "sharpness": tag}
            for c, tag in zip(curves.curves, curves.sharpness)
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        if path.suffix.lower() == ".json":
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
        else:
            yaml.safe_dump(payload, fh, sort_keys=True)


# ---------------------------------------------------------------- SDF grid

_GRID_MAGIC = b"SDFG"
_GRID_VERSION = 1


def write_sdf_grid(path, grid: SdfGrid, sidecar: bool = True):
    """Binary grid: header (origin, spacing, dims) + float32 x-fastest array,
    plus a small human-readable text sidecar."""
    path = Path(path)
    nx, ny, nz = grid.dims
    with open(path, "wb") as fh:
        fh.write(_GRID_MAGIC)
        fh.write(struct.pack("<I", _GRID_VERSION))
        fh.write(struct.pack("<3d", *grid.origin))
        fh.write(struct.pack("<d", grid.spacing))
        fh.write(struct.pack("<3I", nx, ny, nz))
        fh.write(grid.flat_values().astype("<f4").tobytes())
    if sidecar:
        vals = grid.flat_values()
        text = (
            f"origin: {_fmt(grid.origin[0])} {_fmt(grid.origin[1])} "
            f"{_fmt(grid.origin[2])}\n"
            f"spacing: {_fmt(grid.spacing)}\n"
            f"dims: {nx} {ny} {nz}\n"
            f"count: {vals.size}\n"
            f"min: {_fmt(vals.min())}\n"
            f"max: {_fmt(vals.max())}\n"
        )
        Path(str(path) + ".txt").write_text(text, encoding="utf-8")


def read_sdf_grid(path) -> SdfGrid:
    with open(path, "rb") as fh:
        if fh.read(4) != _GRID_MAGIC:
            raise ValueError(f"{path}: not an SDF grid file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _GRID_VERSION:
            raise ValueError(f"{path}: unsupported grid version {version}")
        origin = struct.unpack("<3d", fh.read(24))
        (spacing,) = struct.unpack("<d", fh.read(8))
        nx, ny, nz = struct.unpack("<3I", fh.read(12))
        data = np.frombuffer(fh.read(4 * nx * ny * nz), dtype="<f4")
        if data.size != nx * ny * nz:
            raise ValueError(f"{path}: truncated grid data")
    values = data.reshape((nx, ny, nz), order="F")
    return SdfGrid(origin=np.array(origin), spacing=spacing, values=values)


# ---------------------------------------------------------------- sidecars

def write_vertex_field_csv(path, values):
    values = np.asarray(values)
    with open(path, "w", encoding="utf-8") as fh:
        if values.ndim == 1:
            fh.write("vertex_index,value\n")
            for i, v in enumerate(values):
                fh.write(f"{i},{_fmt(v)}\n")
        else:
            fh.write("vertex_index,x,y,z\n")
            for i, v in enumerate(values):
                fh.write(f"{i},{_fmt(v[0])},{_fmt(v[1])},{_fmt(v[2])}\n")


def read_vertex_field_csv(path, n_vertices: int, width: int = 1) -> np.ndarray:
    """Load a per-vertex sidecar, insisting on exactly one row per vertex."""
    rows = _read_csv_rows(path, 1 + width)
    if len(rows) != n_vertices:
        raise ValueError(
            f"{path}: expected {n_vertices} rows (one per vertex), "
            f"found {len(rows)}"
        )
    out = np.zeros(n_vertices if width == 1 else (n_vertices, width))
    seen = np.zeros(n_vertices, dtype=bool)
    for row in rows:
        i = int(row[0])
        if not 0 <= i < n_vertices:
            raise ValueError(f"{path}: vertex index {i} out of range")
        if seen[i]:
            raise ValueError(f"{path}: duplicate vertex index {i}")
        seen[i] = True
        out[i] = float(row[1]) if width == 1 else [float(x) for x in row[1:]]
    return out


def write_edge_field_csv(path, edges, values):
    edges = np.asarray(edges, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("v_a,v_b,value\n")
        for (a, b), v in zip(edges, values):
            fh.write(f"{a},{b},{_fmt(v)}\n")


def read_edge_field_csv(path, adjacency: AdjacencyIndex) -> dict:
    """Load a per-edge sidecar keyed by vertex pairs.

    Every row must name an edge of the mesh the adjacency was built from, and
    every edge must appear exactly once. Returns ``{(a, b): value}``.
    """
    rows = _read_csv_rows(path, 3)
    n_edges = len(adjacency.edges)
    if len(rows) != n_edges:
        raise ValueError(
            f"{path}: expected {n_edges} rows (one per edge), found {len(rows)}"
        )
    out = {}
    for row in rows:
        a, b = int(row[0]), int(row[1])
        key = (a, b) if a < b else (b, a)
        if adjacency.lookup_edge(*key) is None:
            raise ValueError(f"{path}: ({a}, {b}) is not an edge of the mesh")
        if key in out:
            raise ValueError(f"{path}: duplicate edge ({a}, {b})")
        out[key] = float(row[2])
    return out


def _read_csv_rows(path, n_cols):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header:
            raise ValueError(f"{path}: empty sidecar file")
        for line_no, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != n_cols:
                raise ValueError(
                    f"{path}:{line_no}: expected {n_cols} columns, "
                    f"found {len(parts)}"
                )
            rows.append(parts)
    return rows


# ---------------------------------------------------------------- reports

def write_json(path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------- patches

def export_patch_dataset(directory, patches, fields=None):
    """Serialize patches as a directory of OBJ + sidecars + JSON manifests.

    ``fields`` optionally maps patch index to a dict with any of
    ``distance`` ((k,) array), ``direction`` ((k, 3)) and ``improvement``
    (EdgeField on the patch submesh). This is the training-data export format
    for external field predictors.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, patch in enumerate(patches):
        stem = directory / f"patch_{i:05d}"
        write_obj(f"{stem}.obj", patch.mesh)
        manifest = {
            "seed_point": [float(x) for x in patch.seed_point],
            "radius": float(patch.radius),
            "vertex_ids": [int(v) for v in patch.vertex_ids],
            "face_ids": [int(f) for f in patch.face_ids],
        }
        write_json(f"{stem}.json", manifest)
        per_patch = (fields or {}).get(i, {})
        if "distance" in per_patch:
            write_vertex_field_csv(f"{stem}.dist.csv", per_patch["distance"])
        if "direction" in per_patch:
            write_vertex_field_csv(f"{stem}.dir.csv", per_patch["direction"])
        if "improvement" in per_patch:
            ef = per_patch["improvement"]
            write_edge_field_csv(f"{stem}.simp.csv", ef.edges, ef.values)


def load_patch_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
