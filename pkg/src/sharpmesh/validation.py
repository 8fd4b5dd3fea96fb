"""Input validation helpers shared by the estimator API and the CLI."""
from __future__ import annotations

import numpy as np

from .mesh import TriMesh

__all__ = ["as_mesh", "check_mesh", "check_vertex_values"]


def as_mesh(X) -> TriMesh:
    """Coerce estimator input into a TriMesh.

    Accepts a TriMesh, a (vertices, faces) pair of array-likes, or a path to
    an OBJ file.
    """
    if isinstance(X, TriMesh):
        return X
    if isinstance(X, (str,)) or hasattr(X, "__fspath__"):
        from .io import read_obj

        return read_obj(X)
    if isinstance(X, (tuple, list)) and len(X) == 2:
        return TriMesh(np.asarray(X[0]), np.asarray(X[1]))
    raise TypeError(
        "expected a TriMesh, a (vertices, faces) pair, or an OBJ path; "
        f"got {type(X).__name__}"
    )


def check_mesh(mesh: TriMesh, require_manifold: bool = True,
               require_faces: bool = True) -> TriMesh:
    if require_faces and mesh.n_faces == 0:
        raise ValueError("mesh has no faces")
    if require_manifold and not mesh.is_edge_manifold():
        raise ValueError("mesh is not edge-manifold")
    return mesh


def check_vertex_values(mesh: TriMesh, values, width: int | None = None):
    """Validate a per-vertex value array against the mesh."""
    values = np.asarray(values, dtype=np.float64)
    if len(values) != mesh.n_vertices:
        raise ValueError(
            f"expected {mesh.n_vertices} per-vertex values, got {len(values)}"
        )
    if width is not None:
        expected = (mesh.n_vertices,) if width == 1 \
            else (mesh.n_vertices, width)
        if values.shape != expected:
            raise ValueError(f"expected shape {expected}, got {values.shape}")
    return values
