"""Per-vertex and per-edge field containers used as remeshing guidance."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["VertexField", "EdgeField", "sanitize_distance", "sanitize_direction"]


@dataclass
class VertexField:
    """One value per vertex: scalar (n,) or 3-vector (n, 3).

    ``epsilon`` is the truncation radius for feature distance/direction
    fields: distances live in [0, epsilon] and direction vectors have unit
    norm inside the radius and are exactly zero elsewhere.
    """

    values: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 2 and self.values.shape[1] != 3:
            raise ValueError("vector field must have shape (n, 3)")
        if self.values.ndim not in (1, 2):
            raise ValueError("field must be (n,) or (n, 3)")

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2

    def __len__(self):
        return len(self.values)


@dataclass
class EdgeField:
    """One scalar per undirected edge, aligned to a canonical edge list.

    ``edges`` carries sorted vertex pairs in lexicographic order (the order
    produced by adjacency construction), so values can be re-associated after
    topology edits by pair lookup.
    """

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if len(self.edges) != len(self.values):
            raise ValueError("edges and values length mismatch")

    def as_dict(self) -> dict:
        return {
            (int(a), int(b)): float(v)
            for (a, b), v in zip(self.edges, self.values)
        }

    def __len__(self):
        return len(self.values)


def sanitize_distance(values, epsilon):
    """Clamp a distance field into [0, epsilon]; returns (values, n_fixed)."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    bad = ~np.isfinite(v) | (v < 0) | (v > epsilon)
    out = np.clip(np.nan_to_num(v, nan=epsilon, posinf=epsilon, neginf=0.0),
                  0.0, epsilon)
    return out, int(bad.sum())


def sanitize_direction(values, tol=1e-6):
    """Coerce direction vectors to unit-or-zero; returns (values, n_fixed).

    Vectors already unit (within 1e-9) or exactly zero pass through
    untouched; anything else is renormalized (or zeroed below ``tol``) and
    counted as a violation.
    """
    raw = np.asarray(values, dtype=np.float64).reshape(-1, 3)
    v = np.nan_to_num(raw)
    norms = np.linalg.norm(v, axis=1)
    finite = np.isfinite(raw).all(axis=1)
    unit = np.abs(norms - 1.0) <= 1e-9
    zero = norms == 0.0
    ok = finite & (unit | zero)
    out = raw.copy()
    fix = ~ok
    renorm = fix & (norms > tol)
    out[fix] = 0.0
    out[renorm] = v[renorm] / norms[renorm, None]
    return out, int(fix.sum())
