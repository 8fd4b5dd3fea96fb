"""Sharp feature curves: polylines in 3D tagging tangent-plane discontinuities."""
from __future__ import annotations

import numpy as np

__all__ = ["FeatureCurveSet"]


class FeatureCurveSet:
    """A set of 3D polylines marking sharp features of a surface.

    Parameters
    ----------
    curves : sequence of (k_i, 3) arrays
        Each polyline has at least two points and no repeated consecutive
        points.
    sharpness : sequence of str, optional
        Per-curve tag (defaults to ``"sharp"`` for every curve).
    """

    def __init__(self, curves, sharpness=None):
        self.curves = []
        for pts in curves:
            pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
            if len(pts) < 2:
                raise ValueError("polyline needs at least 2 points")
            if (np.linalg.norm(np.diff(pts, axis=0), axis=1) == 0).any():
                raise ValueError("polyline has repeated consecutive points")
            self.curves.append(pts)
        if sharpness is None:
            sharpness = ["sharp"] * len(self.curves)
        if len(sharpness) != len(self.curves):
            raise ValueError("one sharpness tag per curve required")
        self.sharpness = list(sharpness)

    def __len__(self):
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    def extents(self) -> np.ndarray:
        """Per-curve linear extent: the largest axis range of its bounding box."""
        return np.array(
            [float((c.max(axis=0) - c.min(axis=0)).max()) for c in self.curves]
        )

    def scaled(self, factor: float) -> "FeatureCurveSet":
        return FeatureCurveSet([c * factor for c in self.curves], self.sharpness)

    def rotated(self, rotation) -> "FeatureCurveSet":
        R = np.asarray(rotation, dtype=np.float64).reshape(3, 3)
        return FeatureCurveSet([c @ R.T for c in self.curves], self.sharpness)

    def select(self, indices) -> "FeatureCurveSet":
        return FeatureCurveSet(
            [self.curves[i] for i in indices],
            [self.sharpness[i] for i in indices],
        )

    def total_points(self) -> int:
        return sum(len(c) for c in self.curves)

    def sampled_points(self, step: float) -> np.ndarray:
        """Points along all polylines at most ``step`` apart (corners included)."""
        out = []
        for c in self.curves:
            out.append(c)
            seg = np.diff(c, axis=0)
            lens = np.linalg.norm(seg, axis=1)
            for i, L in enumerate(lens):
                n_extra = int(np.ceil(L / step)) - 1
                if n_extra > 0:
                    t = (np.arange(1, n_extra + 1) / (n_extra + 1))[:, None]
                    out.append(c[i] + t * seg[i])
        return np.concatenate(out)

    def __repr__(self):
        return f"FeatureCurveSet({len(self.curves)} curves)"
