"""Mesh-to-mesh and field-to-field evaluation.

Mesh measures follow a sample-and-match scheme: area-uniform samples on one
mesh, exact closest points on the other, then thresholded rates over point
distances (precision/recall) or matched-normal angles (normals
precision/recall). Each measure also comes in a near-feature variant
restricted to a band of radius ``delta`` around the feature curves.
"""
from __future__ import annotations

import csv
import io as _stdio
import json
from dataclasses import dataclass, field

import numpy as np

from .curves import FeatureCurveSet
from .mesh import TriMesh
from .patches import _area_uniform_samples
from .spatial import PolylineLocator, SurfaceLocator

__all__ = [
    "MetricsConfig",
    "MatchedSamples",
    "sample_and_match",
    "restrict_near_features",
    "precision_recall",
    "field_recall_fpr",
    "direction_recall_fpr",
    "rmse",
    "rmse_qrmse",
    "evaluate_meshes",
    "report_rows",
    "rows_to_csv",
]


@dataclass
class MetricsConfig:
    """Evaluation thresholds, expressed in grid-spacing units where noted.

    ``tau`` bounds matched point distances for precision/recall;
    ``normal_deg`` bounds matched normal angles; ``delta`` is the
    near-feature band radius; ``distance_T`` / ``angle_T_deg`` threshold the
    field classification measures. ``lam`` converts spacing units to model
    units.
    """

    lam: float = 1.0
    samples: int = 100000
    tau: float = 1.0
    normal_deg: float = 10.0
    delta: float = 2.0
    distance_T: float = 1.0
    angle_T_deg: float = 10.0
    seed: int = 0

    def __post_init__(self):
        for name in ("lam", "tau", "normal_deg", "delta", "distance_T",
                     "angle_T_deg"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.samples < 1:
            raise ValueError("samples must be positive")


@dataclass
class MatchedSamples:
    """Samples on a source mesh matched to closest points on a target.

    ``source_is_gt`` records which side was sampled, deciding how the
    near-feature restriction applies (source points for ground-truth
    samples, matched points otherwise).
    """

    src_points: np.ndarray
    src_normals: np.ndarray
    dst_points: np.ndarray
    dst_normals: np.ndarray
    distances: np.ndarray
    source_is_gt: bool = False

    def __len__(self):
        return len(self.distances)

    def normal_angles_deg(self) -> np.ndarray:
        dots = (self.src_normals * self.dst_normals).sum(axis=1)
        return np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))

    def subset(self, mask) -> "MatchedSamples":
        return MatchedSamples(
            self.src_points[mask], self.src_normals[mask],
            self.dst_points[mask], self.dst_normals[mask],
            self.distances[mask], self.source_is_gt,
        )


def sample_and_match(a: TriMesh, b: TriMesh, n: int, seed: int = 0,
                     source_is_gt: bool = False,
                     locator: SurfaceLocator | None = None) -> MatchedSamples:
    """Area-uniform samples on ``a`` matched to exact closest points on ``b``."""
    if a.n_faces == 0 or b.n_faces == 0:
        raise ValueError("both meshes must be non-empty")
    rng = np.random.default_rng(seed)
    pts, fids = _area_uniform_samples(a, n, rng)
    locator = locator or SurfaceLocator(b)
    dist, closest, dst_face = locator.query(pts)
    return MatchedSamples(
        src_points=pts,
        src_normals=a.face_normals()[fids],
        dst_points=closest,
        dst_normals=b.face_normals()[dst_face],
        distances=dist,
        source_is_gt=source_is_gt,
    )


def restrict_near_features(samples: MatchedSamples, curves: FeatureCurveSet,
                           delta: float) -> MatchedSamples:
    """Keep samples inside the feature band of radius ``delta``.

    Samples drawn on the ground truth keep their own position near a curve;
    samples drawn on the reconstruction qualify through their matched
    ground-truth point.
    """
    if len(curves) == 0:
        return samples.subset(np.zeros(len(samples), dtype=bool))
    if not np.isfinite(delta):
        return samples
    key = samples.src_points if samples.source_is_gt else samples.dst_points
    locator = PolylineLocator(curves.curves)
    d, _, _ = locator.query(key)
    return samples.subset(d <= delta)


def _rate(mask) -> float:
    return float(np.count_nonzero(mask)) / len(mask) if len(mask) else 0.0


def _fscore(p, r):
    return 2 * p * r / (p + r) if (p + r) > 0 else 0.0


def precision_recall(recon: TriMesh, gt: TriMesh, cfg: MetricsConfig,
                     curves: FeatureCurveSet | None = None,
                     samples_pair=None) -> dict:
    """Point and normals precision/recall/F between two meshes.

    Precision-side rates come from reconstruction samples matched into the
    ground truth, recall-side rates from the reverse direction. Point rates
    threshold distances at ``tau * lam``; normals rates threshold matched
    normal angles at ``normal_deg``. With ``curves`` given, the same rates
    restricted to the ``delta * lam`` feature band are included, keyed with a
    ``_band`` suffix.
    """
    if samples_pair is None:
        s_p = sample_and_match(recon, gt, cfg.samples, seed=cfg.seed)
        s_r = sample_and_match(gt, recon, cfg.samples, seed=cfg.seed + 1,
                               source_is_gt=True)
    else:
        s_p, s_r = samples_pair

    def rates(sp, sr):
        tau = cfg.tau * cfg.lam
        p = _rate(sp.distances < tau)
        r = _rate(sr.distances < tau)
        pn = _rate(sp.normal_angles_deg() < cfg.normal_deg)
        rn = _rate(sr.normal_angles_deg() < cfg.normal_deg)
        return {
            "precision": p, "recall": r, "fscore": _fscore(p, r),
            "normals_precision": pn, "normals_recall": rn,
            "normals_fscore": _fscore(pn, rn),
            "n_precision_samples": len(sp), "n_recall_samples": len(sr),
        }

    out = rates(s_p, s_r)
    if curves is not None:
        delta = cfg.delta * cfg.lam
        band = rates(
            restrict_near_features(s_p, curves, delta),
            restrict_near_features(s_r, curves, delta),
        )
        out.update({f"{k}_band": v for k, v in band.items()})
    return out


@dataclass
class ClassificationRates:
    recall: float
    fpr: float
    n_positive: int
    n_negative: int
    zero_positives: bool = False
    zero_negatives: bool = False


def field_recall_fpr(d_hat, d_true, T: float) -> ClassificationRates:
    """Thresholded-distance classification rates.

    Predictions and truths are binarized at ``T`` (below means "near a
    feature"); recall counts recovered true positives, the false-positive
    rate counts spurious ones. Degenerate classes are reported with explicit
    flags: no true positives gives recall 1, no true negatives gives fpr 0.
    """
    d_hat = np.asarray(d_hat, dtype=np.float64).reshape(-1)
    d_true = np.asarray(d_true, dtype=np.float64).reshape(-1)
    if d_hat.shape != d_true.shape:
        raise ValueError("fields must have the same length")
    pred = d_hat < T
    true = d_true < T
    n_pos = int(true.sum())
    n_neg = int((~true).sum())
    recall = float((pred & true).sum() / n_pos) if n_pos else 1.0
    fpr = float((pred & ~true).sum() / n_neg) if n_neg else 0.0
    return ClassificationRates(
        recall=recall, fpr=fpr, n_positive=n_pos, n_negative=n_neg,
        zero_positives=n_pos == 0, zero_negatives=n_neg == 0,
    )


def direction_recall_fpr(r_hat, r_true, T_deg: float):
    """Angular agreement of two direction fields.

    Recall is the share of vertices (among those where both vectors are
    nonzero) whose angular difference stays below ``T_deg``; the
    false-positive rate is its complement.
    """
    r_hat = np.asarray(r_hat, dtype=np.float64).reshape(-1, 3)
    r_true = np.asarray(r_true, dtype=np.float64).reshape(-1, 3)
    if r_hat.shape != r_true.shape:
        raise ValueError("fields must have the same shape")
    nh = np.linalg.norm(r_hat, axis=1)
    nt = np.linalg.norm(r_true, axis=1)
    valid = (nh > 0) & (nt > 0)
    if not valid.any():
        return 1.0, 0.0, 0
    dots = (r_hat[valid] * r_true[valid]).sum(axis=1) / (nh[valid] * nt[valid])
    ang = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    recall = float((ang < T_deg).mean())
    return recall, 1.0 - recall, int(valid.sum())


def rmse(predicted, true) -> float:
    """Root mean squared error over all components of two arrays."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(true, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("arrays must have the same shape")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def rmse_qrmse(pairs, q: float = 0.95):
    """Per-instance RMSEs and their ``q`` quantile across instances.

    ``pairs`` is a sequence of (predicted, true) array pairs.

    Returns
    -------
    (rmses list, qrmse float)
    """
    values = [rmse(p, t) for p, t in pairs]
    if not values:
        raise ValueError("no instances")
    return values, float(np.quantile(values, q))


def evaluate_meshes(recon: TriMesh, gt: TriMesh, cfg: MetricsConfig,
                    curves: FeatureCurveSet | None = None) -> dict:
    """The full mesh-measure report: global rates plus the feature band."""
    out = {"lam": cfg.lam, "tau": cfg.tau, "normal_deg": cfg.normal_deg,
           "delta": cfg.delta, "samples": cfg.samples, "seed": cfg.seed}
    out.update(precision_recall(recon, gt, cfg, curves=curves))
    return out


_BAND_SUFFIX = "_band"


def report_rows(result: dict, pair_label: str) -> list:
    """Flatten an evaluation dict into (pair, metric, band, value) rows."""
    rows = []
    skip = {"lam", "tau", "normal_deg", "delta", "samples", "seed"}
    for key in sorted(result):
        if key in skip or not isinstance(result[key], (int, float)):
            continue
        band = "delta" if key.endswith(_BAND_SUFFIX) else "inf"
        metric = key[: -len(_BAND_SUFFIX)] if band == "delta" else key
        rows.append((pair_label, metric, band, result[key]))
    return rows


def rows_to_csv(rows) -> str:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pair", "metric", "band", "value"])
    for row in rows:
        writer.writerow([row[0], row[1], row[2], repr(row[3])
                         if isinstance(row[3], float) else row[3]])
    return buf.getvalue()
