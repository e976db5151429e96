"""Evaluation protocols: MPJPE, Procrustes-aligned MPJPE, error histograms.

All pose arguments are root-relative joint coordinates in meters; reported
metrics are in millimeters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AlignmentError, DataError, ShapeError

M_TO_MM = 1000.0


def _check_pose_pair(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape:
        raise ShapeError(f"pred shape {pred.shape} != gt shape {gt.shape}")
    if pred.ndim < 2 or pred.shape[-1] != 3:
        raise ShapeError(f"expected (..., J, 3) poses, got {pred.shape}")
    return pred, gt


def mpjpe(pred: np.ndarray, gt: np.ndarray) -> float:
    """Mean per-joint position error in millimeters.

    Mean over all frames and joints of the Euclidean distance between
    corresponding joints.
    """
    pred, gt = _check_pose_pair(pred, gt)
    return float(np.linalg.norm(pred - gt, axis=-1).mean() * M_TO_MM)


def procrustes_transform(
    pred: np.ndarray, gt: np.ndarray, with_scale: bool = True
) -> tuple[float, np.ndarray, np.ndarray]:
    """Optimal similarity transform (s, R, t) mapping pred onto gt.

    Minimises ``sum ||s R p_i + t - g_i||^2`` over scale s, proper rotation R
    and translation t.  A reflection solution is corrected by flipping the
    smallest singular direction, so det(R) = +1 always.  ``with_scale=False``
    restricts the transform to rigid (s = 1).
    """
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise ShapeError(
            f"expected matching (J, 3) frames, got {pred.shape} and {gt.shape}"
        )
    if pred.shape[0] < 3:
        raise AlignmentError(f"need at least 3 points, got {pred.shape[0]}")

    mu_p = pred.mean(axis=0)
    mu_g = gt.mean(axis=0)
    pc = pred - mu_p
    gc = gt - mu_g

    sv_p = np.linalg.svd(pc, compute_uv=False)
    if sv_p[0] == 0.0 or sv_p[1] <= 1e-12 * sv_p[0]:
        raise AlignmentError("point set is rank-deficient (all points collinear)")

    # cross-covariance; R maps centred pred onto centred gt
    h = pc.T @ gc
    u, s, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    if d == 0.0:
        d = 1.0
    flip = np.array([1.0, 1.0, d])
    rot = vt.T @ np.diag(flip) @ u.T
    scale = float((s * flip).sum() / (pc**2).sum()) if with_scale else 1.0
    trans = mu_g - scale * rot @ mu_p
    return scale, rot, trans


def procrustes_align(
    pred: np.ndarray, gt: np.ndarray, with_scale: bool = True
) -> np.ndarray:
    """Similarity-align one frame of predicted joints onto ground truth."""
    scale, rot, trans = procrustes_transform(pred, gt, with_scale=with_scale)
    return scale * np.asarray(pred, dtype=float) @ rot.T + trans


def p_mpjpe(pred: np.ndarray, gt: np.ndarray, with_scale: bool = True) -> float:
    """MPJPE after per-frame Procrustes alignment of pred onto gt, in mm."""
    pred, gt = _check_pose_pair(pred, gt)
    if pred.ndim == 2:
        pred = pred[None]
        gt = gt[None]
    frames = pred.reshape(-1, pred.shape[-2], 3)
    targets = gt.reshape(-1, gt.shape[-2], 3)
    aligned = np.stack(
        [procrustes_align(f, g, with_scale=with_scale) for f, g in zip(frames, targets)]
    )
    return mpjpe(aligned, targets)


@dataclass(frozen=True)
class Histogram:
    bin_edges_mm: np.ndarray  # length n_bins + 1, edges k*w .. (k+1)*w
    counts: np.ndarray        # length n_bins, integer counts


def error_histogram(per_sequence_mpjpe, bin_width_mm: float = 5.0) -> Histogram:
    """Histogram of per-sequence MPJPE values over [k*w, (k+1)*w) bins.

    Bins are anchored at multiples of the bin width and cover the data range.
    """
    values = np.asarray(per_sequence_mpjpe, dtype=float)
    if values.size == 0:
        raise DataError("cannot histogram an empty value list")
    if not np.all(np.isfinite(values)):
        raise DataError("histogram input contains non-finite values")
    if bin_width_mm <= 0:
        raise DataError(f"bin width must be > 0, got {bin_width_mm}")

    lo = int(np.floor(values.min() / bin_width_mm))
    hi = int(np.floor(values.max() / bin_width_mm)) + 1
    edges = np.arange(lo, hi + 1) * bin_width_mm
    idx = np.floor(values / bin_width_mm).astype(int) - lo
    counts = np.bincount(idx, minlength=hi - lo)
    return Histogram(bin_edges_mm=edges, counts=counts)


@dataclass(frozen=True)
class EvalReport:
    mpjpe_mm: float
    p_mpjpe_mm: float
    per_sequence: list = field(default_factory=list)
    histogram: Histogram | None = None

    def to_dict(self) -> dict:
        out = {
            "mpjpe_mm": self.mpjpe_mm,
            "p_mpjpe_mm": self.p_mpjpe_mm,
            "num_sequences": len(self.per_sequence),
            "per_sequence": self.per_sequence,
        }
        if self.histogram is not None:
            out["histogram"] = {
                "bin_edges_mm": self.histogram.bin_edges_mm.tolist(),
                "counts": self.histogram.counts.tolist(),
            }
        return out


def evaluate_sequences(
    preds,
    gts,
    ids=None,
    bin_width_mm: float = 5.0,
    with_scale: bool = True,
) -> EvalReport:
    """Aggregate MPJPE / P-MPJPE over a list of (N, J, 3) sequence pairs."""
    if len(preds) != len(gts):
        raise ShapeError(f"{len(preds)} predictions vs {len(gts)} ground truths")
    if len(preds) == 0:
        raise DataError("no sequences to evaluate")
    if ids is None:
        ids = [str(i) for i in range(len(preds))]

    per_sequence = []
    for sid, pred, gt in zip(ids, preds, gts):
        per_sequence.append(
            {
                "id": sid,
                "mpjpe_mm": mpjpe(pred, gt),
                "p_mpjpe_mm": p_mpjpe(pred, gt, with_scale=with_scale),
            }
        )
    seq_mpjpe = [row["mpjpe_mm"] for row in per_sequence]
    hist = error_histogram(seq_mpjpe, bin_width_mm=bin_width_mm)

    frames = float(sum(np.asarray(p).shape[0] for p in preds))
    weights = [np.asarray(p).shape[0] / frames for p in preds]
    mean_mpjpe = float(sum(w * r["mpjpe_mm"] for w, r in zip(weights, per_sequence)))
    mean_p = float(sum(w * r["p_mpjpe_mm"] for w, r in zip(weights, per_sequence)))
    return EvalReport(
        mpjpe_mm=mean_mpjpe,
        p_mpjpe_mm=mean_p,
        per_sequence=per_sequence,
        histogram=hist,
    )
