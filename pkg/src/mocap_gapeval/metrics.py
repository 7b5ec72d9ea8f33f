"""Evaluation metrics (RMSE, velocity distance, bone distance preservation) and the training loss.

All metrics are in centimeters. ``per_coordinate`` normalisation averages
squared errors over every scalar entry before the square root, so iid noise
of standard deviation s gives an RMSE of about s. ``per_marker`` averages
squared 3-vector norms over marker slots, a factor sqrt(3) larger.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import DataError, MarkerSequence, ObservationMask, SkeletonConfig

NORM_MODES = ("per_coordinate", "per_marker")


def _check_norm(norm):
    if norm not in NORM_MODES:
        raise DataError(f"unknown norm mode {norm!r}; expected one of {NORM_MODES}")


def _check_pair(pred: MarkerSequence, gt: MarkerSequence):
    if pred.frames.shape != gt.frames.shape:
        raise DataError(f"shape mismatch: pred {pred.frames.shape} vs gt {gt.frames.shape}")
    if pred.marker_ids != gt.marker_ids:
        raise DataError("marker ids of pred and gt differ")
    if pred.fps != gt.fps:
        raise DataError(f"fps mismatch: pred {pred.fps} vs gt {gt.fps}")


def _rms(residual, norm, weights=None):
    """residual: (..., M, 3). weights: broadcastable (..., M) bool selecting marker slots."""
    sq = np.einsum("...k,...k->...", residual, residual)
    if weights is None:
        total, count = sq.sum(), sq.size
    else:
        w = np.broadcast_to(weights, sq.shape)
        total, count = sq[w].sum(), int(w.sum())
    if count == 0:
        raise DataError("no entries to average over")
    if norm == "per_coordinate":
        count *= 3
    return float(np.sqrt(total / count))


def rmse(pred, gt, norm="per_coordinate", scope: ObservationMask = None) -> float:
    """Root mean square position error; ``scope`` limits it to missing markers."""
    _check_norm(norm)
    _check_pair(pred, gt)
    weights = None
    if scope is not None:
        scope.check_matches(gt)
        weights = scope.missing
        sel = weights
    else:
        sel = np.ones(gt.present.shape, dtype=bool)
    if not (pred.present[sel].all() and gt.present[sel].all()):
        raise DataError("rmse needs pred and gt present on every scoped entry")
    return _rms(np.nan_to_num(pred.frames - gt.frames), norm, weights)


def vd_gt(pred, gt, norm="per_coordinate") -> float:
    """RMS difference between predicted and ground-truth frame velocities."""
    _check_norm(norm)
    _check_pair(pred, gt)
    if gt.n_frames < 2:
        raise DataError("vd_gt needs at least 2 frames")
    pred.require_present("vd_gt")
    gt.require_present("vd_gt")
    return _rms(np.diff(gt.frames, axis=0) - np.diff(pred.frames, axis=0), norm)


def vd(pred, norm="per_coordinate") -> float:
    """RMS change of velocity between consecutive frames of the prediction alone."""
    _check_norm(norm)
    if pred.n_frames < 3:
        raise DataError("vd needs at least 3 frames")
    pred.require_present("vd")
    return _rms(np.diff(pred.frames, n=2, axis=0), norm)


@dataclass(frozen=True, eq=False)
class BoneLengthSeries:
    lengths: np.ndarray
    names: tuple


def bone_lengths(seq: MarkerSequence, skel: SkeletonConfig) -> BoneLengthSeries:
    if not skel.bones:
        raise DataError("skeleton defines no bones")
    out = np.empty((seq.n_frames, len(skel.bones)))
    for d, bone in enumerate(skel.bones):
        ia = seq.indices(bone.end_a)
        ib = seq.indices(bone.end_b)
        gone = ~seq.present[:, ia + ib]
        if gone.any():
            t, k = np.argwhere(gone)[0]
            raise DataError(f"bone {bone.name!r}: marker {(bone.end_a + bone.end_b)[k]!r} "
                            f"absent at frame {t}")
        diff = seq.frames[:, ia].mean(axis=1) - seq.frames[:, ib].mean(axis=1)
        out[:, d] = np.sqrt(np.einsum("tk,tk->t", diff, diff))
    return BoneLengthSeries(out, tuple(b.name for b in skel.bones))


def bdp_gt(pred, gt, skel) -> float:
    """RMS difference of bone lengths between prediction and ground truth."""
    _check_pair(pred, gt)
    diff = bone_lengths(gt, skel).lengths - bone_lengths(pred, skel).lengths
    return float(np.sqrt(np.mean(diff * diff)))


def bdp(pred, skel) -> float:
    """RMS frame-to-frame change of predicted bone lengths."""
    if pred.n_frames < 2:
        raise DataError("bdp needs at least 2 frames")
    diff = np.diff(bone_lengths(pred, skel).lengths, axis=0)
    return float(np.sqrt(np.mean(diff * diff)))


class LossTerms(NamedTuple):
    total: float
    position: float
    velocity: float


def training_loss(pred, gt, miss: ObservationMask, lam: float) -> LossTerms:
    """Position plus weighted velocity MSE, restricted to missing markers.

    The velocity at frame t is ``y[t] - y[t-1]`` and is gated by the mask at
    frame t.
    """
    _check_pair(pred, gt)
    miss.check_matches(gt)
    pred.require_present("training_loss")
    gt.require_present("training_loss")
    T = gt.n_frames
    if T < 2:
        raise DataError("training_loss needs at least 2 frames")
    gate = miss.missing[..., None]
    r = np.where(gate, gt.frames - pred.frames, 0.0)
    pos = float(np.sum(r * r) / T)
    rv = np.where(gate[1:], np.diff(gt.frames, axis=0) - np.diff(pred.frames, axis=0), 0.0)
    vel = float(np.sum(rv * rv) / (T - 1))
    return LossTerms(pos + lam * vel, pos, vel)


def compute_metrics(names, pred, gt=None, skel=None, norm="per_coordinate",
                    scope: ObservationMask = None) -> dict:
    """Evaluate the requested metrics; GT-referencing ones raise without ``gt``."""
    out = {}
    for name in names:
        if name in ("rmse", "vd_gt", "bdp_gt") and gt is None:
            raise DataError(f"metric {name!r} needs ground truth")
        if name in ("bdp", "bdp_gt") and skel is None:
            raise DataError(f"metric {name!r} needs a skeleton")
        if name == "rmse":
            out[name] = rmse(pred, gt, norm, scope)
        elif name == "vd_gt":
            out[name] = vd_gt(pred, gt, norm)
        elif name == "vd":
            out[name] = vd(pred, norm)
        elif name == "bdp_gt":
            out[name] = bdp_gt(pred, gt, skel)
        elif name == "bdp":
            out[name] = bdp(pred, skel)
        else:
            raise DataError(f"unknown metric {name!r}")
    return out
