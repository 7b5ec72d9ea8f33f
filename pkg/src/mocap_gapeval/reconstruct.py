"""Gap-filling reconstructors.

Every reconstructor follows one contract::

    fill(corrupted, mask, skel) -> fully present MarkerSequence

where ``corrupted`` has had its gaps interpolated already and ``mask``
marks the originally observed entries. Reconstructors only ever write
missing entries.
"""
from __future__ import annotations

import io as _io
import json
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol

import numpy as np
from scipy.signal import savgol_filter

from .core import (BODY_PARTS, CurriculumParams, DataError, GapEvalError, MarkerSequence,
                   NumericError, ObservationMask, SkeletonConfig)
from .corrupt import (GapSpec, add_masked_noise, apply_mask, curriculum, interpolate_gaps,
                      noise_sigma, sample_mask)
from .io import center_hips

MODEL_HEADER = b"mocap-gapeval-ridge v1\n"


class Reconstructor(Protocol):
    def fill(self, corrupted: MarkerSequence, mask: ObservationMask,
             skel: SkeletonConfig) -> MarkerSequence: ...


class ReconstructionError(GapEvalError):
    def __init__(self, part, cause):
        self.part = part
        self.cause = cause
        super().__init__(f"{part} model failed: {cause}")


def _prepare(corrupted, mask):
    """Interpolated working copy; already-complete input is used as is."""
    mask.check_matches(corrupted)
    if corrupted.fully_present:
        return corrupted
    return interpolate_gaps(apply_mask(corrupted, mask))


def fill_interpolation(corrupted: MarkerSequence, mask: ObservationMask) -> MarkerSequence:
    """The no-learning baseline: cubic Hermite interpolation over every gap."""
    mask.check_matches(corrupted)
    return interpolate_gaps(apply_mask(corrupted, mask))


class InterpolationReconstructor:
    def fill(self, corrupted, mask, skel=None):
        return fill_interpolation(corrupted, mask)


# ---------------------------------------------------------------- ridge


def frame_features(centered: np.ndarray, actor_offset: np.ndarray) -> np.ndarray:
    """Per-frame input channels: flattened centered markers then the actor offset."""
    T = centered.shape[0]
    return np.concatenate([centered.reshape(T, -1), actor_offset], axis=1)


def window_features(z: np.ndarray, frames: np.ndarray, w: int) -> np.ndarray:
    """Rows ``[z[t-w], ..., z[t+w], 1]`` for each t in ``frames``; edges clamp."""
    T = z.shape[0]
    idx = np.clip(frames[:, None] + np.arange(-w, w + 1)[None, :], 0, T - 1)
    X = z[idx].reshape(len(frames), -1)
    return np.concatenate([X, np.ones((len(frames), 1))], axis=1)


class NormalEquations:
    """Per-group ridge normal equations with shared features.

    Group ``k`` accumulates ``X_k^T X_k`` and ``X_k^T Y_k`` from its own rows;
    :meth:`solve` returns one weight matrix per group. The last feature is
    an intercept and is not penalised.
    """

    def __init__(self, n_groups: int, n_features: int, n_outputs: int):
        self.gram = np.zeros((n_groups, n_features, n_features))
        self.cross = np.zeros((n_groups, n_features, n_outputs))
        self.counts = np.zeros(n_groups, dtype=np.int64)

    def add(self, group: int, X: np.ndarray, Y: np.ndarray):
        if len(X) == 0:
            return
        self.gram[group] += X.T @ X
        self.cross[group] += X.T @ Y
        self.counts[group] += len(X)

    def solve(self, reg: float) -> np.ndarray:
        if self.counts.sum() == 0:
            raise DataError("no training samples")
        if reg < 0:
            raise DataError("regularization must be non-negative")
        F = self.gram.shape[1]
        penalty = np.full(F, float(reg))
        penalty[-1] = 0.0
        W = np.zeros(self.cross.shape)
        for k in range(len(self.gram)):
            if self.counts[k] == 0:
                continue
            A = self.gram[k] + np.diag(penalty)
            try:
                W[k] = np.linalg.solve(A, self.cross[k])
            except np.linalg.LinAlgError:
                raise NumericError("singular normal matrix; use a positive regularization") from None
            if not np.all(np.isfinite(W[k])):
                raise NumericError("ridge solution is not finite; increase regularization")
        return W


@dataclass(eq=False)
class RidgeDenoiser:
    """Windowed linear denoiser over hips-centered inputs.

    For each target marker the model predicts the correction to add to the
    interpolated value from a window of ``2 * window + 1`` frames of every
    input channel (3M centered coordinates plus the 3-vector actor offset)
    and an intercept.
    """

    window: int
    reg: float
    marker_ids: tuple
    targets: tuple
    weights: np.ndarray = None
    trained: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.window < 1:
            raise DataError("window radius must be >= 1")
        self.marker_ids = tuple(self.marker_ids)
        self.targets = tuple(self.targets)

    @property
    def n_features(self) -> int:
        return (2 * self.window + 1) * (3 * len(self.marker_ids) + 3) + 1

    def fill(self, corrupted, mask, skel):
        return fill_ridge(self, corrupted, mask, skel)

    # file format: header line, one JSON line, then the weights in .npy form
    def to_bytes(self) -> bytes:
        if not self.trained:
            raise DataError("model is not trained")
        meta = {"window": self.window, "reg": self.reg, "marker_ids": list(self.marker_ids),
                "targets": list(self.targets), "layout": self.layout(), **self.meta}
        buf = _io.BytesIO()
        np.save(buf, np.ascontiguousarray(self.weights, dtype="<f8"), allow_pickle=False)
        return MODEL_HEADER + json.dumps(meta, sort_keys=True).encode() + b"\n" + buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "RidgeDenoiser":
        if not data.startswith(MODEL_HEADER):
            raise DataError("not a mocap-gapeval-ridge v1 model file")
        rest = data[len(MODEL_HEADER):]
        line, _, blob = rest.partition(b"\n")
        try:
            meta = json.loads(line)
            weights = np.load(_io.BytesIO(blob), allow_pickle=False)
        except (ValueError, OSError) as e:
            raise DataError(f"corrupt model file: {e}") from None
        extra = {k: v for k, v in meta.items()
                 if k not in ("window", "reg", "marker_ids", "targets", "layout")}
        model = cls(meta["window"], meta["reg"], meta["marker_ids"], meta["targets"],
                    weights, True, extra)
        if weights.shape != (len(model.targets), model.n_features, 3):
            raise DataError(f"weight matrix shape {weights.shape} does not match the layout")
        return model

    def layout(self) -> str:
        return (f"window[-{self.window}..+{self.window}] x "
                f"(centered xyz of {len(self.marker_ids)} markers + actor_offset xyz) + bias")

    def save(self, path):
        from .io import atomic_write_bytes
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def load(cls, path) -> "RidgeDenoiser":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _centered_inputs(working: MarkerSequence, skel):
    cs = center_hips(working, skel)
    return frame_features(cs.seq.frames, cs.actor_offset)


def _epoch_seed(seed, ep, k):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(ep, k))
    mask_seed, noise_seed = ss.generate_state(2)
    return int(mask_seed), int(noise_seed)


def corrupt_for_training(clean, skel, params, ep, seed, k):
    """Replayable training corruption for sequence ``k`` at epoch ``ep``.

    Returns (interpolated-and-noised input, mask).
    """
    T, M = clean.n_frames, clean.n_markers
    n, d = curriculum(ep, params, T, M)
    mseed, nseed = _epoch_seed(seed, ep, k)
    mask = sample_mask(T, M, GapSpec("window", n=n, d=d, seed=mseed), skel,
                       marker_ids=clean.marker_ids)
    filled = interpolate_gaps(apply_mask(clean, mask))
    return add_masked_noise(filled, mask, noise_sigma(ep, params.c), nseed), mask


def train_ridge(clean_seqs, skel: SkeletonConfig, params: CurriculumParams, epochs: int,
                window: int, seed: int, reg: float = 1.0, targets=None,
                progress: Callable = None) -> RidgeDenoiser:
    """Fit a :class:`RidgeDenoiser` on curriculum-corrupted copies of clean sequences.

    Each epoch corrupts every sequence with window gaps sized by the curriculum
    and masked noise from the tanh schedule, interpolates, hips-centers and adds
    the rows of every missing target marker to its normal equations. The system
    is solved once after the last epoch.
    """
    clean_seqs = list(clean_seqs)
    if not clean_seqs:
        raise DataError("no training sequences")
    ids = clean_seqs[0].marker_ids
    for s in clean_seqs:
        s.require_present("train_ridge")
        if s.marker_ids != ids:
            raise DataError("training sequences must share a marker layout")
        if s.n_frames <= 2 * window + 1:
            raise DataError(f"sequence of {s.n_frames} frames is shorter than the window")
    targets = tuple(ids if targets is None else targets)
    model = RidgeDenoiser(window, reg, ids, targets)
    eqs = NormalEquations(len(targets), model.n_features, 3)
    tcols = [ids.index(m) for m in targets]
    for ep in range(epochs):
        for k, clean in enumerate(clean_seqs):
            noisy, mask = corrupt_for_training(clean, skel, params, ep, seed, k)
            miss = ~mask.mask
            rows_needed = np.flatnonzero(miss[:, tcols].any(axis=1))
            if len(rows_needed) == 0:
                continue
            X = window_features(_centered_inputs(noisy, skel), rows_needed, window)
            where = np.full(noisy.n_frames, -1)
            where[rows_needed] = np.arange(len(rows_needed))
            for g, m in enumerate(tcols):
                frames = np.flatnonzero(miss[:, m])
                if len(frames):
                    resid = clean.frames[frames, m] - noisy.frames[frames, m]
                    eqs.add(g, X[where[frames]], resid)
        if progress is not None:
            progress(ep)
    model.weights = eqs.solve(reg)
    model.trained = True
    model.meta = {"epochs": epochs, "seed": seed, "samples": int(eqs.counts.sum())}
    return model


def fill_ridge(model: RidgeDenoiser, corrupted: MarkerSequence, mask: ObservationMask,
               skel: SkeletonConfig) -> MarkerSequence:
    """Interpolate, then correct every missing entry of the model's target markers."""
    if not model.trained:
        raise DataError("model is not trained")
    if corrupted.marker_ids != model.marker_ids:
        raise DataError("sequence marker layout differs from the model's")
    working = _prepare(corrupted, mask)
    if working.n_frames < 2:
        raise DataError("sequence too short")
    miss = ~mask.mask
    tcols = [working.index(m) for m in model.targets]
    rows = np.flatnonzero(miss[:, tcols].any(axis=1))
    if len(rows) == 0:
        return working
    X = window_features(_centered_inputs(working, skel), rows, model.window)
    where = np.full(working.n_frames, -1)
    where[rows] = np.arange(len(rows))
    frames = working.frames.copy()
    for g, m in enumerate(tcols):
        fr = np.flatnonzero(miss[:, m])
        if len(fr):
            frames[fr, m] = working.frames[fr, m] + X[where[fr]] @ model.weights[g]
    return working.with_frames(frames)


# ---------------------------------------------------------------- hips outwards


def part_mask(mask: ObservationMask, seq: MarkerSequence, skel: SkeletonConfig, part: str):
    """Boolean T x M selecting missing entries of the part's markers."""
    cols = seq.indices(skel.body_parts[part])
    sel = np.zeros(mask.mask.shape, dtype=bool)
    sel[:, cols] = ~mask.mask[:, cols]
    return sel


def fill_hips_outwards(part_models: Mapping[str, Reconstructor], corrupted: MarkerSequence,
                       mask: ObservationMask, skel: SkeletonConfig) -> MarkerSequence:
    """Fill body parts one at a time in the order hips, torso, head, limbs.

    Each step runs that part's model on the current working sequence and keeps
    its output only on the part's missing entries, so later parts see earlier
    predictions.
    """
    lacking = [p for p in BODY_PARTS if p not in part_models]
    if lacking:
        raise DataError(f"no model for body part(s): {lacking}")
    working = _prepare(corrupted, mask)
    for part in BODY_PARTS:
        if not skel.body_parts[part]:
            raise DataError(f"body part {part!r} has no markers")
        try:
            pred = part_models[part].fill(working, mask, skel)
        except Exception as e:  # noqa: BLE001 - re-raised with the part attached
            raise ReconstructionError(part, e) from e
        if pred.frames.shape != working.frames.shape:
            raise ReconstructionError(part, f"returned shape {pred.frames.shape}")
        sel = part_mask(mask, working, skel, part)
        if sel.any():
            frames = np.where(sel[..., None], pred.frames, working.frames)
            working = working.with_frames(frames)
    return working


# ---------------------------------------------------------------- post-processing

SMOOTH_SCOPES = ("all", "gaps")


def postprocess(pred: MarkerSequence, original_raw: MarkerSequence, mask: ObservationMask,
                sg_window: int = 9, sg_order: int = 3, scope: str = "all") -> MarkerSequence:
    """Restore observed values, then Savitzky-Golay smooth each coordinate.

    ``scope="gaps"`` keeps the smoothed values only on missing entries.
    """
    if sg_window < 1 or sg_window % 2 == 0:
        raise DataError(f"smoothing window must be a positive odd number, got {sg_window}")
    if not 0 <= sg_order < sg_window:
        raise DataError(f"smoothing order must satisfy 0 <= order < window, got {sg_order}")
    if scope not in SMOOTH_SCOPES:
        raise DataError(f"unknown smoothing scope {scope!r}")
    if pred.frames.shape != original_raw.frames.shape:
        raise DataError("pred and original differ in shape")
    mask.check_matches(pred)
    pred.require_present("postprocess")
    keep = mask.mask & original_raw.present
    frames = np.where(keep[..., None], original_raw.frames, pred.frames)
    if sg_window > pred.n_frames:
        raise DataError(f"smoothing window {sg_window} exceeds {pred.n_frames} frames")
    smooth = savgol_filter(frames, sg_window, sg_order, axis=0, mode="mirror")
    if scope == "gaps":
        smooth = np.where(keep[..., None], frames, smooth)
    return pred.with_frames(smooth)
