"""Corruption of clean sequences: gap masks, curriculum schedules, noise, interpolation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (CurriculumParams, DataError, MarkerSequence, ObservationMask,
                   SkeletonConfig)

GAP_MODES = ("iid", "window", "bodypart")


@dataclass(frozen=True)
class GapSpec:
    """How gaps are sampled.

    ``iid`` uses ``p``; ``window`` uses ``n`` markers and duration ``d``;
    ``bodypart`` uses ``part`` and ``d``.
    """

    mode: str
    p: float = 0.0
    n: int = 0
    d: int = 0
    part: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.mode not in GAP_MODES:
            raise DataError(f"unknown gap mode {self.mode!r}; expected one of {GAP_MODES}")
        if not 0.0 <= self.p <= 1.0:
            raise DataError(f"p must lie in [0, 1], got {self.p}")
        if self.n < 0 or self.d < 0:
            raise DataError("n and d must be non-negative")


def sample_mask(T: int, M: int, spec: GapSpec, skel: SkeletonConfig = None,
                marker_ids=None) -> ObservationMask:
    """Sample an observation mask; first and last frames are always observed."""
    if T < 2:
        raise DataError("need at least 2 frames")
    rng = np.random.default_rng(spec.seed)
    mask = np.ones((T, M), dtype=bool)
    if marker_ids is None and skel is not None and len(skel.marker_ids) == M:
        marker_ids = skel.marker_ids

    if spec.mode == "iid":
        if T > 2:
            mask[1:-1] = rng.random((T - 2, M)) >= spec.p
        return ObservationMask(mask, marker_ids)

    d = int(spec.d)
    if d > T - 2:
        raise DataError(f"gap of {d} frames does not fit in {T} frames "
                        "(first and last frames stay observed)")
    if spec.mode == "window":
        if spec.n > M:
            raise DataError(f"cannot hide {spec.n} of {M} markers")
        chosen = rng.choice(M, size=int(spec.n), replace=False)
        onsets = rng.integers(1, T - 1 - d, size=len(chosen), endpoint=True)
        for m, s in zip(chosen, onsets):
            mask[s:s + d, m] = False
    else:
        if skel is None:
            raise DataError("bodypart gaps need a skeleton")
        if spec.part not in skel.body_parts:
            raise DataError(f"unknown body part {spec.part!r}")
        if marker_ids is None:
            raise DataError("bodypart gaps need marker ids")
        ids = list(marker_ids)
        cols = [ids.index(m) for m in skel.body_parts[spec.part]]
        s = int(rng.integers(1, T - 1 - d, endpoint=True))
        mask[s:s + d, cols] = False
    return ObservationMask(mask, marker_ids)


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def curriculum(ep: int, params: CurriculumParams, T: int, M: int):
    """(number of missing markers, gap duration in frames) for epoch ``ep``."""
    if ep < 0:
        raise DataError("epoch must be >= 0")
    number = min(round_half_away(ep * params.n_rate + params.n_start), M)
    duration = min(round_half_away(ep * params.d_rate + params.d_start), T - 2)
    return number, duration


def noise_sigma(ep: float, c: float) -> float:
    """tanh noise schedule: near zero early, c/2 at epoch 10, approaching c."""
    return (math.tanh((ep - 10) / 20) + 1) * c / 2


def add_masked_noise(seq: MarkerSequence, mask: ObservationMask, sigma: float,
                     seed) -> MarkerSequence:
    """Gaussian noise on missing entries only; observed entries pass through untouched."""
    seq.require_present("add_masked_noise")
    mask.check_matches(seq)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(seq.frames.shape) * sigma
    frames = np.where(mask.mask[..., None], seq.frames, seq.frames + noise)
    return seq.with_frames(frames)


def add_global_noise(seq: MarkerSequence, sigma: float, seed) -> MarkerSequence:
    seq.require_present("add_global_noise")
    rng = np.random.default_rng(seed)
    return seq.with_frames(seq.frames + rng.standard_normal(seq.frames.shape) * sigma)


def apply_mask(seq: MarkerSequence, mask: ObservationMask) -> MarkerSequence:
    mask.check_matches(seq)
    return seq.with_frames(seq.frames, seq.present & mask.mask)


def interpolate_gaps(seq: MarkerSequence) -> MarkerSequence:
    """Fill every gap with a cubic Hermite segment.

    Anchors are the last observation before and the first after the gap.
    Endpoint slopes are one-sided first differences taken outside the gap,
    or zero when the neighbouring frame is itself missing.
    """
    present = seq.present
    T = seq.n_frames
    if not (present[0].all() and present[-1].all()):
        m = int(np.flatnonzero(~(present[0] & present[-1]))[0])
        raise DataError(f"marker {seq.marker_ids[m]!r} must be observed in the first and "
                        "last frame; extrapolation is not supported")
    if seq.fully_present:
        return seq
    frames = seq.frames.copy()
    for m in np.flatnonzero(~present.all(axis=0)):
        obs = present[:, m]
        y = frames[:, m]
        t = 1
        while t < T:
            if obs[t]:
                t += 1
                continue
            a = t - 1
            b = t
            while not obs[b]:
                b += 1
            m0 = y[a] - y[a - 1] if a >= 1 and obs[a - 1] else np.zeros(3)
            m1 = y[b + 1] - y[b] if b + 1 < T and obs[b + 1] else np.zeros(3)
            h = b - a
            s = (np.arange(a + 1, b) - a) / h
            s2, s3 = s * s, s * s * s
            h00 = 2 * s3 - 3 * s2 + 1
            h10 = s3 - 2 * s2 + s
            h01 = -2 * s3 + 3 * s2
            h11 = s3 - s2
            y[a + 1:b] = (h00[:, None] * y[a] + h10[:, None] * h * m0
                          + h01[:, None] * y[b] + h11[:, None] * h * m1)
            t = b + 1
    return seq.with_frames(frames, np.ones_like(present))
