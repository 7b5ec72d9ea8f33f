"""Shared data model: marker sequences, masks, skeleton layout and parameters.

Positions are in centimeters. Missingness is tracked per marker and frame;
the per-coordinate view used by the equations is obtained by repeating each
marker bit over its three coordinates.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

BODY_PARTS = ("hips", "torso", "head", "limbs")
METRIC_NAMES = ("rmse", "vd_gt", "vd", "bdp_gt", "bdp")


class GapEvalError(Exception):
    """Base class for toolkit errors."""


class DataError(GapEvalError, ValueError):
    """Input data violates a precondition (shape, presence, configuration)."""


class ParseError(DataError):
    """A file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class NumericError(GapEvalError, ArithmeticError):
    """A numerical procedure failed (singular system, undefined statistic)."""


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarkerSequence:
    """T x M x 3 marker positions with a T x M presence flag.

    Values behind ``present == False`` are stored as NaN and are never read
    by numeric code; use :meth:`require_present` before computing on them.
    """

    frames: np.ndarray
    fps: float
    marker_ids: tuple
    present: np.ndarray = None

    def __post_init__(self):
        frames = np.array(self.frames, dtype=float)
        if frames.ndim != 3 or frames.shape[2] != 3:
            raise DataError(f"frames must be T x M x 3, got shape {frames.shape}")
        T, M, _ = frames.shape
        if T < 1 or M < 1:
            raise DataError(f"need at least one frame and one marker, got T={T}, M={M}")
        if not self.fps > 0:
            raise DataError(f"fps must be positive, got {self.fps}")
        ids = tuple(str(m) for m in self.marker_ids)
        if len(ids) != M:
            raise DataError(f"{len(ids)} marker ids for {M} markers")
        if len(set(ids)) != M:
            dup = sorted({m for m in ids if ids.count(m) > 1})
            raise DataError(f"duplicate marker ids: {dup}")
        if self.present is None:
            present = np.all(np.isfinite(frames), axis=2)
        else:
            present = np.array(self.present, dtype=bool)
            if present.shape != (T, M):
                raise DataError(f"present must be {(T, M)}, got {present.shape}")
        if not np.all(np.isfinite(frames[present])):
            raise DataError("non-finite value at a present entry")
        frames[~present] = np.nan
        object.__setattr__(self, "frames", _readonly(frames))
        object.__setattr__(self, "present", _readonly(present))
        object.__setattr__(self, "marker_ids", ids)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_markers(self) -> int:
        return self.frames.shape[1]

    @property
    def fully_present(self) -> bool:
        return bool(self.present.all())

    def index(self, marker_id) -> int:
        try:
            return self.marker_ids.index(marker_id)
        except ValueError:
            raise DataError(f"unknown marker {marker_id!r}") from None

    def indices(self, marker_ids) -> list:
        return [self.index(m) for m in marker_ids]

    def require_present(self, what="operation"):
        if not self.fully_present:
            t, m = np.argwhere(~self.present)[0]
            raise DataError(
                f"{what} needs a fully present sequence; marker "
                f"{self.marker_ids[m]!r} is absent at frame {t}"
            )
        return self

    def with_frames(self, frames, present=None) -> "MarkerSequence":
        return MarkerSequence(frames, self.fps, self.marker_ids,
                              self.present if present is None else present)

    def equals(self, other, atol=0.0) -> bool:
        if (self.frames.shape != other.frames.shape
                or self.marker_ids != other.marker_ids
                or self.fps != other.fps
                or not np.array_equal(self.present, other.present)):
            return False
        p = self.present
        if atol == 0.0:
            return bool(np.array_equal(self.frames[p], other.frames[p]))
        return bool(np.all(np.abs(self.frames[p] - other.frames[p]) <= atol))


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """T x M boolean mask, True where the marker is observed."""

    mask: np.ndarray
    marker_ids: tuple = None

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.ndim != 2:
            raise DataError(f"mask must be T x M, got shape {mask.shape}")
        object.__setattr__(self, "mask", _readonly(mask))
        if self.marker_ids is not None:
            ids = tuple(self.marker_ids)
            if len(ids) != mask.shape[1]:
                raise DataError(f"{len(ids)} marker ids for mask with {mask.shape[1]} columns")
            object.__setattr__(self, "marker_ids", ids)

    @classmethod
    def full(cls, T, M, marker_ids=None):
        return cls(np.ones((T, M), dtype=bool), marker_ids)

    @property
    def shape(self):
        return self.mask.shape

    @property
    def missing(self) -> np.ndarray:
        return ~self.mask

    def expand(self) -> np.ndarray:
        """Per-coordinate T x 3M form, marker-major like :func:`flatten`."""
        return np.repeat(self.mask, 3, axis=1)

    def check_matches(self, seq: MarkerSequence):
        if self.mask.shape != seq.present.shape:
            raise DataError(f"mask shape {self.mask.shape} does not match sequence "
                            f"{seq.present.shape}")
        if self.marker_ids is not None and self.marker_ids != seq.marker_ids:
            raise DataError("mask marker ids do not match the sequence")
        return self

    def restrict(self, marker_indices) -> "ObservationMask":
        """Missing entries limited to the given markers; everything else observed."""
        keep = np.zeros(self.mask.shape[1], dtype=bool)
        keep[list(marker_indices)] = True
        return ObservationMask(self.mask | ~keep[None, :], self.marker_ids)


@dataclass(frozen=True)
class BoneDef:
    name: str
    end_a: tuple
    end_b: tuple

    def __post_init__(self):
        object.__setattr__(self, "end_a", tuple(self.end_a))
        object.__setattr__(self, "end_b", tuple(self.end_b))
        if not self.end_a or not self.end_b:
            raise DataError(f"bone {self.name!r} has an empty endpoint")
        if set(self.end_a) & set(self.end_b):
            raise DataError(f"bone {self.name!r} endpoints share markers")


@dataclass(frozen=True, eq=False)
class SkeletonConfig:
    """Marker layout: actors, hip anchors, body parts, bones and mirror pairs."""

    marker_ids: tuple
    actors: tuple
    marker_actor: Mapping[str, str]
    hip_markers: Mapping[str, tuple]
    body_parts: Mapping[str, tuple]
    bones: tuple = ()
    mirror_pairs_x: tuple = ()
    mirror_pairs_y: tuple = ()

    def __post_init__(self):
        ids = tuple(self.marker_ids)
        known = set(ids)
        if len(known) != len(ids):
            raise DataError("duplicate marker ids in skeleton")
        object.__setattr__(self, "marker_ids", ids)
        object.__setattr__(self, "actors", tuple(self.actors))

        def check(ref, where):
            if ref not in known:
                raise DataError(f"{where} references unknown marker {ref!r}")

        for m, a in self.marker_actor.items():
            check(m, "marker_actor")
            if a not in self.actors:
                raise DataError(f"marker {m!r} assigned to unknown actor {a!r}")
        unassigned = [m for m in ids if m not in self.marker_actor]
        if unassigned:
            raise DataError(f"markers without actor: {unassigned}")
        for a in self.actors:
            hips = self.hip_markers.get(a)
            if not hips:
                raise DataError(f"actor {a!r} has no hip markers")
            for m in hips:
                check(m, f"hip_markers[{a}]")
                if self.marker_actor[m] != a:
                    raise DataError(f"hip marker {m!r} belongs to actor {self.marker_actor[m]!r}, not {a!r}")

        missing_parts = [p for p in BODY_PARTS if p not in self.body_parts]
        if missing_parts:
            raise DataError(f"missing body part(s): {missing_parts}")
        extra = [p for p in self.body_parts if p not in BODY_PARTS]
        if extra:
            raise DataError(f"unknown body part(s): {extra}")
        parts = {}
        for p in BODY_PARTS:
            members = tuple(self.body_parts[p])
            for m in members:
                check(m, f"body part {p!r}")
            parts[p] = members
        covered = set().union(*map(set, parts.values()))
        uncovered = [m for m in ids if m not in covered]
        if uncovered:
            raise DataError(f"markers in no body part: {uncovered}")
        object.__setattr__(self, "body_parts", parts)

        bones = tuple(b if isinstance(b, BoneDef) else BoneDef(**b) for b in self.bones)
        for b in bones:
            for m in b.end_a + b.end_b:
                check(m, f"bone {b.name!r}")
        object.__setattr__(self, "bones", bones)

        for attr in ("mirror_pairs_x", "mirror_pairs_y"):
            pairs = tuple((str(a), str(b)) for a, b in getattr(self, attr))
            seen = {}
            for a, b in pairs:
                check(a, attr)
                check(b, attr)
                if a == b:
                    raise DataError(f"{attr}: marker {a!r} paired with itself")
                for u, v in ((a, b), (b, a)):
                    if seen.get(u, v) != v:
                        raise DataError(f"{attr}: marker {u!r} paired with both "
                                        f"{seen[u]!r} and {v!r}")
                    seen[u] = v
            object.__setattr__(self, attr, pairs)

    def actor_markers(self, actor) -> tuple:
        return tuple(m for m in self.marker_ids if self.marker_actor[m] == actor)

    def mirror_map(self, axis) -> dict:
        """marker -> partner for the given axis ('x' or 'y'); unpaired map to themselves."""
        pairs = self.mirror_pairs_x if axis == "x" else self.mirror_pairs_y
        out = {m: m for m in self.marker_ids}
        for a, b in pairs:
            out[a], out[b] = b, a
        return out

    def check_sequence(self, seq: MarkerSequence):
        """Raise unless every skeleton marker exists in ``seq``."""
        have = set(seq.marker_ids)
        lost = [m for m in self.marker_ids if m not in have]
        if lost:
            raise DataError(f"sequence lacks skeleton markers: {lost[:5]}"
                            + (" ..." if len(lost) > 5 else ""))
        return self


@dataclass(frozen=True)
class CurriculumParams:
    n_start: float = 3.0
    n_rate: float = 0.5
    d_start: float = 10.0
    d_rate: float = 4.0
    c: float = 2.0
    lam: float = 1.0

    def __post_init__(self):
        for name in ("n_start", "n_rate", "d_start", "d_rate", "lam"):
            if getattr(self, name) < 0:
                raise DataError(f"{name} must be non-negative")
        if not self.c > 0:
            raise DataError("noise cap c must be positive")

    @classmethod
    def from_curve(cls, curve: str, c=2.0, lam=1.0):
        """Parse ``"n_start,n_rate,d_start,d_rate"``."""
        try:
            vals = [float(v) for v in curve.split(",")]
        except ValueError:
            raise DataError(f"bad curve {curve!r}") from None
        if len(vals) != 4:
            raise DataError(f"curve needs 4 values, got {len(vals)}")
        return cls(*vals, c=c, lam=lam)


@dataclass(frozen=True)
class RatingsTable:
    """(stimulus, rater, rating) rows; at most one rating per stimulus-rater pair."""

    rows: tuple
    categories: tuple = (1, 2, 3, 4, 5)

    def __post_init__(self):
        rows = tuple((str(s), str(r), int(v)) for s, r, v in self.rows)
        cats = tuple(self.categories)
        seen = set()
        for s, r, v in rows:
            if v not in cats:
                raise DataError(f"rating {v} for stimulus {s!r} not in categories {cats}")
            if (s, r) in seen:
                raise DataError(f"rater {r!r} rated stimulus {s!r} twice")
            seen.add((s, r))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "categories", cats)

    def stimuli(self) -> list:
        return list(dict.fromkeys(s for s, _, _ in self.rows))

    def by_stimulus(self) -> dict:
        out = {}
        for s, _, v in self.rows:
            out.setdefault(s, []).append(v)
        return out


@dataclass(frozen=True)
class MetricRow:
    stimulus_id: str
    metric: str
    value: float
    norm_mode: str

    def __post_init__(self):
        if self.metric not in METRIC_NAMES:
            raise DataError(f"unknown metric {self.metric!r}")
        if not (np.isfinite(self.value) and self.value >= 0):
            raise DataError(f"metric value must be finite and >= 0, got {self.value}")


@dataclass(frozen=True)
class MetricReport:
    rows: tuple = field(default_factory=tuple)

    def values(self, metric) -> dict:
        return {r.stimulus_id: r.value for r in self.rows if r.metric == metric}

    def metrics(self) -> list:
        return list(dict.fromkeys(r.metric for r in self.rows))


def flatten(seq: MarkerSequence) -> np.ndarray:
    """T x 3M view with columns (m0x, m0y, m0z, m1x, ...)."""
    T, M, _ = seq.frames.shape
    return seq.frames.reshape(T, 3 * M)


def unflatten(matrix, fps, marker_ids, present=None) -> MarkerSequence:
    matrix = np.asarray(matrix, dtype=float)
    T = matrix.shape[0]
    if matrix.ndim != 2 or matrix.shape[1] % 3:
        raise DataError(f"expected T x 3M matrix, got {matrix.shape}")
    return MarkerSequence(matrix.reshape(T, -1, 3), fps, marker_ids, present)


def velocity(seq: MarkerSequence) -> np.ndarray:
    """Frame differences ``frames[t+1] - frames[t]`` in cm/frame."""
    if seq.n_frames < 2:
        raise DataError("velocity needs at least 2 frames")
    seq.require_present("velocity")
    return np.diff(seq.frames, axis=0)
