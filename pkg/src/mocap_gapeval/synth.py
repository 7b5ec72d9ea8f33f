"""Synthetic clean marker motion.

Each actor is a set of rigid segments (pelvis, torso, head, two arms, two
legs) posed from a fixed template and driven by sums of sinusoids: a
global translation and heading per actor, and small rotations of every
segment about its parent joint. Heuristic bones never span two segments, so
clean bone lengths are constant up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BoneDef, DataError, MarkerSequence, SkeletonConfig

# name: (x, y, z, segment); actor faces +y, left is -x, z is up, cm.
TEMPLATE = {
    # head
    "LFHD": (-10.5, 8.0, 170.0, "head"), "RFHD": (10.5, 8.0, 170.0, "head"),
    "LBHD": (-10.5, -8.0, 168.0, "head"), "RBHD": (10.5, -8.0, 168.0, "head"),
    "HEDO": (0.0, 0.0, 180.0, "head"),
    "LTMP": (-9.0, 3.0, 163.0, "head"), "RTMP": (9.0, 3.0, 163.0, "head"),
    # torso
    "C7": (0.0, -8.0, 150.0, "torso"), "T4": (0.0, -10.0, 140.0, "torso"),
    "T10": (0.0, -11.0, 125.0, "torso"), "CLAV": (0.0, 7.0, 148.0, "torso"),
    "STRN": (0.0, 10.0, 130.0, "torso"), "XYPH": (0.0, 10.0, 120.0, "torso"),
    "LBAK": (-8.0, -11.0, 135.0, "torso"), "RBAK": (8.0, -11.0, 135.0, "torso"),
    "LSHO": (-18.0, 0.0, 148.0, "torso"), "RSHO": (18.0, 0.0, 148.0, "torso"),
    # hips
    "LASI": (-13.0, 9.0, 100.0, "pelvis"), "RASI": (13.0, 9.0, 100.0, "pelvis"),
    "LPSI": (-8.0, -10.0, 102.0, "pelvis"), "RPSI": (8.0, -10.0, 102.0, "pelvis"),
    "LHIP": (-17.0, 0.0, 95.0, "pelvis"), "RHIP": (17.0, 0.0, 95.0, "pelvis"),
}
_ARM = {
    "UPA": (-21.0, -2.0, 132.0), "ELB": (-23.0, -3.0, 118.0), "MEL": (-17.0, -3.0, 118.0),
    "FRM": (-22.0, 2.0, 108.0), "WRA": (-22.0, 6.0, 96.0), "WRB": (-18.0, 6.0, 96.0),
    "FIN": (-20.0, 9.0, 88.0), "THM": (-17.0, 10.0, 91.0), "IDX": (-18.0, 11.0, 86.0),
    "PNK": (-23.0, 8.0, 87.0),
}
_LEG = {
    "THI": (-13.0, 3.0, 75.0), "KNE": (-13.0, 0.0, 55.0), "KNM": (-5.0, 0.0, 55.0),
    "TIB": (-11.0, 2.0, 35.0), "ANK": (-12.0, -2.0, 10.0), "MED": (-5.0, -2.0, 10.0),
    "HEE": (-9.0, -7.0, 4.0), "TOE": (-9.0, 14.0, 3.0), "MT5": (-13.0, 8.0, 3.0),
    "MT1": (-5.0, 10.0, 3.0),
}
for _side, _sign in (("L", 1.0), ("R", -1.0)):
    _s = "left" if _side == "L" else "right"
    for _n, (_x, _y, _z) in _ARM.items():
        TEMPLATE[_side + _n] = (_sign * _x, _y, _z, f"{_s}_arm")
    for _n, (_x, _y, _z) in _LEG.items():
        TEMPLATE[_side + _n] = (_sign * _x, _y, _z, f"{_s}_leg")

# segment: (parent, pivot)
SEGMENTS = {
    "pelvis": (None, (0.0, 0.0, 100.0)),
    "torso": ("pelvis", (0.0, 0.0, 105.0)),
    "head": ("torso", (0.0, 0.0, 152.0)),
    "left_arm": ("torso", (-18.0, 0.0, 145.0)),
    "right_arm": ("torso", (18.0, 0.0, 145.0)),
    "left_leg": ("pelvis", (-9.0, 0.0, 95.0)),
    "right_leg": ("pelvis", (9.0, 0.0, 95.0)),
}
SEGMENT_PART = {"pelvis": "hips", "torso": "torso", "head": "head", "left_arm": "limbs",
                "right_arm": "limbs", "left_leg": "limbs", "right_leg": "limbs"}
# relative articulation strength per segment (radians per cm of amplitude)
# (tuned so a default SynthSpec gives a clean vd near 0.52 cm at 120 fps)
_SEGMENT_GAIN = {"pelvis": 0.004, "torso": 0.01, "head": 0.015, "left_arm": 0.082,
                 "right_arm": 0.082, "left_leg": 0.041, "right_leg": 0.041}

HIP_MARKERS = ("LASI", "RASI", "LPSI", "RPSI")
BONES = (
    ("head", ("LFHD", "LBHD"), ("RFHD", "RBHD")),
    ("left_hand", ("LELB", "LMEL"), ("LWRA", "LWRB")),
    ("right_hand", ("RELB", "RMEL"), ("RWRA", "RWRB")),
    ("hips", ("LASI", "LPSI"), ("RASI", "RPSI")),
    ("left_leg", ("LKNE", "LKNM"), ("LANK", "LMED")),
    ("right_leg", ("RKNE", "RKNM"), ("RANK", "RMED")),
)


def template_skeleton(actors=("A1", "A2"), names=None) -> SkeletonConfig:
    """Skeleton built from :data:`TEMPLATE` with ids ``<actor>:<name>``.

    ``names`` restricts the marker subset (bones whose markers are dropped
    are dropped too).
    """
    names = list(TEMPLATE) if names is None else list(names)
    ids, actor_of = [], {}
    parts = {p: [] for p in ("hips", "torso", "head", "limbs")}
    bones, mx = [], []
    for a in actors:
        for n in names:
            mid = f"{a}:{n}"
            ids.append(mid)
            actor_of[mid] = a
            parts[SEGMENT_PART[TEMPLATE[n][3]]].append(mid)
            if n.startswith("L") and "R" + n[1:] in names:
                mx.append((mid, f"{a}:R{n[1:]}"))
        for bname, ea, eb in BONES:
            if all(n in names for n in ea + eb):
                bones.append(BoneDef(f"{a}:{bname}", tuple(f"{a}:{n}" for n in ea),
                                     tuple(f"{a}:{n}" for n in eb)))
    hips = {a: tuple(f"{a}:{n}" for n in HIP_MARKERS if n in names) for a in actors}
    return SkeletonConfig(ids, actors, actor_of, hips, parts, bones, mx, list(mx))


@dataclass(frozen=True)
class SynthSpec:
    """``amplitude`` scales every motion component (cm; angles derive from it)."""

    actors: int = 2
    seconds: float = 20.0
    fps: float = 120.0
    amplitude: float = 12.0
    band: tuple = (0.2, 6.0)
    seed: int = 0

    def __post_init__(self):
        if self.actors not in (1, 2):
            raise DataError("actors must be 1 or 2")
        if self.n_frames < 3:
            raise DataError("duration * fps must give at least 3 frames")
        if not self.amplitude >= 0:
            raise DataError("amplitude must be non-negative")
        lo, hi = self.band
        if not 0 < lo <= hi:
            raise DataError(f"bad frequency band {self.band}")

    @property
    def n_frames(self) -> int:
        return int(round(self.seconds * self.fps))


def _rot(rx, ry, rz):
    """Batched rotation matrices R = Rz @ Ry @ Rx for angle arrays of shape (T,)."""
    cx, sx, cy, sy, cz, sz = np.cos(rx), np.sin(rx), np.cos(ry), np.sin(ry), np.cos(rz), np.sin(rz)
    R = np.empty(rx.shape + (3, 3))
    R[:, 0, 0] = cz * cy
    R[:, 0, 1] = cz * sy * sx - sz * cx
    R[:, 0, 2] = cz * sy * cx + sz * sx
    R[:, 1, 0] = sz * cy
    R[:, 1, 1] = sz * sy * sx + cz * cx
    R[:, 1, 2] = sz * sy * cx - cz * sx
    R[:, 2, 0] = -sy
    R[:, 2, 1] = cy * sx
    R[:, 2, 2] = cy * cx
    return R


def _wave(rng, t, band, n_terms=4):
    lo, hi = band
    # one frequency per stratum keeps the spectrum similar across seeds
    f = lo + (hi - lo) * (np.arange(n_terms) + rng.uniform(0, 1, n_terms)) / n_terms
    ph = rng.uniform(0, 2 * np.pi, n_terms)
    w = rng.uniform(0.8, 1.0, n_terms)
    w /= w.sum()
    return (w[None, :] * np.sin(2 * np.pi * t[:, None] * f[None, :] + ph[None, :])).sum(axis=1)


def _layout(skel, actor):
    """Template names and segments for an actor's markers, in skeleton order."""
    out = []
    for mid in skel.actor_markers(actor):
        name = mid.split(":", 1)[1] if ":" in mid else mid
        if name not in TEMPLATE:
            raise DataError(f"marker {mid!r} has no template position; "
                            "synth supports template-named markers only")
        out.append((mid, name))
    return out


def generate(spec: SynthSpec, skel: SkeletonConfig) -> MarkerSequence:
    if len(skel.actors) != spec.actors:
        raise DataError(f"skeleton has {len(skel.actors)} actor(s), spec asks for {spec.actors}")
    rng = np.random.default_rng(spec.seed)
    T = spec.n_frames
    t = np.arange(T) / spec.fps
    A = spec.amplitude
    frames = np.empty((T, len(skel.marker_ids), 3))
    index = {m: i for i, m in enumerate(skel.marker_ids)}
    lo, hi = spec.band
    slow = (lo, max(lo, hi / 4))

    for k, actor in enumerate(skel.actors):
        layout = _layout(skel, actor)
        # actors start facing each other across the origin and sway through it
        side = -1.0 if k == 0 else 1.0
        base = np.array([side * 45.0 if spec.actors == 2 else 0.0, 0.0, 0.0])
        heading = -side * np.pi / 2 if spec.actors == 2 else 0.0
        trans = np.stack([base[0] - side * 4.0 * A * (_wave(rng, t, slow) + 0.5 * np.sin(np.pi * t / 7.0)),
                          base[1] + 3.0 * A * _wave(rng, t, slow),
                          base[2] + 0.3 * A * _wave(rng, t, (lo, hi))], axis=1)
        yaw = heading + 0.04 * A * _wave(rng, t, slow)

        world = {}
        for seg, (parent, pivot) in SEGMENTS.items():
            g = _SEGMENT_GAIN[seg] * A
            local = _rot(g * _wave(rng, t, (lo, hi)), g * _wave(rng, t, (lo, hi)),
                         g * _wave(rng, t, (lo, hi)))
            pivot = np.asarray(pivot)
            if parent is None:
                R = np.einsum("tij,tjk->tik", _rot(np.zeros(T), np.zeros(T), yaw), local)
                off = trans + pivot - np.einsum("tij,j->ti", R, pivot)
            else:
                PR, Poff = world[parent]
                R = np.einsum("tij,tjk->tik", PR, local)
                # joint stays attached: parent transform of pivot
                joint = np.einsum("tij,j->ti", PR, pivot) + Poff
                off = joint - np.einsum("tij,j->ti", R, pivot)
            world[seg] = (R, off)

        for mid, name in layout:
            x, y, z, seg = TEMPLATE[name]
            R, off = world[seg]
            frames[:, index[mid]] = np.einsum("tij,j->ti", R, np.array([x, y, z])) + off
    return MarkerSequence(frames, spec.fps, skel.marker_ids)
