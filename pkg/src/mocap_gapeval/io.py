"""File formats and dataset preprocessing.

Marker CSV::

    frame,time,A1:LFHD:x,A1:LFHD:y,A1:LFHD:z,...
    0,0,12.5,-3.25,160.0,...

Empty cells mark absent values. Mask CSV uses ``frame,<marker>...`` with
``1`` for observed and ``0`` for missing.
"""
from __future__ import annotations

import csv
import io as _io
import json
import re
import os
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import (BODY_PARTS, BoneDef, DataError, MarkerSequence, MetricReport,
                   MetricRow, ObservationMask, ParseError, RatingsTable,
                   SkeletonConfig)

_AXES = ("x", "y", "z")


_NEG_ZERO = re.compile(r"(?<![^,])-0(?![^,])")


def fmt(x) -> str:
    """Locale-free float formatting used by every text emitter."""
    s = f"{float(x):.10g}"
    return "0" if s == "-0" else s


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if row:
                yield lineno, row


def _float(cell, path, lineno):
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", path, lineno) from None
    if not np.isfinite(v):
        raise ParseError(f"non-finite cell {cell!r}", path, lineno)
    return v



# ---------------------------------------------------------------- markers

_EMPTY_FIELD = re.compile(r"(?<=,)(?=,|$)", re.M)
_NUMERIC_BYTES = b"0123456789.-+eE,\r\n"


def _fast_block(path, width):
    """Bulk parse of a well-formed marker file body, or None to take the checked path.

    Anything unusual (quoting, non-finite literals, ragged rows, bad frame or
    time columns) returns None so the row-by-row parser reports it precisely.
    """
    with open(path, "rb") as fh:
        fh.readline()
        body = fh.read()
    if not body.strip() or body.translate(None, _NUMERIC_BYTES):
        return None
    body = body.decode("ascii")
    if ",," in body or ",\n" in body or body.endswith(","):
        body = _EMPTY_FIELD.sub("nan", body)
    try:
        block = np.loadtxt(_io.StringIO(body), delimiter=",", ndmin=2, dtype=float)
    except ValueError:
        return None
    if block.shape[1] != width or not np.array_equal(block[:, 0], np.arange(len(block))):
        return None
    if np.isnan(block[:, :2]).any() or (np.diff(block[:, 1]) <= 0).any():
        return None
    return block



def read_markers(path, fps_override=None) -> MarkerSequence:
    rows = _csv_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if header[:2] != ["frame", "time"] or (len(header) - 2) % 3 or len(header) < 5:
        raise ParseError("header must be 'frame,time,<marker>:x,<marker>:y,<marker>:z,...'",
                         path, lineno)
    ids = []
    for k in range(2, len(header), 3):
        names = [h.rpartition(":") for h in header[k:k + 3]]
        if [n[2] for n in names] != list(_AXES) or len({n[0] for n in names}) != 1 or not names[0][0]:
            raise ParseError(f"columns {header[k:k + 3]} are not <marker>:x,y,z", path, lineno)
        ids.append(names[0][0])
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate marker in header", path, lineno)

    width = len(header)
    fast = _fast_block(path, width)
    if fast is not None:
        times, values = fast[:, 1].tolist(), fast[:, 2:]
    else:
        times, values = [], []
        for lineno, row in rows:
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", path, lineno)
            try:
                frame = int(row[0])
            except ValueError:
                raise ParseError(f"bad frame index {row[0]!r}", path, lineno) from None
            if frame != len(times):
                raise ParseError(f"frame index {frame} out of sequence", path, lineno)
            t = _float(row[1], path, lineno)
            if times and not t > times[-1]:
                raise ParseError(f"time {t} is not increasing", path, lineno)
            times.append(t)
            values.append([np.nan if c.strip() == "" else _float(c, path, lineno)
                           for c in row[2:]])
        if not values:
            raise ParseError("no frames", path)

    frames = np.array(values, dtype=float).reshape(len(values), len(ids), 3)
    blank = np.isnan(frames)
    partial = blank.any(axis=2) != blank.all(axis=2)
    if partial.any():
        t, m = np.argwhere(partial)[0]
        raise ParseError(f"marker {ids[m]!r} partially empty", path, int(t) + 2)
    if fps_override is not None:
        fps = float(fps_override)
    elif len(times) >= 2:
        fps = (len(times) - 1) / (times[-1] - times[0])
        fps = round(fps, 6)
    else:
        raise ParseError("cannot infer fps from a single frame; pass fps_override", path)
    return MarkerSequence(frames, fps, ids, ~blank.all(axis=2))


def write_markers(seq: MarkerSequence, path):
    header = ["frame", "time"] + [f"{m}:{a}" for m in seq.marker_ids for a in _AXES]
    lines = [",".join(header)]
    flat = seq.frames.reshape(seq.n_frames, -1)
    row_fmt = ",".join(["%.10g"] * flat.shape[1])
    gaps = np.isnan(flat).any(axis=1)
    for t in range(seq.n_frames):
        if gaps[t]:
            body = ",".join("" if np.isnan(v) else fmt(v) for v in flat[t])
        else:
            body = _NEG_ZERO.sub("0", row_fmt % tuple(flat[t]))
        lines.append(f"{t},{fmt(t / seq.fps)},{body}")
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- masks


def write_mask(mask: ObservationMask, path, marker_ids=None):
    ids = marker_ids or mask.marker_ids
    if ids is None:
        raise DataError("mask has no marker ids to write")
    lines = [",".join(["frame", *ids])]
    for t, row in enumerate(mask.mask):
        lines.append(",".join([str(t)] + ["1" if v else "0" for v in row]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_mask(path) -> ObservationMask:
    rows = _csv_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if not header or header[0] != "frame" or len(header) < 2:
        raise ParseError("header must be 'frame,<marker>,...'", path, lineno)
    ids = header[1:]
    data = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, lineno)
        if row[0] != str(len(data)):
            raise ParseError(f"frame index {row[0]!r} out of sequence", path, lineno)
        bad = [c for c in row[1:] if c not in ("0", "1")]
        if bad:
            raise ParseError(f"mask cells must be 0 or 1, got {bad[0]!r}", path, lineno)
        data.append([c == "1" for c in row[1:]])
    if not data:
        raise ParseError("no frames", path)
    return ObservationMask(np.array(data, dtype=bool), ids)


# ---------------------------------------------------------------- skeleton


def skeleton_from_dict(obj) -> SkeletonConfig:
    try:
        markers = obj["markers"]
        marker_ids = [m["id"] for m in markers]
        marker_actor = {m["id"]: m["actor"] for m in markers}
        parts_in = obj["body_parts"]
        missing = [p for p in BODY_PARTS if p not in parts_in]
        if missing:
            raise DataError(f"missing body part key(s): {missing}")
        return SkeletonConfig(
            marker_ids=marker_ids,
            actors=obj["actors"],
            marker_actor=marker_actor,
            hip_markers={a: tuple(v) for a, v in obj["hip_markers"].items()},
            body_parts={p: tuple(v) for p, v in parts_in.items()},
            bones=[BoneDef(b["name"], b["end_a"], b["end_b"]) for b in obj.get("bones", [])],
            mirror_pairs_x=[tuple(p) for p in obj.get("mirror_pairs_x", [])],
            mirror_pairs_y=[tuple(p) for p in obj.get("mirror_pairs_y", [])],
        )
    except KeyError as e:
        raise DataError(f"skeleton config lacks key {e.args[0]!r}") from None


def skeleton_to_dict(skel: SkeletonConfig) -> dict:
    return {
        "actors": list(skel.actors),
        "markers": [{"id": m, "actor": skel.marker_actor[m]} for m in skel.marker_ids],
        "hip_markers": {a: list(v) for a, v in skel.hip_markers.items()},
        "body_parts": {p: list(skel.body_parts[p]) for p in BODY_PARTS},
        "bones": [{"name": b.name, "end_a": list(b.end_a), "end_b": list(b.end_b)}
                  for b in skel.bones],
        "mirror_pairs_x": [list(p) for p in skel.mirror_pairs_x],
        "mirror_pairs_y": [list(p) for p in skel.mirror_pairs_y],
    }


def read_skeleton(path) -> SkeletonConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", path, e.lineno) from None
    try:
        return skeleton_from_dict(obj)
    except DataError as e:
        raise ParseError(str(e), path) from None


def default_skeleton_path():
    return resources.files("mocap_gapeval") / "data" / "default_skeleton.json"


def default_skeleton() -> SkeletonConfig:
    """Two actors with 63 markers each and six heuristic bones per actor."""
    with resources.as_file(default_skeleton_path()) as p:
        return read_skeleton(p)


# ---------------------------------------------------------------- ratings / metrics


def read_ratings(path, categories=(1, 2, 3, 4, 5)) -> RatingsTable:
    rows = _csv_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if header != ["stimulus_id", "rater_id", "rating"]:
        raise ParseError("header must be 'stimulus_id,rater_id,rating'", path, lineno)
    out = []
    for lineno, row in rows:
        if len(row) != 3:
            raise ParseError(f"expected 3 fields, got {len(row)}", path, lineno)
        try:
            out.append((row[0], row[1], int(row[2])))
        except ValueError:
            raise ParseError(f"rating {row[2]!r} is not an integer", path, lineno) from None
    try:
        return RatingsTable(out, categories)
    except DataError as e:
        raise ParseError(str(e), path) from None


def write_ratings(table: RatingsTable, path):
    lines = ["stimulus_id,rater_id,rating"]
    lines += [f"{s},{r},{v}" for s, r, v in table.rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_metrics(path) -> MetricReport:
    rows = _csv_rows(path)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty file", path) from None
    if header != ["stimulus_id", "metric", "value", "norm_mode"]:
        raise ParseError("header must be 'stimulus_id,metric,value,norm_mode'", path, lineno)
    out = []
    for lineno, row in rows:
        if len(row) != 4:
            raise ParseError(f"expected 4 fields, got {len(row)}", path, lineno)
        try:
            out.append(MetricRow(row[0], row[1], _float(row[2], path, lineno), row[3]))
        except DataError as e:
            raise ParseError(str(e), path, lineno) from None
    return MetricReport(tuple(out))


def write_metrics(report: MetricReport, path):
    lines = ["stimulus_id,metric,value,norm_mode"]
    lines += [f"{r.stimulus_id},{r.metric},{r.value:.9g},{r.norm_mode}" for r in report.rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- preprocessing


@dataclass(frozen=True, eq=False)
class CenteredSequence:
    """Hips-centered markers plus what is needed to undo the centering.

    ``actor_offset`` is hip center of the second actor minus that of the
    first (zeros with one actor). ``root`` is the first actor's hip center,
    kept so :func:`decenter` can restore world coordinates.
    """

    seq: MarkerSequence
    actor_offset: np.ndarray
    root: np.ndarray


def _hip_centers(seq, skel):
    centers = []
    for actor in skel.actors:
        idx = seq.indices(skel.hip_markers[actor])
        gone = ~seq.present[:, idx]
        if gone.any():
            t, k = np.argwhere(gone)[0]
            raise DataError(f"hip marker {skel.hip_markers[actor][k]!r} absent at frame {t}; "
                            "fill hips before centering")
        centers.append(seq.frames[:, idx].mean(axis=1))
    return centers


def _actor_columns(seq, skel):
    return [np.array(seq.indices(skel.actor_markers(a))) for a in skel.actors]


def center_hips(seq: MarkerSequence, skel: SkeletonConfig) -> CenteredSequence:
    skel.check_sequence(seq)
    centers = _hip_centers(seq, skel)
    frames = seq.frames.copy()
    for cols, c in zip(_actor_columns(seq, skel), centers):
        frames[:, cols] -= c[:, None, :]
    if len(centers) >= 2:
        offset = centers[1] - centers[0]
    else:
        offset = np.zeros((seq.n_frames, 3))
    return CenteredSequence(seq.with_frames(frames), offset, centers[0].copy())


def decenter(cs: CenteredSequence, skel: SkeletonConfig) -> MarkerSequence:
    seq = cs.seq
    frames = seq.frames.copy()
    cols = _actor_columns(seq, skel)
    frames[:, cols[0]] += cs.root[:, None, :]
    if len(cols) >= 2:
        frames[:, cols[1]] += (cs.root + cs.actor_offset)[:, None, :]
    return seq.with_frames(frames)


AUGMENT_MODES = ("mirror_x", "mirror_y", "swap_actors")


def actor_partner_map(skel: SkeletonConfig) -> dict:
    """marker -> same-named marker on the other actor (exactly two actors)."""
    if len(skel.actors) != 2:
        raise DataError(f"swap_actors needs exactly 2 actors, got {len(skel.actors)}")
    a, b = (skel.actor_markers(x) for x in skel.actors)

    def local(m, actor):
        prefix = f"{actor}:"
        return m[len(prefix):] if m.startswith(prefix) else m

    la = [local(m, skel.actors[0]) for m in a]
    lb = [local(m, skel.actors[1]) for m in b]
    if la != lb:
        raise DataError("swap_actors needs identical marker layouts for both actors")
    out = dict(zip(a, b))
    out.update(zip(b, a))
    return out


def augment(seq: MarkerSequence, skel: SkeletonConfig, mode: str) -> MarkerSequence:
    skel.check_sequence(seq)
    if mode == "mirror_x" or mode == "mirror_y":
        axis = mode[-1]
        partner = skel.mirror_map(axis)
        flip = _AXES.index(axis)
    elif mode == "swap_actors":
        partner = actor_partner_map(skel)
        flip = None
    else:
        raise DataError(f"unknown augmentation {mode!r}; expected one of {AUGMENT_MODES}")
    src = np.arange(seq.n_markers)
    for m, p in partner.items():
        src[seq.index(m)] = seq.index(p)
    frames = seq.frames[:, src].copy()
    present = seq.present[:, src]
    if flip is not None:
        frames[..., flip] *= -1.0
    return seq.with_frames(frames, present)
