"""Command-line entry point: ``mocap-gapeval <command> ...``.

Exit codes: 0 success, 2 usage error, 3 data or parse error, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import (BODY_PARTS, METRIC_NAMES, CurriculumParams, DataError, GapEvalError,
                   MetricReport, MetricRow, NumericError)
from .corrupt import (GapSpec, add_global_noise, add_masked_noise, apply_mask, curriculum,
                      interpolate_gaps, noise_sigma, round_half_away, sample_mask)
from .io import (atomic_write_text, default_skeleton_path, read_markers, read_mask,
                 read_metrics, read_ratings, read_skeleton, write_markers, write_mask,
                 write_metrics)
from .metrics import NORM_MODES, compute_metrics
from .reconstruct import (ReconstructionError, RidgeDenoiser, fill_hips_outwards,
                          fill_interpolation, fill_ridge, postprocess, train_ridge)
from .report import render
from .stats import (aggregate, alpha_bootstrap_ci, kendall_tau, krippendorff_alpha,
                    tau_bootstrap_ci)
from .synth import SynthSpec, generate

log = logging.getLogger("mocap_gapeval")


class UsageError(GapEvalError):
    pass


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(manifest_path, command, inputs, params, outputs, seeds=()):
    doc = {
        "command": command,
        "tool_version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seeds": list(seeds),
        "params": params,
        "outputs": {str(p): _sha256(p) for p in outputs},
    }
    atomic_write_text(manifest_path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _manifest_for(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


def _skeleton(path):
    return read_skeleton(path if path else default_skeleton_path())


def _params_dict(args, skip=("func",)):
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------- commands


def cmd_synth(args):
    skel = _skeleton(args.skel)
    spec = SynthSpec(actors=args.actors, seconds=args.seconds, fps=args.fps,
                     amplitude=args.amplitude, seed=args.seed)
    seq = generate(spec, skel)
    write_markers(seq, args.out)
    _write_manifest(_manifest_for(args.out), "synth", [p for p in [args.skel] if p],
                    _params_dict(args), [args.out], [args.seed])


def cmd_corrupt(args):
    clean = read_markers(args.inp)
    clean.require_present("corrupt")
    skel = _skeleton(args.skel) if (args.skel or args.mode == "bodypart") else None
    T, M = clean.n_frames, clean.n_markers
    n, d = args.n, args.d
    if args.epoch is not None and args.curve is not None:
        cn, cd = curriculum(args.epoch, CurriculumParams.from_curve(args.curve), T, M)
        n = cn if n is None else n
        d = cd if d is None else d
    if args.mode in ("window", "bodypart") and d is None or args.mode == "window" and n is None:
        raise UsageError(f"--mode {args.mode} needs --n/--d or --epoch with --curve")
    if args.mode == "bodypart" and not args.part:
        raise UsageError("--mode bodypart needs --part")
    if args.mode == "iid" and args.p is None:
        raise UsageError("--mode iid needs --p")
    spec = GapSpec(args.mode, p=args.p or 0.0, n=int(n or 0), d=round_half_away(d or 0),
                   part=args.part or "", seed=args.seed)
    ss = np.random.SeedSequence(args.seed)
    noise_seed, global_seed = (int(s) for s in ss.generate_state(2))
    mask = sample_mask(T, M, spec, skel, marker_ids=clean.marker_ids)
    seq = clean
    if args.global_sigma:
        seq = add_global_noise(seq, args.global_sigma, global_seed)
    if args.noise_c is not None:
        # denoising-style input: gaps interpolated, then noise on the missing entries
        sigma = noise_sigma(args.epoch or 0, args.noise_c)
        out = add_masked_noise(interpolate_gaps(apply_mask(seq, mask)), mask, sigma, noise_seed)
    else:
        out = apply_mask(seq, mask)
    write_markers(out, args.out)
    write_mask(mask, args.mask_out)
    _write_manifest(_manifest_for(args.out), "corrupt", [args.inp], _params_dict(args),
                    [args.out, args.mask_out], [args.seed])


def cmd_train(args):
    skel = _skeleton(args.skel)
    paths = sorted(Path(args.clean).glob("*.csv"))
    if not paths:
        raise DataError(f"no .csv files in {args.clean}")
    seqs = [read_markers(p) for p in paths]
    params = CurriculumParams.from_curve(args.curve, c=args.noise_c, lam=args.lam)
    targets = skel.body_parts[args.part] if args.part else None
    model = train_ridge(seqs, skel, params, args.epochs, args.window, args.seed, reg=args.reg,
                        targets=targets,
                        progress=lambda ep: log.info("epoch %d/%d", ep + 1, args.epochs))
    model.save(args.out)
    _write_manifest(_manifest_for(args.out), "train", paths, _params_dict(args), [args.out],
                    [args.seed])


def cmd_fill(args):
    corrupted = read_markers(args.inp)
    mask = read_mask(args.mask).check_matches(corrupted)
    skel = _skeleton(args.skel)
    inputs = [args.inp, args.mask]
    if args.method == "interp":
        pred = fill_interpolation(corrupted, mask)
    elif args.method == "ridge":
        if not args.model:
            raise UsageError("--method ridge needs --model")
        inputs.append(args.model)
        pred = fill_ridge(RidgeDenoiser.load(args.model), corrupted, mask, skel)
    else:
        models = {}
        for part in BODY_PARTS:
            path = getattr(args, f"model_{part}") or args.model
            if not path:
                raise UsageError(f"--method hips-outwards needs --model-{part} (or --model)")
            inputs.append(path)
            models[part] = RidgeDenoiser.load(path)
        pred = fill_hips_outwards(models, corrupted, mask, skel)
    if args.smooth_window is not None:
        raw = read_markers(args.raw) if args.raw else corrupted
        if args.raw:
            inputs.append(args.raw)
        pred = postprocess(pred, raw, mask, args.smooth_window, args.smooth_order,
                           args.smooth_scope)
    write_markers(pred, args.out)
    _write_manifest(_manifest_for(args.out), "fill", inputs, _params_dict(args), [args.out])


def _paired(primary, other, what):
    if not other:
        return [None] * len(primary)
    if len(other) != len(primary):
        raise UsageError(f"{len(primary)} --pred files but {len(other)} {what} files")
    return other


def cmd_eval(args):
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    unknown = [m for m in metrics if m not in METRIC_NAMES]
    if unknown:
        raise UsageError(f"unknown metric(s): {unknown}")
    needs_gt = [m for m in metrics if m in ("rmse", "vd_gt", "bdp_gt")]
    if needs_gt and not args.gt:
        raise UsageError(f"metric(s) {needs_gt} need --gt")
    if args.scope == "missing" and not args.mask:
        raise UsageError("--scope missing needs --mask")
    skel = _skeleton(args.skel)
    gts = _paired(args.pred, args.gt, "--gt")
    masks = _paired(args.pred, args.mask, "--mask")
    rows, inputs = [], []
    for p, g, mk in zip(args.pred, gts, masks):
        pred = read_markers(p)
        gt = read_markers(g) if g else None
        scope = read_mask(mk) if (mk and args.scope == "missing") else None
        inputs += [x for x in (p, g, mk) if x]
        vals = compute_metrics(metrics, pred, gt, skel, args.norm, scope)
        sid = Path(p).stem
        for m in metrics:
            rows.append(MetricRow(sid, m, vals[m], args.norm))
    write_metrics(MetricReport(tuple(rows)), args.out)
    _write_manifest(_manifest_for(args.out), "eval", inputs, _params_dict(args), [args.out])


def _join(report: MetricReport, ratings):
    rated = set(ratings.stimuli())
    measured = {r.stimulus_id for r in report.rows}
    unknown = sorted(measured ^ rated)
    if unknown:
        raise DataError(f"stimulus ids not present in both metrics and ratings: {unknown}")
    return aggregate(ratings)


def cmd_correlate(args):
    report = read_metrics(args.metrics)
    ratings = read_ratings(args.ratings)
    scores = _join(report, ratings)
    stimuli = sorted(scores)
    lines = ["metric,tau,p_value,ci_lo,ci_hi,n_stimuli"]
    for m in report.metrics():
        vals = report.values(m)
        have = [s for s in stimuli if s in vals]
        if len(have) < len(stimuli):
            log.warning("metric %s missing for %d stimuli; row omitted", m,
                        len(stimuli) - len(have))
            continue
        x = [vals[s] for s in have]
        y = [scores[s].mean for s in have]
        tau, p = kendall_tau(x, y)
        ci = tau_bootstrap_ci(x, y, args.resamples, args.seed)
        lines.append(f"{m},{tau:.6f},{p:.6g},{ci.lo:.6f},{ci.hi:.6f},{len(have)}")
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    _write_manifest(_manifest_for(args.out), "correlate", [args.metrics, args.ratings],
                    _params_dict(args), [args.out], [args.seed])


def cmd_report(args):
    report = read_metrics(args.metrics)
    ratings = read_ratings(args.ratings) if args.ratings else None
    inputs = [args.metrics] + ([args.ratings] if args.ratings else [])
    alpha = None
    if ratings is not None:
        _join(report, ratings)
        try:
            alpha = (krippendorff_alpha(ratings),
                     alpha_bootstrap_ci(ratings, args.resamples, args.seed))
        except GapEvalError as e:
            log.warning("Krippendorff alpha unavailable: %s", e)
    out = Path(args.out_dir)
    files = render(report, ratings, alpha)
    written = []
    for name, text in sorted(files.items()):
        atomic_write_text(out / name, text)
        written.append(out / name)
    _write_manifest(out / "manifest.json", "report", inputs, _params_dict(args), written,
                    [args.seed])


# ---------------------------------------------------------------- parser


def build_parser():
    ap = argparse.ArgumentParser(prog="mocap-gapeval", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a clean synthetic marker sequence")
    p.add_argument("--skel", help="skeleton JSON (default: bundled two-actor config)")
    p.add_argument("--actors", type=int, default=2)
    p.add_argument("--seconds", type=float, default=20.0)
    p.add_argument("--fps", type=float, default=120.0)
    p.add_argument("--amplitude", type=float, default=SynthSpec.amplitude)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("corrupt", help="hide markers and optionally add noise")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--skel")
    p.add_argument("--mode", choices=("iid", "window", "bodypart"), required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=float, help="gap duration in frames")
    p.add_argument("--part", choices=BODY_PARTS)
    p.add_argument("--epoch", type=int)
    p.add_argument("--curve", help="n_start,n_rate,d_start,d_rate")
    p.add_argument("--noise-c", dest="noise_c", type=float,
                   help="masked noise cap; output is then interpolated plus noise on gaps")
    p.add_argument("--global-sigma", dest="global_sigma", type=float, default=0.0,
                   help="iid Gaussian noise (cm) added to every coordinate before masking")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", dest="mask_out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("train", help="train a windowed ridge denoiser")
    p.add_argument("--clean", required=True, help="directory of clean marker CSVs")
    p.add_argument("--skel")
    p.add_argument("--epochs", type=int, required=True)
    p.add_argument("--window", type=int, default=2)
    p.add_argument("--reg", type=float, default=1.0)
    p.add_argument("--curve", default="3,0.5,10,4")
    p.add_argument("--noise-c", dest="noise_c", type=float, default=2.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--part", choices=BODY_PARTS, help="train only this body part's markers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("fill", help="reconstruct gaps")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--skel")
    p.add_argument("--method", choices=("interp", "ridge", "hips-outwards"), default="interp")
    p.add_argument("--model")
    for part in BODY_PARTS:
        p.add_argument(f"--model-{part}", dest=f"model_{part}")
    p.add_argument("--smooth-window", dest="smooth_window", type=int)
    p.add_argument("--smooth-order", dest="smooth_order", type=int, default=3)
    p.add_argument("--smooth-scope", dest="smooth_scope", choices=("all", "gaps"), default="all")
    p.add_argument("--raw", help="original data whose observed values are restored")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fill)

    p = sub.add_parser("eval", help="compute metrics per stimulus")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--gt", nargs="+")
    p.add_argument("--mask", nargs="+")
    p.add_argument("--skel")
    p.add_argument("--metrics", default=",".join(METRIC_NAMES))
    p.add_argument("--norm", choices=NORM_MODES, default="per_coordinate")
    p.add_argument("--scope", choices=("all", "missing"), default="all")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("correlate", help="Kendall tau of metrics against ratings")
    p.add_argument("--metrics", required=True)
    p.add_argument("--ratings", required=True)
    p.add_argument("--resamples", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("report", help="markdown + SVG summary")
    p.add_argument("--metrics", required=True)
    p.add_argument("--ratings")
    p.add_argument("--resamples", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except UsageError as e:
        ap.print_usage(sys.stderr)
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (NumericError, ReconstructionError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 4
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
