"""Compare the ridge denoiser with plain interpolation on held-out synthetic takes.

Trains on single-actor synthetic sequences with the curriculum, then hides
1 s windows on a quarter of the markers of each test take and reports the
RMSE over the hidden entries for both methods.

    python scripts/run_ridge_vs_interp.py --train 4 --test 4 --epochs 12
"""
import argparse
import time

from mocap_gapeval.core import CurriculumParams
from mocap_gapeval.corrupt import GapSpec, apply_mask, sample_mask
from mocap_gapeval.metrics import rmse
from mocap_gapeval.reconstruct import fill_interpolation, fill_ridge, train_ridge
from mocap_gapeval.synth import SynthSpec, generate, template_skeleton


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--train", type=int, default=4, help="number of training takes")
    ap.add_argument("--test", type=int, default=4, help="number of held-out takes")
    ap.add_argument("--seconds", type=float, default=20.0)
    ap.add_argument("--epochs", type=int, default=12)
    ap.add_argument("--window", type=int, default=1)
    ap.add_argument("--fraction", type=float, default=0.25, help="share of markers with a gap")
    ap.add_argument("--gap-seconds", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    return ap.parse_args()


def main():
    args = parse_args()
    t0 = time.perf_counter()
    skel = template_skeleton(("A1",))
    M = len(skel.marker_ids)
    n = round(args.fraction * M)
    train = [generate(SynthSpec(actors=1, seconds=args.seconds, seed=args.seed + s), skel)
             for s in range(args.train)]
    params = CurriculumParams(n_start=n / 2, n_rate=1.0, d_start=60, d_rate=6, c=2.0)
    model = train_ridge(train, skel, params, args.epochs, args.window, args.seed)
    print(f"trained on {args.train} x {args.seconds:g} s in {time.perf_counter() - t0:.1f} s")
    print(f"{'take':>6s} {'ridge':>8s} {'interp':>8s}")
    for k in range(args.test):
        seed = args.seed + 100 + k
        test = generate(SynthSpec(actors=1, seconds=args.seconds, seed=seed), skel)
        d = round(args.gap_seconds * test.fps)
        mask = sample_mask(test.n_frames, M, GapSpec("window", n=n, d=d, seed=seed), skel)
        holed = apply_mask(test, mask)
        r = rmse(fill_ridge(model, holed, mask, skel), test, scope=mask)
        i = rmse(fill_interpolation(holed, mask), test, scope=mask)
        print(f"{seed:6d} {r:8.3f} {i:8.3f}")


if __name__ == "__main__":
    main()
