"""Additive-noise anchor: metrics of a clean synthetic take plus iid Gaussian noise.

Runs the CLI chain synth -> corrupt (no gaps, global noise) -> eval and prints
the metric table next to the values expected for sigma = 2 cm.

    python scripts/run_additive_noise.py --seconds 100 --sigma 2
"""
import argparse
import math
import tempfile
import time
from pathlib import Path

from mocap_gapeval.cli import main as cli
from mocap_gapeval.io import read_metrics


def run(*argv):
    code = cli([str(a) for a in argv])
    if code:
        raise SystemExit(code)


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seconds", type=float, default=100.0)
    ap.add_argument("--sigma", type=float, default=2.0, help="noise std in cm")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--work", type=Path, help="keep intermediate files here")
    return ap.parse_args()


def main():
    args = parse_args()
    with tempfile.TemporaryDirectory() as tmp:
        work = args.work or Path(tmp)
        work.mkdir(parents=True, exist_ok=True)
        clean, noisy = work / "clean.csv", work / "noisy.csv"
        run("synth", "--actors", 2, "--seconds", args.seconds, "--seed", args.seed, "--out", clean)
        run("corrupt", "--in", clean, "--mode", "iid", "--p", 0, "--global-sigma", args.sigma,
            "--seed", args.seed + 1, "--out", noisy, "--mask-out", work / "mask.csv")
        t0 = time.perf_counter()
        run("eval", "--pred", noisy, "--gt", clean, "--out", work / "noisy_metrics.csv")
        secs = time.perf_counter() - t0
        run("eval", "--pred", clean, "--metrics", "vd", "--out", work / "clean_metrics.csv")
        report = read_metrics(work / "noisy_metrics.csv")
        got = {m: report.values(m)["noisy"] for m in report.metrics()}
        vd_clean = read_metrics(work / "clean_metrics.csv").values("vd")["clean"]
    s = args.sigma
    # iid noise: first differences carry variance 2 s^2, second differences 6 s^2
    expected = {"rmse": s, "vd_gt": s * math.sqrt(2), "vd": math.sqrt(6 * s * s + vd_clean**2)}
    print(f"{'metric':8s} {'value':>10s} {'expected':>10s}")
    for m, v in got.items():
        want = f"{expected[m]:10.4f}" if m in expected else f"{'-':>10s}"
        print(f"{m:8s} {v:10.4f} {want}")
    print(f"clean vd {vd_clean:.4f} cm; eval took {secs:.2f} s")


if __name__ == "__main__":
    main()
