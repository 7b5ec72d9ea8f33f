"""Regenerate the golden pipeline fixtures under tests/fixtures/golden.

Writes the small skeleton and the synthetic ratings (inputs), runs the CLI
pipeline, and stores the outputs that the golden test compares byte for byte.
Only rerun after an intentional output change, then audit the diff.
"""
import json
import sys
import tempfile
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from golden_pipeline import GOLDEN, RATINGS, SKELETON, run_pipeline, stimulus_ids  # noqa: E402
from mocap_gapeval.io import read_metrics, skeleton_to_dict  # noqa: E402
from mocap_gapeval.synth import template_skeleton  # noqa: E402

MARKERS = ["LASI", "RASI", "LPSI", "RPSI", "C7", "CLAV", "STRN", "T10",
           "LFHD", "RFHD", "LBHD", "RBHD", "LELB", "LMEL", "LWRA", "LWRB",
           "LKNE", "LKNM", "LANK", "LMED"]
RATERS = 6


def write_inputs(work):
    GOLDEN.mkdir(parents=True, exist_ok=True)
    skel = template_skeleton(("A1",), names=MARKERS)
    SKELETON.write_text(json.dumps(skeleton_to_dict(skel), indent=1) + "\n")
    # ratings: a first pass without ratings is not possible (correlate needs
    # them), so derive them from interpolation RMSE of a dry run
    placeholder = work / "placeholder.csv"
    ids = stimulus_ids()
    placeholder.write_text("stimulus_id,rater_id,rating\n"
                           + "".join(f"{s},r1,{1 + k % 5}\n" for k, s in enumerate(ids)))
    run_pipeline(work / "dry", placeholder)
    rmse = read_metrics(work / "dry" / "metrics.csv").values("rmse")
    order = sorted(ids, key=lambda s: rmse[s])
    rng = np.random.default_rng(2024)
    lines = ["stimulus_id,rater_id,rating"]
    for rank, sid in enumerate(order):
        base = 5 - 4 * rank / (len(order) - 1)
        for r in range(RATERS):
            v = int(np.clip(round(base + rng.normal(0, 0.8)), 1, 5))
            lines.append(f"{sid},r{r + 1},{v}")
    RATINGS.write_text("\n".join(lines) + "\n")


def main():
    with tempfile.TemporaryDirectory() as tmp:
        work = Path(tmp)
        write_inputs(work)
        outputs = run_pipeline(work / "run")
    for name, data in outputs.items():
        dest = GOLDEN / "expected" / name
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(data)
        print(f"wrote {dest.relative_to(ROOT)} ({len(data)} bytes)")


if __name__ == "__main__":
    main()
