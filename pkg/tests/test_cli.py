import json
import re
import subprocess
import sys

import pytest

from mocap_gapeval.cli import main
from mocap_gapeval.io import read_markers, read_mask, read_metrics

from golden_pipeline import GOLDEN, GOLDEN_FILES, SKELETON, run_pipeline, stimulus_ids


def _cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def clean(tmp_path):
    out = tmp_path / "clean.csv"
    assert _cli("synth", "--skel", SKELETON, "--actors", 1, "--seconds", 1, "--seed", 3,
                "--out", out) == 0
    return out


def test_synth_writes_manifest(clean):
    manifest = json.loads(clean.with_name("clean.csv.manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seeds"] == [3]
    assert set(manifest["outputs"]) == {str(clean)}
    assert read_markers(clean).n_frames == 120


def test_eval_pred_equals_gt(clean, tmp_path):
    out = tmp_path / "m.csv"
    assert _cli("eval", "--pred", clean, "--gt", clean, "--skel", SKELETON, "--out", out) == 0
    report = read_metrics(out)
    for metric in ("rmse", "vd_gt", "bdp_gt"):
        assert report.values(metric) == {"clean": 0.0}
    assert report.values("vd")["clean"] > 0


def test_corrupt_modes(clean, tmp_path):
    out, mask = tmp_path / "c.csv", tmp_path / "mask.csv"
    assert _cli("corrupt", "--in", clean, "--mode", "window", "--n", 3, "--d", 20,
                "--seed", 1, "--out", out, "--mask-out", mask) == 0
    m = read_mask(mask)
    assert int((~m.mask).sum()) == 60
    assert not read_markers(out).fully_present
    # curriculum-driven sizes and a denoising-style output
    assert _cli("corrupt", "--in", clean, "--mode", "window", "--epoch", 0,
                "--curve", "2,0,10,0", "--noise-c", 2, "--seed", 1, "--out", out,
                "--mask-out", mask) == 0
    assert int((~read_mask(mask).mask).sum()) == 20
    assert read_markers(out).fully_present
    assert _cli("corrupt", "--in", clean, "--skel", SKELETON, "--mode", "bodypart",
                "--part", "head", "--d", 15, "--out", out, "--mask-out", mask) == 0
    assert int((~read_mask(mask).mask).sum()) == 4 * 15


def test_idempotent_and_inputs_untouched(clean, tmp_path):
    before = clean.read_bytes()
    outs = []
    for k in range(2):
        out, mask = tmp_path / f"c{k}.csv", tmp_path / f"m{k}.csv"
        _cli("corrupt", "--in", clean, "--mode", "iid", "--p", 0.2, "--seed", 9,
             "--global-sigma", 0.5, "--out", out, "--mask-out", mask)
        filled = tmp_path / f"f{k}.csv"
        _cli("fill", "--in", out, "--mask", mask, "--skel", SKELETON, "--smooth-window", 9,
             "--out", filled)
        outs.append((out.read_bytes(), mask.read_bytes(), filled.read_bytes()))
    assert outs[0] == outs[1]
    assert clean.read_bytes() == before


def test_train_and_fill_ridge(clean, tmp_path):
    train_dir = tmp_path / "train"
    train_dir.mkdir()
    for s in range(2):
        _cli("synth", "--skel", SKELETON, "--actors", 1, "--seconds", 2, "--seed", s,
             "--out", train_dir / f"t{s}.csv")
    model = tmp_path / "model.bin"
    assert _cli("train", "--clean", train_dir, "--skel", SKELETON, "--epochs", 3,
                "--window", 1, "--curve", "2,1,20,5", "--out", model) == 0
    part_model = tmp_path / "hips.bin"
    assert _cli("train", "--clean", train_dir, "--skel", SKELETON, "--epochs", 3,
                "--window", 1, "--curve", "2,1,20,5", "--part", "hips",
                "--out", part_model) == 0
    cor, mask = tmp_path / "c.csv", tmp_path / "m.csv"
    _cli("corrupt", "--in", clean, "--mode", "window", "--n", 4, "--d", 30, "--seed", 2,
         "--out", cor, "--mask-out", mask)
    for extra in (["--method", "ridge", "--model", model],
                  ["--method", "hips-outwards", "--model", model, "--model-hips", part_model]):
        out = tmp_path / "f.csv"
        assert _cli("fill", "--in", cor, "--mask", mask, "--skel", SKELETON, *extra,
                    "--out", out) == 0
        assert read_markers(out).fully_present


def test_exit_codes(clean, tmp_path, capsys):
    out = tmp_path / "x.csv"
    assert _cli("eval", "--pred", clean, "--metrics", "rmse", "--out", out) == 2
    assert "need --gt" in capsys.readouterr().err
    assert _cli("eval", "--pred", clean, "--metrics", "nope", "--out", out) == 2
    assert _cli("corrupt", "--in", clean, "--mode", "window", "--out", out,
                "--mask-out", tmp_path / "m.csv") == 2
    assert _cli("fill", "--in", clean, "--mask", tmp_path / "missing.csv", "--out", out) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("frame,time,a:x,a:y\n")
    assert _cli("eval", "--pred", bad, "--metrics", "vd", "--out", out) == 3
    with pytest.raises(SystemExit) as err:
        _cli("frobnicate")
    assert err.value.code == 2
    two = tmp_path / "two.csv"
    _cli("synth", "--skel", SKELETON, "--actors", 1, "--seconds", 2 / 120, "--out", two)
    # too few frames for vd is a data error
    assert _cli("eval", "--pred", two, "--metrics", "vd", "--out", out) == 3
    flat = tmp_path / "flat.csv"
    _cli("eval", "--pred", clean, "--gt", clean, "--metrics", "rmse", "--out", flat)
    ratings = tmp_path / "r.csv"
    ratings.write_text("stimulus_id,rater_id,rating\nclean,r1,3\nclean,r2,4\n")
    # a single stimulus leaves tau undefined
    assert _cli("correlate", "--metrics", flat, "--ratings", ratings, "--resamples", 10,
                "--out", tmp_path / "c.csv") in (3, 4)


def test_correlate_join_errors(tmp_path, caplog):
    metrics = tmp_path / "m.csv"
    metrics.write_text("stimulus_id,metric,value,norm_mode\n"
                       "a,rmse,1,per_coordinate\nb,rmse,2,per_coordinate\n"
                       "c,rmse,3,per_coordinate\na,vd,1,per_coordinate\n")
    ratings = tmp_path / "r.csv"
    ratings.write_text("stimulus_id,rater_id,rating\na,r1,5\nb,r1,3\nc,r1,1\nd,r1,2\n")
    out = tmp_path / "c.csv"
    assert _cli("correlate", "--metrics", metrics, "--ratings", ratings, "--out", out) == 3
    ratings.write_text("stimulus_id,rater_id,rating\na,r1,5\nb,r1,3\nc,r1,1\n")
    assert _cli("correlate", "--metrics", metrics, "--ratings", ratings, "--resamples", 100,
                "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "metric,tau,p_value,ci_lo,ci_hi,n_stimuli"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["rmse"]
    assert lines[1].startswith("rmse,1.000000,")
    assert "vd missing for 2 stimuli" in caplog.text


def test_report_point_count(tmp_path):
    expected = GOLDEN / "expected"
    out = tmp_path / "rep"
    assert _cli("report", "--metrics", expected / "metrics.csv", "--out-dir", out) == 0
    n = len(stimulus_ids())
    for metric in ("rmse", "vd_gt", "vd", "bdp_gt", "bdp"):
        svg = (out / f"scatter_{metric}.svg").read_text()
        assert len(re.findall(r'class="point"', svg)) == n
    assert (out / "manifest.json").exists()


def test_golden_pipeline(tmp_path):
    outputs = run_pipeline(tmp_path)
    for name in GOLDEN_FILES:
        assert outputs[name] == (GOLDEN / "expected" / name).read_bytes(), name


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "mocap_gapeval.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.strip()
