import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.signal import savgol_coeffs

from mocap_gapeval.core import (BODY_PARTS, CurriculumParams, DataError, MarkerSequence,
                                ObservationMask)
from mocap_gapeval.corrupt import GapSpec, apply_mask, interpolate_gaps, sample_mask
from mocap_gapeval.metrics import rmse, training_loss
from mocap_gapeval.reconstruct import (MODEL_HEADER, InterpolationReconstructor,
                                       NormalEquations, ReconstructionError, RidgeDenoiser,
                                       corrupt_for_training, fill_hips_outwards,
                                       fill_interpolation, fill_ridge, postprocess, train_ridge,
                                       window_features)
from mocap_gapeval.synth import SynthSpec, generate

from conftest import random_sequence, tiny_skeleton


def _linear(rng, T, ids):
    t = np.arange(T, dtype=float)[:, None, None]
    return MarkerSequence(rng.normal(0, 10, (1, len(ids), 3)) + t * rng.normal(0, 1, (1, len(ids), 3)),
                          120.0, ids)


def _holed(rng, seq, p=0.4, seed=0):
    mask = sample_mask(seq.n_frames, seq.n_markers, GapSpec("iid", p=p, seed=seed))
    return apply_mask(seq, mask), mask


# ---------------------------------------------------------------- interpolation baseline


def test_fill_interpolation(rng):
    seq = random_sequence(rng, 12, 3)
    full = ObservationMask.full(12, 3)
    assert fill_interpolation(seq, full).equals(seq)
    line = _linear(rng, 12, ["a", "b"])
    present = np.ones((12, 2), dtype=bool)
    present[3:6, 0] = present[4:10, 1] = False
    mask = ObservationMask(present)
    holed = apply_mask(line, mask)
    assert np.abs(fill_interpolation(holed, mask).frames - line.frames).max() < 1e-9
    assert fill_interpolation(holed, mask).equals(interpolate_gaps(holed))
    assert InterpolationReconstructor().fill(holed, mask).equals(interpolate_gaps(holed))


# ---------------------------------------------------------------- ridge


def test_normal_equations_recover_linear_map(rng):
    X = np.concatenate([rng.normal(size=(500, 7)), np.ones((500, 1))], axis=1)
    W = rng.normal(size=(2, 8, 3))
    eqs = NormalEquations(2, 8, 3)
    for g in range(2):
        eqs.add(g, X[:250], X[:250] @ W[g])
        eqs.add(g, X[250:], X[250:] @ W[g])
    assert np.abs(eqs.solve(1e-10) - W).max() < 1e-6


def test_normal_equations_errors():
    with pytest.raises(DataError, match="no training samples"):
        NormalEquations(1, 3, 3).solve(1.0)
    eqs = NormalEquations(1, 3, 3)
    eqs.add(0, np.ones((4, 3)), np.ones((4, 3)))
    with pytest.raises(ArithmeticError, match="singular"):
        eqs.solve(0.0)


def test_window_features_clamp():
    z = np.arange(10, dtype=float).reshape(5, 2)
    X = window_features(z, np.array([0, 4]), 1)
    assert X[0].tolist() == [0, 1, 0, 1, 2, 3, 1]
    assert X[1].tolist() == [6, 7, 8, 9, 8, 9, 1]


def test_zero_epochs(skel1):
    seq = generate(SynthSpec(actors=1, seconds=0.5), skel1)
    with pytest.raises(DataError, match="no training samples"):
        train_ridge([seq], skel1, CurriculumParams(), 0, 1, 0)


def test_short_sequence(skel1):
    seq = generate(SynthSpec(actors=1, seconds=3 / 120), skel1)
    with pytest.raises(DataError, match="shorter than the window"):
        train_ridge([seq], skel1, CurriculumParams(), 1, 1, 0)


def test_untrained_model(rng):
    model = RidgeDenoiser(1, 1.0, ["a"], ["a"])
    seq = random_sequence(rng, 5, 1, ids=["a"])
    with pytest.raises(DataError, match="not trained"):
        fill_ridge(model, seq, ObservationMask.full(5, 1), None)
    with pytest.raises(DataError, match="window"):
        RidgeDenoiser(0, 1.0, ["a"], ["a"])


@pytest.fixture(scope="module")
def small_model():
    skel = tiny_skeleton(4)
    rng = np.random.default_rng(3)
    seqs = [MarkerSequence(np.cumsum(rng.normal(0, 1, (80, 4, 3)), axis=0), 120.0,
                           skel.marker_ids) for _ in range(2)]
    params = CurriculumParams(n_start=1, n_rate=0.5, d_start=4, d_rate=2, c=1.0)
    return skel, seqs, params, train_ridge(seqs, skel, params, 5, 1, 11)


def test_ridge_fill_contract(small_model, rng):
    skel, seqs, _, model = small_model
    seq = seqs[0]
    assert fill_ridge(model, seq, ObservationMask.full(80, 4), skel).equals(seq)
    holed, mask = _holed(rng, seq, p=0.3, seed=5)
    out = fill_ridge(model, holed, mask, skel)
    assert out.fully_present
    assert np.array_equal(out.frames[mask.mask], seq.frames[mask.mask])
    # already-interpolated input gives the same result
    again = fill_ridge(model, interpolate_gaps(holed), mask, skel)
    assert np.array_equal(again.frames, out.frames)


def test_ridge_determinism_and_roundtrip(small_model, tmp_path):
    skel, seqs, params, model = small_model
    twin = train_ridge(seqs, skel, params, 5, 1, 11)
    assert twin.to_bytes() == model.to_bytes()
    other = train_ridge(seqs, skel, params, 5, 1, 12)
    assert not np.array_equal(other.weights, model.weights)
    model.save(tmp_path / "m.bin")
    raw = (tmp_path / "m.bin").read_bytes()
    assert raw.startswith(MODEL_HEADER)
    back = RidgeDenoiser.load(tmp_path / "m.bin")
    assert np.array_equal(back.weights, model.weights)
    assert back.marker_ids == model.marker_ids and back.window == model.window
    assert back.to_bytes() == raw
    assert model.weights.shape == (4, 3 * (3 * 4 + 3) + 1, 3)
    (tmp_path / "bad.bin").write_bytes(b"nope")
    with pytest.raises(DataError, match="model file"):
        RidgeDenoiser.load(tmp_path / "bad.bin")


def test_ridge_on_linear_data():
    skel = tiny_skeleton(4)
    rng = np.random.default_rng(0)
    train = [_linear(rng, 200, skel.marker_ids) for _ in range(3)]
    params = CurriculumParams(n_start=1, n_rate=0.3, d_start=5, d_rate=1, c=1e-9)
    seed, epochs = 1, 6
    # Hermite fill is exact on lines only when each gap has an observed frame on
    # both sides of its anchors; check the replay keeps clear of the edges
    for ep in range(epochs):
        for k, clean in enumerate(train):
            _, mask = corrupt_for_training(clean, skel, params, ep, seed, k)
            assert mask.mask[1].all() and mask.mask[-2].all()
    model = train_ridge(train, skel, params, epochs, 1, seed, reg=1.0)
    test = _linear(rng, 200, skel.marker_ids)
    mask = sample_mask(200, 4, GapSpec("window", n=3, d=30, seed=3))
    holed = apply_mask(test, mask)
    err_ridge = np.abs(fill_ridge(model, holed, mask, skel).frames - test.frames).max()
    err_interp = np.abs(fill_interpolation(holed, mask).frames - test.frames).max()
    assert err_ridge <= err_interp + 1e-6


def test_ridge_loss_nonincreasing_on_replay(skel1):
    seqs = [generate(SynthSpec(actors=1, seconds=4, seed=s), skel1) for s in range(2)]
    params = CurriculumParams(n_start=4, n_rate=1.5, d_start=30, d_rate=10, c=2.0)
    E, seed = 5, 7
    replay = [(corrupt_for_training(c, skel1, params, ep, seed, k), c)
              for ep in range(E) for k, c in enumerate(seqs)]
    losses = []
    for epochs in range(1, E + 1):
        model = train_ridge(seqs, skel1, params, epochs, 1, seed)
        losses.append(np.mean([training_loss(fill_ridge(model, x, m, skel1), c, m,
                                             params.lam).total for (x, m), c in replay]))
    assert all(b <= a * (1 + 1e-9) for a, b in zip(losses, losses[1:])), losses


def test_ridge_beats_interpolation_small(skel1):
    params = CurriculumParams(n_start=4, n_rate=1.5, d_start=30, d_rate=10, c=2.0)
    train = [generate(SynthSpec(actors=1, seconds=10, seed=s), skel1) for s in range(3)]
    model = train_ridge(train, skel1, params, 8, 1, 0)
    test = generate(SynthSpec(actors=1, seconds=10, seed=100), skel1)
    mask = sample_mask(test.n_frames, test.n_markers, GapSpec("window", n=15, d=60, seed=1))
    holed = apply_mask(test, mask)
    assert (rmse(fill_ridge(model, holed, mask, skel1), test, scope=mask)
            < rmse(fill_interpolation(holed, mask), test, scope=mask))


# ---------------------------------------------------------------- hips outwards


class Oracle:
    def __init__(self, gt):
        self.gt = gt

    def fill(self, corrupted, mask, skel):
        return self.gt


class Recorder:
    """Returns a fixed per-part value and logs every input it sees."""

    def __init__(self, name, log, value):
        self.name, self.log, self.value = name, log, value

    def fill(self, corrupted, mask, skel):
        self.log.append((self.name, corrupted.frames.copy()))
        return corrupted.with_frames(np.full(corrupted.frames.shape, self.value))


class MixModel:
    """Deterministic input-dependent model: each marker becomes the frame mean plus its index."""

    def fill(self, corrupted, mask, skel):
        f = corrupted.frames
        return corrupted.with_frames(f.mean(axis=1, keepdims=True)
                                     + np.arange(f.shape[1])[None, :, None] + 0.5 * f)


def test_hips_outwards_oracle(rng):
    skel = tiny_skeleton(6)
    gt = random_sequence(rng, 15, 6)
    holed, mask = _holed(rng, gt, p=0.5, seed=2)
    out = fill_hips_outwards({p: Oracle(gt) for p in BODY_PARTS}, holed, mask, skel)
    assert np.array_equal(out.frames, gt.frames)


def test_hips_outwards_no_missing(rng):
    skel = tiny_skeleton(4)
    seq = random_sequence(rng, 8, 4)
    log = []
    models = {p: Recorder(p, log, 99.0) for p in BODY_PARTS}
    assert fill_hips_outwards(models, seq, ObservationMask.full(8, 4), skel).equals(seq)


def test_hips_outwards_order_and_visibility(rng):
    skel = tiny_skeleton(4)
    seq = random_sequence(rng, 10, 4)
    present = np.ones((10, 4), dtype=bool)
    present[3:6] = False
    mask = ObservationMask(present)
    log = []
    values = {"hips": 1.0, "torso": 2.0, "head": 3.0, "limbs": 4.0}
    models = {p: Recorder(p, log, v) for p, v in values.items()}
    out = fill_hips_outwards(models, apply_mask(seq, mask), mask, skel)
    assert [name for name, _ in log] == ["hips", "torso", "head", "limbs"]
    hips_col = 0
    torso_input = log[1][1]
    assert np.all(torso_input[3:6, hips_col] == 1.0)
    # the hips call saw none of the later predictions
    assert not np.any(log[0][1][3:6, 1:] == 2.0)
    for k, part in enumerate(BODY_PARTS):
        assert np.all(out.frames[3:6, k] == values[part])
    assert np.array_equal(out.frames[mask.mask], seq.frames[mask.mask])


def _brute_hips_outwards(model, working, mask, skel):
    frames = working.frames.copy()
    for part in BODY_PARTS:
        pred = model.fill(working.with_frames(frames), mask, skel).frames
        for t in range(frames.shape[0]):
            for m, mid in enumerate(working.marker_ids):
                if mid in skel.body_parts[part] and not mask.mask[t, m]:
                    frames[t, m] = pred[t, m]
    return frames


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_hips_outwards_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    M = int(rng.integers(4, 7))
    skel = tiny_skeleton(M)
    gt = random_sequence(rng, int(rng.integers(3, 9)), M)
    present = rng.random(gt.present.shape) > 0.5
    present[0] = present[-1] = True
    mask = ObservationMask(present)
    working = interpolate_gaps(apply_mask(gt, mask))
    model = MixModel()
    out = fill_hips_outwards({p: model for p in BODY_PARTS}, working, mask, skel)
    assert np.allclose(out.frames, _brute_hips_outwards(model, working, mask, skel),
                       rtol=0, atol=1e-12)


def test_hips_outwards_errors(rng):
    skel = tiny_skeleton(4)
    seq = random_sequence(rng, 6, 4)
    mask = ObservationMask.full(6, 4)

    class Broken:
        def fill(self, corrupted, mask, skel):
            raise ValueError("boom")

    models = {p: Oracle(seq) for p in BODY_PARTS}
    models["head"] = Broken()
    with pytest.raises(ReconstructionError, match="head model failed: boom"):
        fill_hips_outwards(models, seq, mask, skel)
    with pytest.raises(DataError, match="limbs"):
        fill_hips_outwards({p: Oracle(seq) for p in BODY_PARTS[:3]}, seq, mask, skel)


# ---------------------------------------------------------------- post-processing


def test_savgol_central_weight():
    assert savgol_coeffs(9, 3)[4] == pytest.approx(59 / 231, abs=1e-15)
    # least-squares cubic through a 9-point impulse, evaluated at the centre
    x = np.arange(-4, 5, dtype=float)
    V = np.vander(x, 4, increasing=True)
    e = np.zeros(9)
    e[4] = 1.0
    assert np.linalg.lstsq(V, e, rcond=None)[0][0] == pytest.approx(59 / 231, abs=1e-12)


def test_postprocess_impulse():
    frames = np.zeros((30, 1, 3))
    frames[15, 0, 1] = 3.0
    seq = MarkerSequence(frames, 120.0, ["a"])
    out = postprocess(seq, seq, ObservationMask.full(30, 1))
    assert out.frames[15, 0, 1] == pytest.approx(3 * 59 / 231, abs=1e-12)
    assert out.frames[15, 0, 1] == pytest.approx(0.7662337662337663, abs=1e-12)


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_postprocess_polynomial(degree, rng):
    t = np.linspace(-1, 1, 40)
    coeffs = rng.normal(size=(degree + 1, 2, 3))
    frames = sum(c * t[:, None, None] ** k for k, c in enumerate(coeffs))
    seq = MarkerSequence(frames, 120.0, ["a", "b"])
    out = postprocess(seq, seq, ObservationMask.full(40, 2))
    # the mirror padding is exact only for even functions about the ends, so check the interior
    assert np.abs(out.frames[4:-4] - frames[4:-4]).max() < 1e-9


def test_postprocess_restores_observed(rng):
    orig = random_sequence(rng, 20, 2)
    mask = sample_mask(20, 2, GapSpec("iid", p=0.4, seed=1))
    pred = orig.with_frames(orig.frames + 5.0)
    out = postprocess(pred, apply_mask(orig, mask), mask, scope="gaps")
    assert np.array_equal(out.frames[mask.mask], orig.frames[mask.mask])
    assert out.fully_present


def test_postprocess_smooth_identity():
    t = np.arange(240) / 120.0
    frames = 10.0 * np.sin(2 * np.pi * t)[:, None, None] * np.ones((1, 3, 3))
    seq = MarkerSequence(frames, 120.0, ["a", "b", "c"])
    out = postprocess(seq, seq, ObservationMask.full(240, 3))
    assert np.abs(out.frames[4:-4] - seq.frames[4:-4]).max() < 1e-4


@pytest.mark.parametrize("w,o", [(8, 3), (9, 9), (-1, 0)])
def test_postprocess_bad_params(rng, w, o):
    seq = random_sequence(rng, 20, 1)
    with pytest.raises(DataError):
        postprocess(seq, seq, ObservationMask.full(20, 1), w, o)
