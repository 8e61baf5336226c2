import math

import numpy as np
import pytest

from afftalk.hmm import (
    GestureBank,
    HmmError,
    HmmModel,
    Trajectory,
    action_posterior,
    forward_loglik,
    prefix_curve,
    preprocess,
    train_hmm,
)

from conftest import brute_force_loglik, random_left_right_model


def traj(points) -> Trajectory:
    return Trajectory(frames=np.asarray(points, dtype=float))


# ---------------------------------------------------------------------------
# preprocessing


def test_preprocess_degenerate_constant_sequence_is_all_zero():
    raw = traj([[1.0, 2.0, 3.0]] * 5)
    out = preprocess(raw, raw.frames.copy())
    assert np.allclose(out.frames, 0.0)


def test_preprocess_scale_and_translation_invariance():
    rng = np.random.default_rng(0)
    frames = rng.normal(0, 1, (12, 3))
    torso = rng.normal(0, 0.1, (12, 3))
    base = preprocess(traj(frames), torso)
    scaled = preprocess(traj(torso + 3.7 * (frames - torso)), torso)
    assert np.allclose(base.frames, scaled.frames)
    shift = np.array([0.4, -1.0, 2.0])
    moved = preprocess(traj(frames + shift), torso + shift)
    assert np.allclose(base.frames, moved.frames, atol=1e-12)
    assert np.sqrt((base.frames**2).sum(axis=1)).max() == pytest.approx(1.0)


def test_preprocess_is_idempotent():
    rng = np.random.default_rng(1)
    frames = rng.normal(0, 1, (8, 3))
    once = preprocess(traj(frames), np.zeros((8, 3)))
    twice = preprocess(once, np.zeros((8, 3)))
    assert np.abs(once.frames - twice.frames).max() <= 1e-12


def test_preprocess_errors():
    with pytest.raises(HmmError, match="match"):
        preprocess(traj([[0, 0, 0]]), np.zeros((2, 3)))
    with pytest.raises(HmmError):
        Trajectory(frames=np.zeros((0, 3)))
    with pytest.raises(HmmError, match="finite"):
        Trajectory(frames=np.array([[np.nan, 0, 0]]))


# ---------------------------------------------------------------------------
# model validation


def test_model_rejects_broken_left_to_right_mask():
    good = random_left_right_model(np.random.default_rng(0), 3, 2, 3)
    bad_trans = np.exp(good.log_trans)
    bad_trans[0, 2] = 0.1
    bad_trans[0] /= bad_trans[0].sum()
    with np.errstate(divide="ignore"):
        log_bad = np.log(bad_trans)
    with pytest.raises(HmmError, match="self/next"):
        HmmModel("x", log_bad, good.weights, good.means, good.variances)


def test_model_rejects_variances_below_floor():
    good = random_left_right_model(np.random.default_rng(0), 2, 1, 3)
    with pytest.raises(HmmError, match="floor"):
        HmmModel(
            "x",
            good.log_trans,
            good.weights,
            good.means,
            np.full_like(good.variances, 1e-9),
        )


def test_bank_requires_unique_labels():
    m = random_left_right_model(np.random.default_rng(0), 2, 1, 3, label="tap")
    with pytest.raises(HmmError, match="duplicate"):
        GestureBank(models=(m, m))


# ---------------------------------------------------------------------------
# training


def _noisy_sequences(rng, n, length, dim=3):
    center = rng.normal(0, 1, dim)
    drift = rng.normal(0, 1, dim)
    out = []
    for _ in range(n):
        t = np.linspace(0, 1, length)[:, None]
        out.append(
            traj(center + t * drift + rng.normal(0, 0.1, (length, dim)))
        )
    return out


def test_em_loglik_is_monotone():
    rng = np.random.default_rng(3)
    model = train_hmm(_noisy_sequences(rng, 8, 30), 4, 2, seed=0, action_label="x")
    assert len(model.history) >= 2
    diffs = np.diff(np.asarray(model.history))
    assert (diffs >= -1e-9).all()


def test_training_is_seed_deterministic():
    rng = np.random.default_rng(4)
    seqs = _noisy_sequences(rng, 5, 25)
    a = train_hmm(seqs, 3, 2, seed=9)
    b = train_hmm(seqs, 3, 2, seed=9)
    assert np.array_equal(a.means, b.means)
    assert np.array_equal(np.exp(a.log_trans), np.exp(b.log_trans))


def test_single_point_sequences_converge_to_that_point():
    point = np.array([0.3, -0.2, 0.9])
    seqs = [traj(np.tile(point, (10, 1))) for _ in range(3)]
    model = train_hmm(seqs, 1, 1, seed=0)
    assert np.abs(model.means[0, 0] - point).max() <= 1e-6


def test_left_to_right_zeros_survive_training():
    rng = np.random.default_rng(5)
    model = train_hmm(_noisy_sequences(rng, 6, 20), 4, 2, seed=1)
    trans = np.exp(model.log_trans)
    q = model.n_states
    mask = np.eye(q, dtype=bool) | np.eye(q, k=1, dtype=bool)
    assert (trans[~mask] == 0.0).all()
    assert np.allclose(trans.sum(axis=1), 1.0, atol=1e-12)


def test_training_input_validation():
    with pytest.raises(HmmError, match="empty"):
        train_hmm([], 2, 1, seed=0)
    short = [traj(np.zeros((2, 3)))]
    with pytest.raises(HmmError, match="shorter"):
        train_hmm(short, 4, 1, seed=0)


# ---------------------------------------------------------------------------
# scoring


def test_forward_single_state_single_frame_is_gaussian_logpdf():
    model = HmmModel(
        action_label="x",
        log_trans=np.zeros((1, 1)),
        weights=np.ones((1, 1)),
        means=np.zeros((1, 1, 2)),
        variances=np.full((1, 1, 2), 2.0),
    )
    x = np.array([[0.5, -1.0]])
    expected = -0.5 * (
        2 * math.log(2 * math.pi * 2.0) + (0.25 + 1.0) / 2.0
    )
    assert forward_loglik(model, traj(x)) == pytest.approx(expected, rel=1e-12)


def test_forward_matches_path_enumeration():
    rng = np.random.default_rng(6)
    for _ in range(20):
        q = int(rng.integers(1, 4))
        m = int(rng.integers(1, 3))
        d = int(rng.integers(1, 4))
        t = int(rng.integers(1, 7))
        model = random_left_right_model(rng, q, m, d)
        frames = rng.normal(0, 1, (t, d))
        got = forward_loglik(model, traj(frames))
        want = brute_force_loglik(model, frames)
        assert abs(got - want) <= 1e-9 * abs(want)


def test_short_sequences_still_score():
    model = random_left_right_model(np.random.default_rng(7), 3, 2, 3)
    value = forward_loglik(model, traj(np.zeros((1, 3))))
    assert math.isfinite(value)


def test_action_posterior_examples():
    rng = np.random.default_rng(8)

    def fixed_loglik_model(label):
        return random_left_right_model(rng, 2, 1, 3, label=label)

    bank = GestureBank(
        models=(
            fixed_loglik_model("grasp"),
            fixed_loglik_model("tap"),
            fixed_loglik_model("touch"),
        )
    )
    t = traj(rng.normal(0, 1, (10, 3)))
    post = action_posterior(bank, t)
    assert post.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert (post.weights >= 0).all()
    # the softmax of (-10, -12, -14), quoted to five decimals
    lls = np.array([-10.0, -12.0, -14.0])
    w = np.exp(lls - lls.max())
    assert np.allclose(w / w.sum(), [0.86681, 0.11731, 0.01587], atol=1e-5)


def test_posterior_invariant_to_constant_loglik_shift():
    lls = np.array([-3.0, -5.0, -1.0])
    for shift in (0.0, 100.0, -250.0):
        w = np.exp((lls + shift) - (lls + shift).max())
        base = np.exp(lls - lls.max())
        assert np.allclose(w / w.sum(), base / base.sum(), atol=1e-12)


def test_prefix_argmax_on_tap_trajectories(world_config, trained_bank):
    import math

    from afftalk.world import sample_trajectory

    hits = 0
    for seed in range(200):
        t = sample_trajectory("tap", world_config, seed=500_000 + seed)
        curve = prefix_curve(trained_bank, t)
        _, posterior = curve.at(math.ceil(0.6 * len(t)))
        hits += curve.actions[int(np.argmax(posterior))] == "tap"
    assert hits >= 0.9 * 200


def test_prefix_curve_matches_full_forward_and_validates_t():
    rng = np.random.default_rng(9)
    models = tuple(
        random_left_right_model(rng, 3, 2, 3, label=lab)
        for lab in ("grasp", "tap", "touch")
    )
    bank = GestureBank(models=models)
    t = traj(rng.normal(0, 1, (14, 3)))
    curve = prefix_curve(bank, t)
    assert len(curve) == 14
    for k, model in enumerate(bank.models):
        assert curve.scores[-1, k] == pytest.approx(
            forward_loglik(model, t) / 14, rel=1e-12
        )
    scores, posterior = curve.at(14)
    assert posterior.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(HmmError):
        curve.at(0)
    with pytest.raises(HmmError):
        curve.at(15)
