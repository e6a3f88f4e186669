"""Featurization, class balancing, and the supervised training loop."""

import numpy as np
import pytest

from eegnorm.learn import grad_check
from eegnorm.normalize import NormalizationPlan, Scheme, WindowTensor
from eegnorm.supervised import (
    SupervisedConfig,
    balance_classes,
    featurize,
    train_supervised,
    _loss_and_grads,
)


def make_window(data, rec_id="r0"):
    return WindowTensor(data=np.asarray(data, float), recording_id=rec_id, offset_samples=0)


# --- featurize ---


def test_featurize_stride_8_on_16x500():
    win = make_window(np.random.default_rng(0).normal(size=(16, 500)))
    assert featurize(win, 8).shape == (1008,)


def test_featurize_stride_1_is_flatten(rng):
    data = rng.normal(size=(3, 20))
    assert np.array_equal(featurize(make_window(data), 1), data.reshape(-1))


def test_featurize_ignores_unsampled_timepoints(rng):
    data = rng.normal(size=(2, 16))
    other = data.copy()
    other[:, 3] += 100.0  # index 3 is skipped at stride 4
    assert np.array_equal(featurize(make_window(data), 4), featurize(make_window(other), 4))


# --- balance_classes ---


def label_counts(pairs):
    counts = {0: 0, 1: 0}
    for _, label in pairs:
        counts[label] += 1
    return counts


def make_pairs(n0, n1, rng):
    pairs = [(make_window(rng.normal(size=(2, 8))), 0) for _ in range(n0)]
    pairs += [(make_window(rng.normal(size=(2, 8))), 1) for _ in range(n1)]
    return pairs


def test_balance_300_200(rng):
    out = balance_classes(make_pairs(300, 200, rng), np.random.default_rng(0))
    assert label_counts(out) == {0: 200, 1: 200}


def test_balance_already_balanced(rng):
    pairs = make_pairs(50, 50, rng)
    out = balance_classes(pairs, np.random.default_rng(0))
    assert out == pairs


def test_balance_deterministic(rng):
    pairs = make_pairs(40, 25, rng)
    a = balance_classes(pairs, np.random.default_rng(3))
    b = balance_classes(pairs, np.random.default_rng(3))
    assert [id(w) for w, _ in a] == [id(w) for w, _ in b]


def test_balance_single_class_rejected(rng):
    with pytest.raises(ValueError, match="both classes"):
        balance_classes([(make_window(np.zeros((1, 4))), 1)], np.random.default_rng(0))


def test_config_validation():
    with pytest.raises(ValueError, match="age|gender"):
        SupervisedConfig(task="speed")
    with pytest.raises(ValueError, match="epochs"):
        SupervisedConfig(epochs=0)
    with pytest.raises(ValueError, match="stride"):
        SupervisedConfig(downsample_stride=0)


# --- training loop ---


def planted_pairs(rng, n_windows, separation=3.0, n_channels=4, n_samples=64):
    """Trivially separable toy data: class shifts the mean of channel 0."""
    pairs = []
    for i in range(n_windows):
        label = i % 2
        data = rng.normal(size=(n_channels, n_samples))
        data[0] += separation * (1 if label else -1)
        pairs.append((make_window(data, rec_id=f"r{i}"), label))
    return pairs


def test_mlp_gradients_match_finite_differences(rng):
    x = rng.normal(size=(5, 12))
    y = np.array([0, 1, 1, 0, 1], dtype=float)
    params = {
        "w1": rng.normal(size=(6, 12)) / 4,
        "b1": np.zeros(6),
        "w2": rng.normal(size=(2, 6)) / 4,
        "b2": np.zeros(2),
    }

    def f(p):
        return _loss_and_grads(x, y, p, "gender")

    assert grad_check(f, params, h=1e-6) < 1e-6

    params_age = {**params, "w2": params["w2"][:1], "b2": params["b2"][:1]}

    def f_age(p):
        return _loss_and_grads(x, y, p, "age")

    assert grad_check(f_age, params_age, h=1e-6) < 1e-6


def test_training_learns_separable_data(rng):
    train = planted_pairs(rng, 120)
    test = planted_pairs(rng, 40)
    cfg = SupervisedConfig(task="gender", epochs=5, batch_size=16, hidden_dim=8, seed=1)
    result = train_supervised(train, test, cfg, NormalizationPlan(Scheme.NONE, Scheme.NONE))
    assert not result.collapsed
    assert result.metric > 0.9


def test_training_deterministic_per_seed(rng):
    train = planted_pairs(rng, 60)
    test = planted_pairs(rng, 20)
    cfg = SupervisedConfig(task="gender", epochs=3, batch_size=16, hidden_dim=8, seed=7)
    a = train_supervised(train, test, cfg)
    b = train_supervised(train, test, cfg)
    assert a.metric == b.metric
    assert a.history == b.history


def test_training_differs_across_seeds(rng):
    train = planted_pairs(rng, 60, separation=0.3)
    test = planted_pairs(rng, 20, separation=0.3)
    a = train_supervised(train, test, SupervisedConfig(task="gender", epochs=2, seed=1))
    b = train_supervised(train, test, SupervisedConfig(task="gender", epochs=2, seed=2))
    assert a.history != b.history


def test_collapse_reported_not_raised(rng):
    train = planted_pairs(rng, 40)
    bad = train[0][0].data.copy()
    bad[0, 0] = np.nan
    train[0] = (make_window(bad), train[0][1])
    test = planted_pairs(rng, 10)
    cfg = SupervisedConfig(task="gender", epochs=2, batch_size=64, seed=0)
    result = train_supervised(train, test, cfg)
    assert result.collapsed
    assert np.isnan(result.metric)


def test_age_beats_constant_baseline_under_channel_channel():
    from eegnorm.data import split_by_group
    from eegnorm.harness import GridConfig, prepare_recordings, labeled_windows
    from eegnorm.normalize import DegeneracyPolicy
    from eegnorm.synth import PlantedRule, SynthSpec

    cfg = GridConfig(
        task="age",
        seeds=(0,),
        plans=(NormalizationPlan(Scheme.CHANNEL, Scheme.CHANNEL),),
        synth=SynthSpec(
            n_channels=8, duration_s=60.0, gain_spread=0.5, master_seed=31,
            osc_amp=14.0, pink_amp=2.5,
        ),
        rule=PlantedRule(base_freq=6.0, age_slope=0.4, gender_delta=0.0),
        sup=SupervisedConfig(task="age", epochs=10, hidden_dim=64, seed=0),
        n_subjects=40,
        n_groups=5,
        test_group="g3",
    )
    prepared = prepare_recordings(cfg)
    train_ds, test_ds = split_by_group(prepared, "g3")
    plan = cfg.plans[0]
    tp = labeled_windows(train_ds, plan, 2.0, DegeneracyPolicy.FLAG_IDENTITY, "age")
    vp = labeled_windows(test_ds, plan, 2.0, DegeneracyPolicy.FLAG_IDENTITY, "age")

    train_ages = np.array([label for _, label in tp])
    test_ages = np.array([label for _, label in vp])
    # the constant predictor's MAE is the mean absolute deviation of test ages
    baseline = float(np.mean(np.abs(test_ages - train_ages.mean())))
    constant_preds = np.full(len(test_ages), train_ages.mean())
    from eegnorm.learn import mae

    assert mae(constant_preds, test_ages) == pytest.approx(baseline, abs=1e-12)

    result = train_supervised(tp, vp, cfg.sup, plan)
    assert not result.collapsed
    assert result.metric < baseline


def test_age_task_reports_mae(rng):
    train = [(make_window(rng.normal(size=(2, 32))), float(10 + i % 5)) for i in range(50)]
    test = [(make_window(rng.normal(size=(2, 32))), float(10 + i % 5)) for i in range(20)]
    cfg = SupervisedConfig(task="age", epochs=2, batch_size=16, hidden_dim=4, seed=0)
    result = train_supervised(train, test, cfg)
    assert not result.higher_is_better
    assert np.isfinite(result.metric)
    # pure-noise inputs with mean-initialized bias: close to the constant baseline
    ages = np.array([y for _, y in test])
    baseline = np.mean(np.abs(ages - np.mean([y for _, y in train])))
    assert result.metric < baseline * 1.5
