"""Robust scaling core: quantiles, stats, scaling, windowing, degeneracy.

The independent oracle for quantiles and robust statistics is numpy's
`quantile`/`median` (linear interpolation); the library never calls them.
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eegnorm.data import Recording, SubjectMeta
from eegnorm.normalize import (
    ALL_PLANS,
    DegeneracyPolicy,
    DegenerateScaleError,
    NormalizationPlan,
    Scheme,
    WindowTensor,
    apply_plan,
    apply_scale,
    degeneracy_probe,
    normalize,
    quantile,
    robust_stats,
    segment_windows,
)

META = SubjectMeta(subject_id="s0", age=10.0, gender=0, group="g1")


def oracle_quantile(xs, q):
    return float(np.quantile(np.asarray(xs, dtype=np.float64), q))


def oracle_stats(data, scope):
    data = np.asarray(data, dtype=np.float64)
    if scope == "pooled":
        flat = data.ravel()
        return (
            np.quantile(flat, 0.5),
            np.quantile(flat, 0.75) - np.quantile(flat, 0.25),
        )
    med = np.quantile(data, 0.5, axis=1)
    iqr = np.quantile(data, 0.75, axis=1) - np.quantile(data, 0.25, axis=1)
    return med, iqr


def make_rec(data, fs=250.0, rec_id="r0"):
    data = np.asarray(data, dtype=np.float64)
    channels = tuple(f"c{i}" for i in range(data.shape[0]))
    return Recording(id=rec_id, channels=channels, fs=fs, data=data, meta=META)


# --- quantile ---


def test_quantile_fixed_examples():
    assert quantile([1, 2, 3, 4, 5], 0.25) == 2.0
    assert quantile([1, 2, 3, 4, 5], 0.75) == 4.0
    assert quantile([7], 0.0) == 7.0
    assert quantile([7], 0.37) == 7.0
    assert quantile([7], 1.0) == 7.0
    assert quantile([1, 3], 0.5) == 2.0


def test_quantile_errors():
    with pytest.raises(ValueError, match="empty"):
        quantile([], 0.5)
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        quantile([1.0], 1.5)


@given(
    xs=st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=200),
    q=st.floats(0.0, 1.0),
)
def test_quantile_matches_oracle(xs, q):
    assert abs(quantile(xs, q) - oracle_quantile(xs, q)) <= 1e-12


def test_even_length_median_is_central_mean(rng):
    xs = rng.normal(size=100)
    top = np.sort(xs)
    assert quantile(xs, 0.5) == pytest.approx((top[49] + top[50]) / 2, abs=1e-15)


# --- robust_stats ---


def test_robust_stats_per_channel_example():
    data = np.array([[1, 2, 3, 4, 5], [11, 12, 13, 14, 15]], dtype=float)
    stats = robust_stats(data, "per_channel")
    assert stats.median.tolist() == [3.0, 13.0]
    assert stats.iqr.tolist() == [2.0, 2.0]


def test_robust_stats_pooled_example():
    data = np.array([[1, 2, 3, 4, 5], [11, 12, 13, 14, 15]], dtype=float)
    stats = robust_stats(data, "pooled")
    assert stats.median == 8.0
    assert stats.iqr == pytest.approx(12.75 - 3.25, abs=1e-15)


def test_robust_stats_constant_row():
    data = np.vstack([np.full(9, 4.2), np.arange(9.0)])
    stats = robust_stats(data, "per_channel")
    assert stats.iqr[0] == 0.0
    assert stats.median[0] == 4.2


@given(
    n_channels=st.integers(1, 5),
    n_samples=st.integers(1, 50),
    seed=st.integers(0, 2**31),
    scale=st.sampled_from([1e-2, 1.0, 1e3]),
)
def test_robust_stats_matches_oracle(n_channels, n_samples, seed, scale):
    data = np.random.default_rng(seed).normal(size=(n_channels, n_samples)) * scale
    stats = robust_stats(data, "per_channel")
    med, iqr = oracle_stats(data, "per_channel")
    assert np.allclose(stats.median, med, atol=1e-12, rtol=0)
    assert np.allclose(stats.iqr, iqr, atol=1e-12, rtol=0)
    pooled = robust_stats(data, "pooled")
    pmed, piqr = oracle_stats(data, "pooled")
    assert abs(pooled.median - pmed) <= 1e-12
    assert abs(pooled.iqr - piqr) <= 1e-12


# --- apply_scale / normalize ---


def test_apply_scale_row_example():
    data = np.array([[1.0, 2.0, 3.0, 4.0, 5.0]])
    out, flags = apply_scale(data, robust_stats(data, "per_channel"))
    assert out.tolist() == [[-1.0, -0.5, 0.0, 0.5, 1.0]]
    assert flags == frozenset()


def test_flag_identity_keeps_zero_row():
    data = np.vstack([np.arange(5.0), np.zeros(5)])
    out, flags = normalize(data, Scheme.CHANNEL, DegeneracyPolicy.FLAG_IDENTITY)
    assert np.array_equal(out[1], np.zeros(5))  # (0 - 0) / 1
    assert flags == frozenset({1})
    assert np.isfinite(out).all()


def test_propagate_yields_nan_row():
    data = np.vstack([np.arange(5.0), np.zeros(5)])
    out, flags = normalize(data, Scheme.CHANNEL, DegeneracyPolicy.PROPAGATE)
    assert np.isnan(out[1]).all()
    assert np.isfinite(out[0]).all()
    assert flags == frozenset({1})


def test_error_policy_raises():
    data = np.vstack([np.arange(5.0), np.zeros(5)])
    with pytest.raises(DegenerateScaleError):
        normalize(data, Scheme.CHANNEL, DegeneracyPolicy.ERROR)


def test_scheme_none_is_identity(rng):
    data = rng.normal(size=(3, 20))
    out, flags = normalize(data, Scheme.NONE)
    assert np.array_equal(out, data)
    assert flags == frozenset()


def test_channel_scheme_postcondition(rng):
    data = rng.normal(size=(4, 101)) * 40 + 3
    out, _ = normalize(data, Scheme.CHANNEL)
    stats = robust_stats(out, "per_channel")
    assert np.allclose(stats.median, 0.0, atol=1e-9)
    assert np.allclose(stats.iqr, 1.0, atol=1e-9)


def test_all_scheme_postcondition(rng):
    data = rng.normal(size=(4, 101)) * 40 + 3
    data[2] *= 10  # distinct per-channel scale
    out, _ = normalize(data, Scheme.ALL)
    stats = robust_stats(out, "pooled")
    assert abs(stats.median) <= 1e-9
    assert abs(stats.iqr - 1.0) <= 1e-9
    per_row = robust_stats(out, "per_channel")
    assert np.abs(per_row.median).max() > 1e-6  # rows not individually centered


@given(
    seed=st.integers(0, 2**31),
    a=st.floats(0.01, 100.0),
    b=st.floats(-50.0, 50.0),
    scheme=st.sampled_from([Scheme.ALL, Scheme.CHANNEL]),
)
def test_affine_invariance(seed, a, b, scheme):
    data = np.random.default_rng(seed).normal(size=(3, 41))
    base, _ = normalize(data, scheme)
    shifted, _ = normalize(a * data + b, scheme)
    assert np.allclose(shifted, base, atol=1e-9)
    flipped, _ = normalize(-a * data + b, scheme)
    assert np.allclose(flipped, -base, atol=1e-9)


@given(seed=st.integers(0, 2**31), scheme=st.sampled_from([Scheme.ALL, Scheme.CHANNEL]))
def test_idempotence(seed, scheme):
    data = np.random.default_rng(seed).normal(size=(3, 41)) * 7 + 2
    once, _ = normalize(data, scheme)
    twice, _ = normalize(once, scheme)
    assert np.allclose(twice, once, atol=1e-9)


def test_all_scheme_preserves_channel_ratios(rng):
    data = rng.normal(size=(3, 41)) * 12 + 4
    out, _ = normalize(data, Scheme.ALL)
    med = np.quantile(data, 0.5)
    centered = data - med
    # (x_i - m)/(x_j - m) is unchanged by the common pooled scale factor
    mask = (np.abs(centered[1]) > 1e-3) & (np.abs(out[1]) > 1e-6)
    ratio_in = centered[0, mask] / centered[1, mask]
    ratio_out = out[0, mask] / out[1, mask]
    assert np.allclose(ratio_in, ratio_out, rtol=1e-12)


def test_nonfinite_input_rejected_outside_propagate():
    data = np.zeros((2, 5))
    data[0, 0] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        normalize(data, Scheme.ALL, DegeneracyPolicy.FLAG_IDENTITY)
    out, _ = normalize(data, Scheme.ALL, DegeneracyPolicy.PROPAGATE)
    assert np.isnan(out).all()


# --- segment_windows ---


def test_segment_window_counts(rng):
    rec = make_rec(rng.normal(size=(4, 15000)), fs=250.0)
    windows = segment_windows(rec, 2.0)
    assert len(windows) == 30
    assert all(w.data.shape == (4, 500) for w in windows)
    assert [w.offset_samples for w in windows[:3]] == [0, 500, 1000]


def test_segment_window_dense_cap_shape(rng):
    rec = make_rec(rng.normal(size=(128, 1000)), fs=250.0)
    windows = segment_windows(rec, 2.0)
    assert windows[0].data.shape == (128, 500)


def test_segment_too_short_gives_empty():
    rec = make_rec(np.zeros((2, 499)), fs=250.0)
    assert segment_windows(rec, 2.0) == []


def test_segment_non_integer_length_rejected():
    rec = make_rec(np.zeros((2, 500)), fs=250.0)
    with pytest.raises(ValueError, match="integer"):
        segment_windows(rec, 0.0101)


def test_segment_partition_reconstructs_prefix(rng):
    rec = make_rec(rng.normal(size=(3, 1003)), fs=250.0)
    windows = segment_windows(rec, 1.0)
    rebuilt = np.concatenate([w.data for w in windows], axis=1)
    assert np.array_equal(rebuilt, rec.data[:, : rebuilt.shape[1]])


# --- apply_plan ---


def test_plan_none_none_equals_raw_segmentation(rng):
    rec = make_rec(rng.normal(size=(3, 1500)), fs=250.0)
    plan = NormalizationPlan(Scheme.NONE, Scheme.NONE)
    raw = segment_windows(rec, 2.0)
    planned = apply_plan(rec, plan, 2.0)
    assert len(raw) == len(planned)
    for a, b in zip(raw, planned):
        assert np.array_equal(a.data, b.data)


@pytest.mark.parametrize("rec_scheme", [Scheme.NONE, Scheme.ALL, Scheme.CHANNEL])
def test_plan_window_channel_postcondition(rng, rec_scheme):
    rec = make_rec(rng.normal(size=(3, 1500)) * 25 + 1, fs=250.0)
    windows = apply_plan(rec, NormalizationPlan(rec_scheme, Scheme.CHANNEL), 2.0)
    for w in windows:
        stats = robust_stats(w.data, "per_channel")
        assert np.allclose(stats.median, 0.0, atol=1e-9)
        assert np.allclose(stats.iqr, 1.0, atol=1e-9)


def test_plan_9_variants_exist():
    assert len(ALL_PLANS) == 9
    assert len(set(ALL_PLANS)) == 9


def test_plan_flags_accumulate(rng):
    data = np.vstack([rng.normal(size=(2, 1000)), np.zeros((1, 1000))])
    rec = make_rec(data, fs=250.0)
    windows = apply_plan(rec, NormalizationPlan(Scheme.CHANNEL, Scheme.CHANNEL), 2.0)
    assert all(w.flags == frozenset({2}) for w in windows)


def test_plan_parse_round_trip():
    plan = NormalizationPlan.parse("none,channel")
    assert plan == NormalizationPlan(Scheme.NONE, Scheme.CHANNEL)
    assert str(plan) == "none,channel"
    with pytest.raises(ValueError, match="none|all|channel"):
        NormalizationPlan.parse("bogus,channel")


# --- degeneracy_probe ---


def test_probe_counts_planted_zero_iqr(rng):
    data = np.vstack([rng.normal(size=(2, 1000)), np.zeros((1, 1000))])
    rec = make_rec(data, fs=250.0)
    windows = apply_plan(
        rec, NormalizationPlan(Scheme.NONE, Scheme.CHANNEL), 2.0,
        DegeneracyPolicy.FLAG_IDENTITY,
    )
    report = degeneracy_probe(windows)
    assert report.n_nonfinite_windows == 0
    assert report.n_degenerate_hits == len(windows)  # one flat channel per window
    assert all(ch == 2 for _, _, ch in report.degenerate)
    assert report.affected_fraction == 1.0


def test_probe_reports_nan_coordinates():
    win = WindowTensor(
        data=np.full((2, 10), np.nan), recording_id="rX", offset_samples=20
    )
    report = degeneracy_probe([win])
    assert report.nonfinite == [("rX", 20, 20)]


def test_probe_clean_windows(rng):
    rec = make_rec(rng.normal(size=(3, 1000)), fs=250.0)
    report = degeneracy_probe(segment_windows(rec, 2.0))
    assert report.empty
    assert report.affected_fraction == 0.0
