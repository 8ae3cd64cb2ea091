import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gestauth.features import (
    N_FEATURES, STAT_NAMES, channels_extended, extract_features, extract_features_batch,
    features_vjp, peak_count, write_feature_csv,
)


def _naive_stats(v):
    """Direct-formula oracle, written independently of the vectorised path."""
    n = len(v)
    mean = sum(v) / n
    var = sum((a - mean) ** 2 for a in v) / n
    std = var**0.5
    m3 = sum((a - mean) ** 3 for a in v) / n
    m4 = sum((a - mean) ** 4 for a in v) / n
    skew = m3 / var**1.5 if var > 0 else 0.0
    kurt = m4 / var**2 - 3 if var > 0 else 0.0
    s = sorted(v)

    def q(p):
        h = (n - 1) * p
        lo = int(h)
        hi = min(lo + 1, n - 1)
        return s[lo] + (h - lo) * (s[hi] - s[lo])

    return [max(v), min(v), mean, std, var, skew, kurt, q(0.5), q(0.75) - q(0.25)]


def test_layout_size():
    assert N_FEATURES == 72
    assert extract_features(np.zeros((200, 6))).shape == (72,)


def test_acc_norm_345():
    x = np.zeros((200, 6))
    x[:, 0], x[:, 1] = 3.0, 4.0
    np.testing.assert_allclose(channels_extended(x)[:, 6], 5.0)


def test_zero_gesture_norms_zero():
    ext = channels_extended(np.zeros((200, 6)))
    assert np.all(ext[:, 6:] == 0)


def test_norm_channels_loop_oracle():
    x = np.random.default_rng(0).standard_normal((200, 6))
    ext = channels_extended(x)
    for t in range(200):
        assert ext[t, 6] == pytest.approx((x[t, 0] ** 2 + x[t, 1] ** 2 + x[t, 2] ** 2) ** 0.5, abs=1e-12)
        assert ext[t, 7] == pytest.approx((x[t, 3] ** 2 + x[t, 4] ** 2 + x[t, 5] ** 2) ** 0.5, abs=1e-12)


def test_constant_channel_degenerate_convention():
    x = np.random.default_rng(0).standard_normal((200, 6))
    x[:, 1] = 2.0
    f = extract_features(x).reshape(8, 9)
    np.testing.assert_array_equal(f[1], [2, 2, 2, 0, 0, 0, 0, 2, 0])


def test_ramp_channel():
    x = np.zeros((200, 6))
    x[:, 3] = np.arange(200.0)
    f = dict(zip(STAT_NAMES, extract_features(x).reshape(8, 9)[3]))
    assert f["mean"] == pytest.approx(99.5)
    assert f["median"] == pytest.approx(99.5)
    assert abs(f["skew"]) < 1e-9


def test_random_channel_matches_naive_oracle():
    x = np.random.default_rng(7).standard_normal((200, 6)) * 3 + 1
    f = extract_features(x).reshape(8, 9)
    ext = channels_extended(x)
    for c in range(8):
        np.testing.assert_allclose(f[c], _naive_stats(list(ext[:, c])), atol=1e-9, rtol=1e-9)


def test_feature_invariants():
    x = np.random.default_rng(3).standard_normal((200, 6))
    f = extract_features(x).reshape(8, 9)
    np.testing.assert_allclose(f[:, 4], f[:, 3] ** 2, atol=1e-9)
    assert np.all(f[:, 0] >= f[:, 7]) and np.all(f[:, 7] >= f[:, 1])


@settings(max_examples=30, deadline=None)
@given(k=st.floats(-50, 50), seed=st.integers(0, 1000), ch=st.integers(0, 5))
def test_shift_equivariance(k, seed, ch):
    x = np.random.default_rng(seed).standard_normal((200, 6))
    y = x.copy()
    y[:, ch] += k
    fx, fy = extract_features(x).reshape(8, 9)[ch], extract_features(y).reshape(8, 9)[ch]
    np.testing.assert_allclose(fy[[0, 1, 2, 7]], fx[[0, 1, 2, 7]] + k, atol=1e-9)
    np.testing.assert_allclose(fy[[3, 4, 5, 6, 8]], fx[[3, 4, 5, 6, 8]], atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(0.1, 20), seed=st.integers(0, 1000))
def test_scale_behaviour(s, seed):
    x = np.random.default_rng(seed).standard_normal((200, 6))
    fx, fy = extract_features(x).reshape(8, 9)[0], extract_features(x * s).reshape(8, 9)[0]
    assert fy[3] == pytest.approx(s * fx[3], rel=1e-9)
    assert fy[4] == pytest.approx(s * s * fx[4], rel=1e-9)
    assert fy[5] == pytest.approx(fx[5], abs=1e-8)
    assert fy[6] == pytest.approx(fx[6], abs=1e-8)


def test_batch_matches_single_and_is_order_independent():
    X = np.random.default_rng(1).standard_normal((5, 200, 6))
    fb = extract_features_batch(X)
    for i in range(5):
        np.testing.assert_array_equal(fb[i], extract_features(X[i]))
    np.testing.assert_array_equal(extract_features_batch(X[::-1]), fb[::-1])


def test_vjp_matches_finite_differences():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((2, 200, 6))
    up = rng.standard_normal((2, 72))
    _, g = features_vjp(x, up)
    h = 1e-6
    probes = [(b, t, c) for b in range(2) for t in rng.choice(200, 12, replace=False) for c in range(6)]
    for b, t, c in probes:
        e = np.zeros_like(x)
        e[b, t, c] = h
        fd = ((extract_features_batch(x + e) - extract_features_batch(x - e)) * up).sum() / (2 * h)
        assert fd == pytest.approx(g[b, t, c], rel=1e-4, abs=1e-6)


def test_peak_count_monotone_and_constant():
    assert peak_count(np.arange(200.0)) == 0
    assert peak_count(np.full(200, 3.0)) == 0


def test_peak_count_two_bumps():
    t = np.arange(200.0)
    s = np.exp(-0.5 * ((t - 70) / 3) ** 2) + np.exp(-0.5 * ((t - 120) / 3) ** 2)
    assert peak_count(s) == 2


@settings(max_examples=20, deadline=None)
@given(arrays(np.float64, (200, 6), elements=st.floats(-1e3, 1e3)))
def test_features_finite(x):
    assert np.all(np.isfinite(extract_features(x)))


def test_feature_csv(tmp_path):
    from gestauth.dataset import random_profiles, simulate_corpus

    corpus = simulate_corpus(random_profiles(1), 2, seed=0)
    write_feature_csv(tmp_path / "f.csv", corpus)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["user_id", "gesture_id", "f0"]
    assert lines[0].split(",")[-1] == "f71"
    assert len(lines) == 3
