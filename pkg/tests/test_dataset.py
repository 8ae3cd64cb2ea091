import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gestauth import dataset as ds
from gestauth.dataset import (
    CoverageError, DatasetError, Gesture, align_and_window, apply_norm, fit_norm_stats,
    invert_norm, lowpass, lowpass_filter, parse_user_file, random_profiles, simulate_corpus,
    temporal_split,
)


def _write_csv(path, rows):
    lines = ["gesture_id,sensor,t_ms,x,y,z"] + [",".join(map(str, r)) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def _records(fn_acc, fn_gyr, times_acc, times_gyr, gid="g1"):
    recs = [ds.RawRecord("u", gid, "accelerometer", int(t), *fn_acc(t)) for t in times_acc]
    recs += [ds.RawRecord("u", gid, "gyroscope", int(t), *fn_gyr(t)) for t in times_gyr]
    return recs


def test_parse_minimal_file(tmp_path):
    p = _write_csv(tmp_path / "u1.csv", [("g1", "acc", 0, 0.1, 0.2, 9.8)])
    recs = parse_user_file(p)
    assert len(recs) == 1
    assert recs[0].sensor == "accelerometer" and recs[0].user_id == "u1"


def test_parse_missing_column_reports_line(tmp_path):
    p = _write_csv(tmp_path / "u1.csv", [("g1", "acc", 0, 1, 2, 3), ("g1", "gyr", 20, 1, 2)])
    with pytest.raises(DatasetError, match=":3:"):
        parse_user_file(p)


def test_parse_unknown_sensor_rejected(tmp_path):
    p = _write_csv(tmp_path / "u1.csv", [("g1", "mag", 0, 1, 2, 3)])
    with pytest.raises(DatasetError, match="unknown sensor"):
        parse_user_file(p)


def test_parse_400_rows_two_gestures(tmp_path):
    rows = [(f"g{i // 200}", "acc" if i % 2 else "gyr", 20 * i, i, -i, 0.5) for i in range(400)]
    recs = parse_user_file(_write_csv(tmp_path / "u.csv", rows))
    assert len(recs) == 400
    assert len({r.gesture_id for r in recs}) == 2
    assert [r.t_ms for r in recs] == [20 * i for i in range(400)]


def test_align_constant_records():
    times = np.arange(0, 5001, 13)
    recs = _records(lambda t: (1.0, 2.0, 3.0), lambda t: (-1.0, 0.0, 4.0), times, times + 5)
    g = align_and_window(recs, 4800)
    np.testing.assert_allclose(g.series, np.tile([1, 2, 3, -1, 0, 4], (200, 1)), atol=1e-12)


def test_align_exact_grid_is_identity():
    nfc = 10_000
    grid = ds.grid_times(nfc)
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((len(grid), 6))
    recs = [ds.RawRecord("u", "g", "accelerometer", int(t), *vals[i, :3]) for i, t in enumerate(grid)]
    recs += [ds.RawRecord("u", "g", "gyroscope", int(t), *vals[i, 3:]) for i, t in enumerate(grid)]
    g = align_and_window(recs, nfc)
    np.testing.assert_array_equal(g.series, vals)


def test_align_ramp_at_47hz_matches_line():
    nfc = 20_000
    times = np.round(np.arange(15_000, 20_500, 1000 / 47)).astype(int)
    line = lambda t: (0.001 * t, -0.002 * t + 3, 0.5)
    recs = _records(line, line, times, times)
    g = align_and_window(recs, nfc)
    grid = ds.grid_times(nfc)
    np.testing.assert_allclose(g.series[:, 0], 0.001 * grid, atol=1e-9)
    np.testing.assert_allclose(g.series[:, 4], -0.002 * grid + 3, atol=1e-9)
    assert g.series.shape == (200, 6)


def test_align_last_step_is_nfc_time():
    assert ds.grid_times(12_345)[-1] == 12_345
    assert np.allclose(np.diff(ds.grid_times(0)), 20)


def test_align_coverage_gap_raises():
    times = np.concatenate([np.arange(0, 2000, 20), np.arange(2400, 5000, 20)])
    recs = _records(lambda t: (0, 0, 0), lambda t: (0, 0, 0), times, np.arange(0, 5000, 20))
    with pytest.raises(CoverageError):
        align_and_window(recs, 4800)


def test_align_missing_prefix_raises():
    times = np.arange(3000, 5000, 20)
    recs = _records(lambda t: (0, 0, 0), lambda t: (0, 0, 0), times, times)
    with pytest.raises(CoverageError):
        align_and_window(recs, 4800)


def _butter_sq_mag(f, fc, order):
    return 1.0 / (1.0 + (f / fc) ** (2 * order))


def _tone(freq):
    t = np.arange(200) / 50.0
    return np.sin(2 * np.pi * freq * t)


def test_lowpass_constant_unchanged():
    x = np.full((200, 6), 3.25)
    np.testing.assert_allclose(lowpass(x), x, atol=1e-9)


def test_lowpass_attenuates_20hz():
    oracle = _butter_sq_mag(20.0, 10.0, 2)  # forward-backward squares |H|
    assert oracle < 0.3
    y = lowpass(_tone(20.0)[:, None], 10.0, 2)
    assert np.abs(y[20:-20]).max() < 0.3


def test_lowpass_passes_1hz():
    assert _butter_sq_mag(1.0, 10.0, 2) > 0.95
    y = lowpass(_tone(1.0)[:, None], 10.0, 2)
    ratio = np.abs(y[25:-25]).max() / np.abs(_tone(1.0)[25:-25]).max()
    assert abs(ratio - 1.0) < 0.05


def test_lowpass_rejects_cutoff_above_nyquist():
    with pytest.raises(DatasetError):
        lowpass(np.zeros((200, 1)), 25.0)


def test_lowpass_is_linear():
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, 200, 6))
    a, b = 1.7, -0.4
    np.testing.assert_allclose(lowpass(a * x + b * y), a * lowpass(x) + b * lowpass(y), atol=1e-9)


def _g(series, uid="u", gid="g", t=0, is_gesture=True):
    return Gesture(uid, gid, series, terminal=1, is_gesture=is_gesture, nfc_t_ms=t)


def test_norm_zero_variance_raises():
    s = np.random.default_rng(0).standard_normal((200, 6))
    s[:, 2] = 5.0
    with pytest.raises(DatasetError, match="acc_z"):
        fit_norm_stats([_g(s)])


def test_norm_two_gesture_hand_case():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 200, 6))
    a[:, 0], b[:, 0] = 0.0, 2.0
    stats = fit_norm_stats([_g(a), _g(b)])
    assert stats.mean[0] == pytest.approx(1.0)
    assert stats.std[0] == pytest.approx(1.0)
    na, nb = apply_norm(_g(a), stats), apply_norm(_g(b), stats)
    np.testing.assert_allclose(na.series[:, 0], -nb.series[:, 0])
    np.testing.assert_allclose(na.series[:, 0], -1.0)


def test_norm_refit_is_standard():
    rng = np.random.default_rng(2)
    train = [_g(rng.normal(3, 2, (200, 6))) for _ in range(5)]
    stats = fit_norm_stats(train)
    refit = fit_norm_stats([apply_norm(g, stats) for g in train])
    np.testing.assert_allclose(refit.mean, 0, atol=1e-6)
    np.testing.assert_allclose(refit.std, 1, atol=1e-6)


def test_norm_round_trip():
    rng = np.random.default_rng(3)
    g = _g(rng.normal(0, 5, (200, 6)))
    stats = fit_norm_stats([g, _g(rng.normal(1, 2, (200, 6)))])
    np.testing.assert_allclose(invert_norm(apply_norm(g, stats), stats).series, g.series, atol=1e-9)


def _user_corpus(n, uid="u", nongest=0):
    z = np.zeros((200, 6))
    out = [_g(z, uid, f"{uid}-{k}", t=100 * k) for k in range(n)]
    out += [_g(z, uid, f"{uid}-n{k}", t=100 * k + 50, is_gesture=False) for k in range(nongest)]
    return out


def test_split_nine_gestures():
    corpus = _user_corpus(9)
    split = temporal_split(corpus, seed=4)
    assert len(split.test) == 3
    assert sorted(split.test) == ["u-6", "u-7", "u-8"]
    assert len(split.validation) == 1  # floor(0.2 * 6) = 1
    assert len(split.train) == 5


def test_split_deterministic():
    corpus = _user_corpus(20, "a") + _user_corpus(12, "b", nongest=6)
    assert temporal_split(corpus, seed=7) == temporal_split(corpus, seed=7)


def test_split_too_few_gestures_names_user():
    with pytest.raises(DatasetError, match="'tiny'"):
        temporal_split(_user_corpus(5, "ok") + _user_corpus(2, "tiny"))


@settings(max_examples=40, deadline=None)
@given(sizes=st.lists(st.integers(3, 30), min_size=1, max_size=4), seed=st.integers(0, 10_000))
def test_split_properties(sizes, seed):
    corpus = []
    for u, n in enumerate(sizes):
        corpus += _user_corpus(n, f"u{u}", nongest=n // 3)
    split = temporal_split(corpus, seed=seed)
    tr, va, te = set(split.train), set(split.validation), set(split.test)
    assert not (tr & va) and not (tr & te) and not (va & te)
    assert len(tr | va | te) == len(corpus)
    by_id = {g.gesture_id: g for g in corpus}
    for u in range(len(sizes)):
        early = [by_id[i].nfc_t_ms for i in tr | va if by_id[i].user_id == f"u{u}"]
        late = [by_id[i].nfc_t_ms for i in te if by_id[i].user_id == f"u{u}"]
        assert max(early) < min(late)
    assert split == temporal_split(corpus, seed=seed)


def test_simulator_noise_free_gestures_identical():
    prof = random_profiles(1, seed=3, noise_sigma=0.0)
    corpus = simulate_corpus(prof, 9, seed=0)
    for g in corpus[1:]:
        np.testing.assert_array_equal(g.series, corpus[0].series)


def test_simulator_deterministic():
    prof = random_profiles(3, seed=1)
    a = simulate_corpus(prof, 5, 2, seed=11)
    b = simulate_corpus(prof, 5, 2, seed=11)
    assert [g.gesture_id for g in a] == [g.gesture_id for g in b]
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.series, y.series)


def test_simulator_nearest_centroid_separates_profiles():
    prof = random_profiles(2, seed=5, noise_sigma=0.05)
    corpus = simulate_corpus(prof, 60, seed=2)
    X = np.stack([g.series.ravel() for g in corpus])
    y = np.array([g.user_id == "u1" for g in corpus])
    train = np.arange(len(X)) % 2 == 0
    c0, c1 = X[train & ~y].mean(0), X[train & y].mean(0)
    pred = np.linalg.norm(X - c1, axis=1) < np.linalg.norm(X - c0, axis=1)
    acc = (pred[~train] == y[~train]).mean()
    assert acc > 0.95


def test_simulator_shapes_and_metadata():
    corpus = simulate_corpus(random_profiles(2, seed=0), 8, 3, seed=0)
    assert len(corpus) == 2 * 11
    assert all(g.series.shape == (200, 6) and np.isfinite(g.series).all() for g in corpus)
    assert {g.terminal for g in corpus if g.is_gesture} == set(range(1, 8))
    assert sum(not g.is_gesture for g in corpus) == 6


def test_profile_validation():
    p = random_profiles(1)[0]
    with pytest.raises(DatasetError):
        ds.SimUserProfile("x", p.bump_amplitudes, p.bump_centers, -p.bump_widths,
                          p.ramp_amplitudes, 1.0, 2.0, 0.1)


def test_corpus_jsonl_round_trip(tmp_path):
    corpus = simulate_corpus(random_profiles(2, seed=0), 3, 1, seed=0)
    ds.write_corpus(tmp_path / "c.jsonl", corpus)
    lines = (tmp_path / "c.jsonl").read_text().splitlines()
    rec = json.loads(lines[0])
    assert set(rec) == {"user_id", "gesture_id", "terminal", "is_gesture", "nfc_t_ms", "series"}
    back = ds.read_corpus(tmp_path / "c.jsonl")
    for a, b in zip(corpus, back):
        np.testing.assert_array_equal(a.series, b.series)
        assert (a.user_id, a.terminal, a.is_gesture) == (b.user_id, b.terminal, b.is_gesture)


def test_ingest_user_with_nongesture_windows(tmp_path):
    rows = []
    for t in range(0, 6000, 20):
        rows.append(("g1", "acc", t, 1, 2, 3))
        rows.append(("g1", "gyr", t + 3, 0, 0, 1))
    for t in range(0, 12_100, 25):
        rows.append(("n1", "acc", 100_000 + t, 0, 1, 0))
        rows.append(("n1", "gyr", 100_000 + t, 0, 0, 0))
    _write_csv(tmp_path / "alice.csv", rows)
    (tmp_path / "alice.json").write_text(json.dumps({"user_id": "alice", "gestures": [
        {"gesture_id": "g1", "nfc_t_ms": 5000, "terminal": 3, "is_gesture": True},
        {"gesture_id": "n1", "is_gesture": False}]}))
    gestures = ds.ingest_user(tmp_path / "alice.csv", tmp_path / "alice.json",
                              filter_cfg={"cutoff_hz": 10.0, "order": 2})
    assert [g.gesture_id for g in gestures] == ["g1", "n1#0", "n1#1", "n1#2"]
    assert gestures[0].terminal == 3 and not gestures[1].is_gesture
    np.testing.assert_allclose(gestures[0].series[:, :3], np.tile([1, 2, 3], (200, 1)), atol=1e-9)


def test_lowpass_filter_keeps_metadata():
    g = _g(np.random.default_rng(0).standard_normal((200, 6)), "u9", "x")
    f = lowpass_filter(g)
    assert (f.user_id, f.gesture_id) == ("u9", "x")
    assert f.series.shape == (200, 6)
