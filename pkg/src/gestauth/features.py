"""Per-channel summary statistics of gestures.

The feature vector holds 9 statistics for each of 8 channels: the six raw
channels plus accelerometer and gyroscope magnitudes. Layout is channel-major:
``features[c * 9 + k]`` is statistic ``k`` of channel ``c``.

All statistics are differentiable almost everywhere; :func:`features_vjp`
pulls a feature-space gradient back to the raw series.
"""

import csv

import numpy as np

STAT_NAMES = ("max", "min", "mean", "std", "var", "skew", "kurtosis", "median", "iqr")
EXT_CHANNELS = ("acc_x", "acc_y", "acc_z", "gyr_x", "gyr_y", "gyr_z", "acc_norm", "gyr_norm")
N_STATS = len(STAT_NAMES)
N_FEATURES = N_STATS * len(EXT_CHANNELS)


def _series_of(g):
    return g.series if hasattr(g, "series") else np.asarray(g, dtype=np.float64)


def channels_extended(x):
    """Append |acc| and |gyr| channels: (..., T, 6) -> (..., T, 8)."""
    x = _series_of(x)
    acc = np.sqrt((x[..., :3] ** 2).sum(axis=-1, keepdims=True))
    gyr = np.sqrt((x[..., 3:6] ** 2).sum(axis=-1, keepdims=True))
    return np.concatenate([x, acc, gyr], axis=-1)


def _degenerate(m2, mean):
    return m2 <= (1e-12 * np.maximum(1.0, np.abs(mean))) ** 2


def _quantile_parts(sorted_v, q):
    n = sorted_v.shape[-2]
    h = (n - 1) * q
    lo = int(np.floor(h))
    hi = min(lo + 1, n - 1)
    return lo, hi, h - lo


def _stats(v):
    """v: (B, T, C) -> stats (B, C, 9) plus intermediates for the backward pass."""
    n = v.shape[1]
    mean = v.mean(axis=1)
    d = v - mean[:, None, :]
    m2 = (d**2).mean(axis=1)
    m3 = (d**3).mean(axis=1)
    m4 = (d**4).mean(axis=1)
    std = np.sqrt(m2)
    degen = _degenerate(m2, mean)
    safe = np.where(degen, 1.0, m2)
    skew = np.where(degen, 0.0, m3 / safe**1.5)
    kurt = np.where(degen, 0.0, m4 / safe**2 - 3.0)
    order = np.argsort(v, axis=1, kind="stable")
    sv = np.take_along_axis(v, order, axis=1)

    def quant(q):
        lo, hi, frac = _quantile_parts(sv, q)
        return sv[:, lo] + frac * (sv[:, hi] - sv[:, lo])

    q1, med, q3 = quant(0.25), quant(0.5), quant(0.75)
    stats = np.stack([v.max(axis=1), v.min(axis=1), mean, std, m2, skew, kurt, med, q3 - q1], axis=-1)
    cache = dict(n=n, d=d, m2=m2, m3=m3, m4=m4, std=std, degen=degen, safe=safe, order=order)
    return stats, cache


def extract_features(g):
    """72-value feature vector of one gesture (or (200, 6) array)."""
    stats, _ = _stats(channels_extended(_series_of(g))[None])
    return stats.reshape(-1)


def extract_features_batch(x):
    x = np.asarray(x, dtype=np.float64)
    stats, _ = _stats(channels_extended(x))
    return stats.reshape(len(x), -1)


def _quantile_grad(order, q, n, upstream):
    """Scatter d quantile/d v back to the unsorted positions."""
    lo, hi, frac = _quantile_parts(np.empty((1, n, 1)), q)
    out = np.zeros(order.shape)
    B, _, C = order.shape
    bi, ci = np.meshgrid(np.arange(B), np.arange(C), indexing="ij")
    out[bi, order[:, lo, :], ci] += (1.0 - frac) * upstream
    out[bi, order[:, hi, :], ci] += frac * upstream
    return out


def _stats_vjp(v, cache, gstat):
    """Given dL/dstats (B, C, 9), return dL/dv (B, T, C)."""
    n, d, m2, m3, m4 = cache["n"], cache["d"], cache["m2"], cache["m3"], cache["m4"]
    std, degen, safe = cache["std"], cache["degen"], cache["safe"]
    B, T, C = v.shape
    g = np.zeros_like(v)
    bi, ci = np.meshgrid(np.arange(B), np.arange(C), indexing="ij")
    g[bi, v.argmax(axis=1), ci] += gstat[..., 0]
    g[bi, v.argmin(axis=1), ci] += gstat[..., 1]
    g += gstat[:, None, :, 2] / n
    dm2 = 2.0 * d / n  # d m2 / d v_i
    gm2 = gstat[..., 4] + np.where(degen, 0.0, gstat[..., 3] / (2.0 * np.where(degen, 1.0, std)))
    dm3 = 3.0 * (d**2 - m2[:, None, :]) / n
    dm4 = 4.0 * (d**3 - m3[:, None, :]) / n
    live = ~degen
    gs, gk = np.where(live, gstat[..., 5], 0.0), np.where(live, gstat[..., 6], 0.0)
    gm3 = gs / safe**1.5
    gm2 = gm2 - gs * 1.5 * m3 / safe**2.5
    gm4 = gk / safe**2
    gm2 = gm2 - gk * 2.0 * m4 / safe**3
    g += dm2 * gm2[:, None, :] + dm3 * gm3[:, None, :] + dm4 * gm4[:, None, :]
    order = cache["order"]
    g += _quantile_grad(order, 0.5, n, gstat[..., 7])
    g += _quantile_grad(order, 0.75, n, gstat[..., 8])
    g -= _quantile_grad(order, 0.25, n, gstat[..., 8])
    return g


def features_vjp(x, upstream):
    """Features of a batch ``x`` (B, T, 6) and the pullback of ``upstream`` (B, 72)."""
    x = np.asarray(x, dtype=np.float64)
    v = channels_extended(x)
    stats, cache = _stats(v)
    gv = _stats_vjp(v, cache, np.asarray(upstream).reshape(stats.shape))
    gx = gv[..., :6].copy()
    for j, sl in ((6, slice(0, 3)), (7, slice(3, 6))):
        r = v[..., j : j + 1]
        gx[..., sl] += gv[..., j : j + 1] * np.where(r > 0, x[..., sl] / np.where(r > 0, r, 1.0), 0.0)
    return stats.reshape(len(x), -1), gx


def peak_count(series, threshold_std=0.5, min_separation=5):
    """Strict local maxima above mean + threshold_std * std, at least
    ``min_separation`` samples apart (taller peaks win)."""
    s = np.asarray(series, dtype=np.float64).ravel()
    if s.size < 3:
        return 0
    level = s.mean() + threshold_std * s.std()
    idx = np.flatnonzero((s[1:-1] > s[:-2]) & (s[1:-1] > s[2:]) & (s[1:-1] > level)) + 1
    kept = []
    for i in sorted(idx, key=lambda i: (-s[i], i)):
        if all(abs(i - j) >= min_separation for j in kept):
            kept.append(i)
    return len(kept)


def feature_names():
    return [f"{c}_{s}" for c in EXT_CHANNELS for s in STAT_NAMES]


def write_feature_csv(path, gestures):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "gesture_id"] + [f"f{i}" for i in range(N_FEATURES)])
        for g in gestures:
            w.writerow([g.user_id, g.gesture_id] + [repr(float(v)) for v in extract_features(g)])
