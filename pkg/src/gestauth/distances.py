"""Timeseries dissimilarities and reconstruction losses.

Series are (T,) or (T, C) arrays; multi-channel DTW-family quantities are
computed per channel and summed. Loss functions that feed training return
``(value, gradient w.r.t. the reconstruction y)``; ``x`` is always the target.
"""

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .features import extract_features_batch, features_vjp

KLB_BANDWIDTHS = (2, 4, 8, 16, 32)
KLB_WEIGHTS = (5.0, 4.0, 3.0, 2.0, 1.0)
LOSS_KINDS = ("mse", "soft_dtw", "klb_mod", "mse_feature", "klb_mod_feature")
DEFAULT_WEIGHTS = {
    "mse": (1.0, 0.0),
    "soft_dtw": (1.0, 0.0),
    "klb_mod": (1.0, 0.0),
    "mse_feature": (0.0, 0.1),
    "klb_mod_feature": (1.0, 0.01),
}
POINT_DISTS = ("squared", "abs")


class DistanceError(ValueError):
    pass


def _as_1d(x, name):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 2 and a.shape[1] == 1:
        a = a[:, 0]
    if a.ndim != 1:
        raise DistanceError(f"{name}: expected a single-channel series, got shape {a.shape}")
    if a.size == 0:
        raise DistanceError(f"{name}: empty series")
    return a


def _as_2d(x):
    a = np.asarray(x, dtype=np.float64)
    return a[:, None] if a.ndim == 1 else a


def _check_point_dist(point_dist):
    if point_dist not in POINT_DISTS:
        raise DistanceError(f"point_dist must be one of {POINT_DISTS}, got {point_dist!r}")
    return point_dist == "squared"


# --- DTW -----------------------------------------------------------------------

@numba.njit(cache=True)
def _dtw_kernel(x, y, band, squared):
    n, m = x.shape[0], y.shape[0]
    inf = np.inf
    D = np.full((n + 1, m + 1), inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        lo, hi = 1, m
        if band >= 0:
            lo = max(1, i - band)
            hi = min(m, i + band)
        for j in range(lo, hi + 1):
            d = x[i - 1] - y[j - 1]
            cost = d * d if squared else abs(d)
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = cost + best
    return D[n, m]


def dtw(x, y, band_w=None, point_dist="squared"):
    """DTW distance between two single-channel series.

    With ``band_w`` set, matched indices satisfy |i - j| <= band_w
    (Sakoe-Chiba band).
    """
    x, y = _as_1d(x, "x"), _as_1d(y, "y")
    squared = _check_point_dist(point_dist)
    band = -1
    if band_w is not None:
        if band_w < 0:
            raise DistanceError("band_w must be non-negative")
        if abs(len(x) - len(y)) > band_w:
            raise DistanceError(f"length difference {abs(len(x) - len(y))} exceeds band {band_w}")
        band = int(band_w)
    return float(_dtw_kernel(x, y, band, squared))


# --- Keogh envelopes and bounds ------------------------------------------------

@dataclass
class Envelope:
    upper: np.ndarray
    lower: np.ndarray
    w: int


def envelopes(x, w):
    """Running max/min of ``x`` over the window [i - w, i + w] clipped to the series."""
    if w < 1:
        raise DistanceError("envelope bandwidth must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    size = 2 * int(w) + 1
    return Envelope(maximum_filter1d(x, size, axis=0, mode="nearest"),
                    minimum_filter1d(x, size, axis=0, mode="nearest"), int(w))


def lb_keogh(x, y, w, point_dist="squared"):
    """Keogh lower bound: distance from ``y`` to the band-``w`` envelope of ``x``."""
    x, y = _as_1d(x, "x"), _as_1d(y, "y")
    if x.shape != y.shape:
        raise DistanceError(f"lb_keogh needs equal lengths, got {len(x)} and {len(y)}")
    squared = _check_point_dist(point_dist)
    env = envelopes(x, w)
    excess = np.maximum(y - env.upper, 0.0) + np.maximum(env.lower - y, 0.0)
    return float((excess**2).sum() if squared else excess.sum())


def _klb_terms(x, y):
    """Batch KLB-mod with squared point distance: x, y (B, T, C) -> (values, grad_y)."""
    value = np.zeros(x.shape[0])
    grad = np.zeros_like(y)
    for w, weight in zip(KLB_BANDWIDTHS, KLB_WEIGHTS):
        size = 2 * w + 1
        up = maximum_filter1d(x, size, axis=1, mode="nearest")
        lo = minimum_filter1d(x, size, axis=1, mode="nearest")
        above = np.maximum(y - up, 0.0)
        below = np.maximum(lo - y, 0.0)
        value += weight * (above**2 + below**2).sum(axis=(1, 2))
        grad += weight * 2.0 * (above - below)
    return value, grad


def klb_mod(x, y):
    """Weighted Keogh bounds at bandwidths 2, 4, 8, 16, 32 (weights 5..1), summed over channels."""
    x, y = _as_2d(x), _as_2d(y)
    if x.shape != y.shape:
        raise DistanceError(f"klb_mod shape mismatch {x.shape} vs {y.shape}")
    value, _ = _klb_terms(x[None], y[None])
    return float(value[0])


# --- Soft-DTW --------------------------------------------------------------------

@numba.njit(cache=True)
def _softmin3(a, b, c, gamma):
    m = min(a, min(b, c))
    if m == np.inf:
        return np.inf
    s = math.exp(-(a - m) / gamma) + math.exp(-(b - m) / gamma) + math.exp(-(c - m) / gamma)
    return m - gamma * math.log(s)


@numba.njit(cache=True)
def _soft_dtw_channel(x, y, gamma):
    n, m = x.shape[0], y.shape[0]
    D = np.empty((n + 2, m + 2))
    D[:, :] = 0.0
    for i in range(n):
        for j in range(m):
            d = x[i] - y[j]
            D[i + 1, j + 1] = d * d
    R = np.full((n + 2, m + 2), np.inf)
    R[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            R[i, j] = D[i, j] + _softmin3(R[i - 1, j - 1], R[i - 1, j], R[i, j - 1], gamma)
    value = R[n, m]
    # reverse accumulation through the table
    E = np.zeros((n + 2, m + 2))
    E[n + 1, m + 1] = 1.0
    for i in range(1, n + 1):
        R[i, m + 1] = -np.inf
    for j in range(1, m + 1):
        R[n + 1, j] = -np.inf
    R[n + 1, m + 1] = R[n, m]
    for j in range(m, 0, -1):
        for i in range(n, 0, -1):
            a = math.exp((R[i + 1, j] - R[i, j] - D[i + 1, j]) / gamma)
            b = math.exp((R[i, j + 1] - R[i, j] - D[i, j + 1]) / gamma)
            c = math.exp((R[i + 1, j + 1] - R[i, j] - D[i + 1, j + 1]) / gamma)
            E[i, j] = E[i + 1, j] * a + E[i, j + 1] * b + E[i + 1, j + 1] * c
    grad_y = np.zeros(m)
    for i in range(n):
        for j in range(m):
            grad_y[j] += E[i + 1, j + 1] * (-2.0) * (x[i] - y[j])
    return value, grad_y


@numba.njit(cache=True)
def _soft_dtw_batch(x, y, gamma):
    B, _, C = x.shape
    values = np.zeros(B)
    grads = np.zeros(y.shape)
    for b in range(B):
        for c in range(C):
            v, g = _soft_dtw_channel(x[b, :, c], y[b, :, c], gamma)
            values[b] += v
            grads[b, :, c] = g
    return values, grads


def soft_dtw(x, y, gamma=0.1):
    """Soft-DTW (squared point cost) per channel, summed; returns (value, d/dy)."""
    if gamma <= 0:
        raise DistanceError("gamma must be positive")
    x2, y2 = _as_2d(x), _as_2d(y)
    if x2.shape[1] != y2.shape[1]:
        raise DistanceError(f"channel mismatch {x2.shape} vs {y2.shape}")
    if not (np.all(np.isfinite(x2)) and np.all(np.isfinite(y2))):
        raise DistanceError("soft_dtw input contains NaN or inf")
    value, grad = 0.0, np.zeros_like(y2)
    for c in range(x2.shape[1]):
        v, g = _soft_dtw_channel(np.ascontiguousarray(x2[:, c]), np.ascontiguousarray(y2[:, c]), float(gamma))
        value += v
        grad[:, c] = g
    return float(value), grad.reshape(np.shape(y))


# --- pointwise and feature losses ----------------------------------------------

def _check_same_shape(x, y, name):
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DistanceError(f"{name}: shape mismatch {x.shape} vs {y.shape}")
    return x, y


def mse_loss(x, y):
    """Sum (not mean) of squared pointwise differences."""
    x, y = _check_same_shape(x, y, "mse_loss")
    return float(((x - y) ** 2).sum())


def feature_loss(x, y):
    """Squared Euclidean distance between the two feature vectors."""
    x, y = _check_same_shape(x, y, "feature_loss")
    fx, fy = extract_features_batch(x[None]), extract_features_batch(y[None])
    return float(((fx - fy) ** 2).sum())


# --- combined reconstruction loss -------------------------------------------------

@dataclass(frozen=True)
class LossSpec:
    kind: str = "klb_mod_feature"
    base_w: float = None
    feature_w: float = None
    gamma: float = 0.1

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise DistanceError(f"unknown loss kind {self.kind!r}; choose from {LOSS_KINDS}")
        base, feat = DEFAULT_WEIGHTS[self.kind]
        if self.base_w is None:
            object.__setattr__(self, "base_w", base)
        if self.feature_w is None:
            object.__setattr__(self, "feature_w", feat)
        if self.base_w < 0 or self.feature_w < 0:
            raise DistanceError("loss weights must be non-negative")
        if self.gamma <= 0:
            raise DistanceError("gamma must be positive")

    @property
    def base(self):
        return {"mse": "mse", "mse_feature": "mse", "soft_dtw": "soft_dtw",
                "klb_mod": "klb_mod", "klb_mod_feature": "klb_mod"}[self.kind]


def combined_loss_batch(spec, x, y):
    """Per-sample loss values (B,) and gradient w.r.t. ``y`` for batches (B, T, C)."""
    x, y = _check_same_shape(x, y, "combined_loss")
    values = np.zeros(x.shape[0])
    grad = np.zeros_like(y)
    if spec.base_w > 0:
        if spec.base == "mse":
            diff = y - x
            v, g = (diff**2).sum(axis=(1, 2)), 2.0 * diff
        elif spec.base == "klb_mod":
            v, g = _klb_terms(x, y)
        else:
            v, g = _soft_dtw_batch(np.ascontiguousarray(x), np.ascontiguousarray(y), float(spec.gamma))
        values += spec.base_w * v
        grad += spec.base_w * g
    if spec.feature_w > 0:
        fx = extract_features_batch(x)
        fy = extract_features_batch(y)
        _, gy = features_vjp(y, 2.0 * (fy - fx))
        values += spec.feature_w * ((fy - fx) ** 2).sum(axis=1)
        grad += spec.feature_w * gy
    return values, grad


def combined_loss(spec, x, y):
    x, y = _check_same_shape(x, y, "combined_loss")
    values, grad = combined_loss_batch(spec, _as_2d(x)[None], _as_2d(y)[None])
    return float(values[0]), grad[0].reshape(y.shape)
