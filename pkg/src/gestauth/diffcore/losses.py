import numpy as np

from .tensor import _make, as_tensor

EPS_CLAMP = 1e-7


def weighted_bce(scores, labels, pos_weight=1.0):
    """Class-weighted binary cross-entropy and its gradient w.r.t. the scores.

    Each sample's loss is weighted by ``pos_weight`` when its label is 1 and
    by 1 otherwise; the result is the weighted sum divided by the total weight.
    Scores are clamped to [1e-7, 1 - 1e-7].
    """
    s = np.clip(np.asarray(scores, dtype=np.float64), EPS_CLAMP, 1.0 - EPS_CLAMP)
    y = np.asarray(labels, dtype=np.float64).reshape(s.shape)
    w = np.where(y > 0.5, pos_weight, 1.0)
    total = w.sum()
    per = -(y * np.log(s) + (1.0 - y) * np.log(1.0 - s))
    value = float((w * per).sum() / total)
    grad = w * (-(y / s) + (1.0 - y) / (1.0 - s)) / total
    raw = np.asarray(scores, dtype=np.float64)
    grad = np.where((raw < EPS_CLAMP) | (raw > 1.0 - EPS_CLAMP), 0.0, grad)
    return value, grad


def bce_loss(scores, labels, pos_weight=1.0):
    """Tensor-valued :func:`weighted_bce`, for use at the end of a graph."""
    scores = as_tensor(scores)
    value, grad = weighted_bce(scores.data, labels, pos_weight)

    def backward(g):
        scores._accumulate(g * grad)

    return _make(np.array(value), (scores,), backward)


def attach_loss(pred, value, grad):
    """Wrap an externally computed (value, d value/d pred) pair as a graph node."""
    pred = as_tensor(pred)

    def backward(g):
        pred._accumulate(g * grad)

    return _make(np.array(value, dtype=np.float64), (pred,), backward)
