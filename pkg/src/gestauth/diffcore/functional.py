"""Fused sequence ops with hand-written backward passes.

Sequence tensors are laid out (batch, time, channels).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import _make, _sigmoid, add, as_tensor, matmul


def _pad_amount(kernel_size, padding):
    if padding == "same":
        if kernel_size % 2 == 0:
            raise ValueError("'same' padding needs an odd kernel size")
        return (kernel_size - 1) // 2
    if padding == "valid":
        return 0
    raise ValueError(f"unknown padding {padding!r}")


def conv1d(x, w, b=None, padding="same"):
    """Cross-correlation over time with zero padding.

    ``out[:, i, o] = sum_m sum_c xpad[:, i + m, c] * w[m, c, o] + b[o]``
    with ``w`` shaped (kernel, in_channels, out_channels).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.data.ndim != 3 or x.shape[2] != w.shape[1]:
        raise ValueError(f"conv1d: input {x.shape} incompatible with kernel {w.shape}")
    k, cin, cout = w.shape
    p = _pad_amount(k, padding)
    B, T, _ = x.shape
    xp = np.pad(x.data, ((0, 0), (p, p), (0, 0))) if p else x.data
    t_out = xp.shape[1] - k + 1
    if t_out < 1:
        raise ValueError(f"conv1d: sequence of length {T} shorter than kernel {k}")
    # (B, t_out, cin, k) -> (B, t_out, k, cin)
    cols = sliding_window_view(xp, k, axis=1).transpose(0, 1, 3, 2).reshape(B * t_out, k * cin)
    w2 = w.data.reshape(k * cin, cout)
    out = (cols @ w2).reshape(B, t_out, cout)
    parents = [x, w]
    if b is not None:
        b = as_tensor(b)
        out = out + b.data
        parents.append(b)

    def backward(g):
        g2 = g.reshape(B * t_out, cout)
        if w.requires_grad:
            w._accumulate((cols.T @ g2).reshape(k, cin, cout))
        if b is not None and b.requires_grad:
            b._accumulate(g2.sum(axis=0))
        if x.requires_grad:
            dcols = (g2 @ w2.T).reshape(B, t_out, k, cin)
            dxp = np.zeros((B, xp.shape[1], cin))
            for m in range(k):
                dxp[:, m : m + t_out, :] += dcols[:, :, m, :]
            x._accumulate(dxp[:, p : p + T, :] if p else dxp)

    return _make(out, parents, backward)


def maxpool1d(x):
    """Window 2, stride 2, ceil mode: an odd trailing step is pooled alone."""
    x = as_tensor(x)
    B, T, C = x.shape
    t_out = (T + 1) // 2
    xd = x.data
    if T % 2:
        xd = np.concatenate([xd, np.full((B, 1, C), -np.inf)], axis=1)
    win = xd.reshape(B, t_out, 2, C)
    arg = win.argmax(axis=2)
    out = np.take_along_axis(win, arg[:, :, None, :], axis=2)[:, :, 0, :]

    def backward(g):
        full = np.zeros((B, t_out, 2, C))
        np.put_along_axis(full, arg[:, :, None, :], g[:, :, None, :], axis=2)
        x._accumulate(full.reshape(B, 2 * t_out, C)[:, :T, :])

    return _make(out, (x,), backward)


def upsample1d(x, factor):
    x = as_tensor(x)
    B, T, C = x.shape

    def backward(g):
        x._accumulate(g.reshape(B, T, factor, C).sum(axis=2))

    return _make(np.repeat(x.data, factor, axis=1), (x,), backward)


def gru(x, w, u, b, h0=None):
    """Run a GRU over the time axis and return every hidden state.

    Gates are packed [update | reset | candidate] along the last axis of
    ``w`` (in, 3H), ``u`` (H, 3H) and ``b`` (3H,)::

        z = sigmoid(x W_z + h U_z + b_z)
        r = sigmoid(x W_r + h U_r + b_r)
        n = tanh(x W_n + (r * h) U_n + b_n)
        h' = (1 - z) * n + z * h
    """
    x, w, u, b = as_tensor(x), as_tensor(w), as_tensor(u), as_tensor(b)
    B, T, nin = x.shape
    H = u.shape[0]
    if w.shape != (nin, 3 * H) or u.shape != (H, 3 * H) or b.shape != (3 * H,):
        raise ValueError(f"gru: input {x.shape} incompatible with weights {w.shape}/{u.shape}/{b.shape}")
    A = x.data @ w.data + b.data
    uz, ur, un = u.data[:, :H], u.data[:, H : 2 * H], u.data[:, 2 * H :]
    h = np.zeros((B, H)) if h0 is None else np.asarray(h0, dtype=np.float64)
    hs = np.empty((B, T, H))
    zs = np.empty((B, T, H))
    rs = np.empty((B, T, H))
    ns = np.empty((B, T, H))
    hprev = np.empty((B, T, H))
    for t in range(T):
        a = A[:, t, :]
        z = _sigmoid(a[:, :H] + h @ uz)
        r = _sigmoid(a[:, H : 2 * H] + h @ ur)
        n = np.tanh(a[:, 2 * H :] + (r * h) @ un)
        hprev[:, t] = h
        h = (1.0 - z) * n + z * h
        zs[:, t], rs[:, t], ns[:, t], hs[:, t] = z, r, n, h

    def backward(g):
        dA = np.empty((B, T, 3 * H))
        du = np.zeros((H, 3 * H))
        dh = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            dh = dh + g[:, t, :]
            z, r, n, hp = zs[:, t], rs[:, t], ns[:, t], hprev[:, t]
            dn = dh * (1.0 - z)
            dz = dh * (hp - n)
            dh_prev = dh * z
            dan = dn * (1.0 - n * n)
            rh = r * hp
            du[:, 2 * H :] += rh.T @ dan
            drh = dan @ un.T
            dr = drh * hp
            dh_prev += drh * r
            daz = dz * z * (1.0 - z)
            dar = dr * r * (1.0 - r)
            du[:, :H] += hp.T @ daz
            du[:, H : 2 * H] += hp.T @ dar
            dh_prev += daz @ uz.T + dar @ ur.T
            dA[:, t, :H] = daz
            dA[:, t, H : 2 * H] = dar
            dA[:, t, 2 * H :] = dan
            dh = dh_prev
        if u.requires_grad:
            u._accumulate(du)
        if b.requires_grad:
            b._accumulate(dA.sum(axis=(0, 1)))
        if w.requires_grad:
            w._accumulate(x.data.reshape(-1, nin).T @ dA.reshape(-1, 3 * H))
        if x.requires_grad:
            x._accumulate(dA @ w.data.T)

    return _make(hs, (x, w, u, b), backward)


def dense(x, w, b):
    return add(matmul(x, w), b)


def flatten(x):
    x = as_tensor(x)
    return x.reshape(x.shape[0], -1)
