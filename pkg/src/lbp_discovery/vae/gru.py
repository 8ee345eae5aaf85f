"""Gated recurrent unit layer with masked sequences and backprop through time.

Cell equations (per time step, ``x`` input, ``h`` previous state)::

    r  = sigmoid(x Wx_r + bx_r + h Wh_r + bh_r)          reset gate
    u  = sigmoid(x Wx_u + bx_u + h Wh_u + bh_u)          update gate
    n  = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))       candidate
    h' = (1 - u) * n + u * h

Padding steps (mask 0) carry the state through unchanged, so the state after
the last step of a forward pass is the state at the last real token, and a
reversed pass starts from a zero state at the last real token.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_params(rng, n_in: int, hidden: int) -> dict[str, np.ndarray]:
    scale = 1.0 / np.sqrt(hidden)
    return {
        "Wx": rng.uniform(-scale, scale, (n_in, 3 * hidden)),
        "Wh": rng.uniform(-scale, scale, (hidden, 3 * hidden)),
        "bx": rng.uniform(-scale, scale, 3 * hidden),
        "bh": rng.uniform(-scale, scale, 3 * hidden),
    }


def step(x, h, p):
    """One cell update without caching; used for autoregressive decoding."""
    H = h.shape[1]
    gx = x @ p["Wx"] + p["bx"]
    gh = h @ p["Wh"] + p["bh"]
    r = sigmoid(gx[:, :H] + gh[:, :H])
    u = sigmoid(gx[:, H : 2 * H] + gh[:, H : 2 * H])
    n = np.tanh(gx[:, 2 * H :] + r * gh[:, 2 * H :])
    return (1.0 - u) * n + u * h


def forward(X, mask, h0, p, reverse: bool = False):
    """Run the layer over ``X`` of shape (T, N, n_in).

    Returns the state sequence (T, N, H) indexed by time, and a cache.
    """
    T, N, _ = X.shape
    H = p["Wh"].shape[0]
    Gx = X @ p["Wx"] + p["bx"]
    Hs = np.empty((T, N, H))
    r_s = np.empty((T, N, H))
    u_s = np.empty((T, N, H))
    n_s = np.empty((T, N, H))
    ghn_s = np.empty((T, N, H))
    prev_s = np.empty((T, N, H))
    h = h0
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        gh = h @ p["Wh"] + p["bh"]
        r = sigmoid(Gx[t, :, :H] + gh[:, :H])
        u = sigmoid(Gx[t, :, H : 2 * H] + gh[:, H : 2 * H])
        n = np.tanh(Gx[t, :, 2 * H :] + r * gh[:, 2 * H :])
        m = mask[t][:, None]
        h_new = m * ((1.0 - u) * n + u * h) + (1.0 - m) * h
        r_s[t], u_s[t], n_s[t], ghn_s[t], prev_s[t] = r, u, n, gh[:, 2 * H :], h
        Hs[t] = h_new
        h = h_new
    cache = (X, mask, r_s, u_s, n_s, ghn_s, prev_s, reverse)
    return Hs, cache


def backward(dHs, cache, p):
    """Gradients given dLoss/dHs for every time step.

    Returns (dX, dh0, grads) with ``grads`` keyed like ``p``.
    """
    X, mask, r_s, u_s, n_s, ghn_s, prev_s, reverse = cache
    T, N, H = dHs.shape
    Wh = p["Wh"]
    dGx = np.empty((T, N, 3 * H))
    dWh = np.zeros_like(Wh)
    dbh = np.zeros(3 * H)
    dh = np.zeros((N, H))
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        dh = dh + dHs[t]
        r, u, n, ghn, h_prev = r_s[t], u_s[t], n_s[t], ghn_s[t], prev_s[t]
        m = mask[t][:, None]
        dhn = m * dh
        d_prev = (1.0 - m) * dh + dhn * u
        du = dhn * (h_prev - n)
        dan = dhn * (1.0 - u) * (1.0 - n * n)
        dar = dan * ghn * r * (1.0 - r)
        dau = du * u * (1.0 - u)
        dgh = np.concatenate([dar, dau, dan * r], axis=1)
        dGx[t] = np.concatenate([dar, dau, dan], axis=1)
        dWh += h_prev.T @ dgh
        dbh += dgh.sum(axis=0)
        dh = d_prev + dgh @ Wh.T
    n_in = X.shape[2]
    grads = {
        "Wx": X.reshape(-1, n_in).T @ dGx.reshape(-1, 3 * H),
        "Wh": dWh,
        "bx": dGx.sum(axis=(0, 1)),
        "bh": dbh,
    }
    dX = dGx @ p["Wx"].T
    return dX, dh, grads
