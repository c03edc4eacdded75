"""Differentiable building blocks with explicit backward passes.

Every ``*_fwd`` returns ``(out, cache)``; the matching ``*_bwd`` takes the
upstream gradient and the cache and returns the input gradient(s) plus a
dict of parameter gradients.  Arrays carry leading batch axes; the last
axis is the feature axis.
"""

import math

import numpy as np

LN_EPS = 1e-5
_GELU_K = math.sqrt(2.0 / math.pi)


def _flat(x):
    return x.reshape(-1, x.shape[-1])


def linear_fwd(x, w, b=None):
    y = x @ w
    if b is not None:
        y = y + b
    return y, x


def linear_bwd(dy, x, w, has_bias=True):
    dw = _flat(x).T @ _flat(dy)
    dx = dy @ w.T
    db = _flat(dy).sum(axis=0) if has_bias else None
    return dx, dw, db


def layernorm_fwd(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * rstd
    return xhat * g + b, (xhat, rstd, g)


def layernorm_bwd(dy, cache):
    xhat, rstd, g = cache
    n = xhat.shape[-1]
    dg = _flat(dy * xhat).sum(axis=0)
    db = _flat(dy).sum(axis=0)
    dxhat = dy * g
    dx = rstd / n * (
        n * dxhat
        - dxhat.sum(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True)
    )
    return dx, dg, db


def gelu_fwd(x):
    inner = _GELU_K * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), (x, t)


def gelu_bwd(dy, cache):
    x, t = cache
    dinner = _GELU_K * (1.0 + 3.0 * 0.044715 * x * x)
    return dy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner)


def softmax(s):
    s = s - s.max(axis=-1, keepdims=True)
    e = np.exp(s)
    return e / e.sum(axis=-1, keepdims=True)


def _split_heads(x, heads):
    *lead, t, d = x.shape
    return x.reshape(*lead, t, heads, d // heads).swapaxes(-3, -2)


def _merge_heads(x):
    x = x.swapaxes(-3, -2)
    *lead, t, h, dh = x.shape
    return x.reshape(*lead, t, h * dh)


def attention_fwd(xq, xkv, p, prefix, heads):
    """Multi-head attention of ``xq`` over ``xkv``.

    Parameters ``{prefix}wq, wk, wv, wo, bo``; no biases on the projections.
    """
    wq, wk, wv, wo, bo = (p[prefix + k] for k in ("wq", "wk", "wv", "wo", "bo"))
    q = _split_heads(xq @ wq, heads)
    k = _split_heads(xkv @ wk, heads)
    v = _split_heads(xkv @ wv, heads)
    scale = 1.0 / math.sqrt(q.shape[-1])
    a = softmax((q @ k.swapaxes(-1, -2)) * scale)
    o = _merge_heads(a @ v)
    y = o @ wo + bo
    return y, (xq, xkv, q, k, v, a, o, scale)


def attention_bwd(dy, cache, p, prefix, heads):
    xq, xkv, q, k, v, a, o, scale = cache
    wq, wk, wv, wo = (p[prefix + n] for n in ("wq", "wk", "wv", "wo"))
    grads = {
        prefix + "wo": _flat(o).T @ _flat(dy),
        prefix + "bo": _flat(dy).sum(axis=0),
    }
    do = _split_heads(dy @ wo.T, heads)
    da = do @ v.swapaxes(-1, -2)
    dv = a.swapaxes(-1, -2) @ do
    ds = a * (da - (da * a).sum(axis=-1, keepdims=True)) * scale
    dq = ds @ k
    dk = ds.swapaxes(-1, -2) @ q
    dq, dk, dv = _merge_heads(dq), _merge_heads(dk), _merge_heads(dv)
    grads[prefix + "wq"] = _flat(xq).T @ _flat(dq)
    grads[prefix + "wk"] = _flat(xkv).T @ _flat(dk)
    grads[prefix + "wv"] = _flat(xkv).T @ _flat(dv)
    dxq = dq @ wq.T
    dxkv = dk @ wk.T + dv @ wv.T
    return dxq, dxkv, grads


def mlp_fwd(x, p, prefix):
    h, _ = linear_fwd(x, p[prefix + "w1"], p[prefix + "b1"])
    act, gcache = gelu_fwd(h)
    y, _ = linear_fwd(act, p[prefix + "w2"], p[prefix + "b2"])
    return y, (x, act, gcache)


def mlp_bwd(dy, cache, p, prefix):
    x, act, gcache = cache
    dact, dw2, db2 = linear_bwd(dy, act, p[prefix + "w2"])
    dh = gelu_bwd(dact, gcache)
    dx, dw1, db1 = linear_bwd(dh, x, p[prefix + "w1"])
    return dx, {prefix + "w1": dw1, prefix + "b1": db1, prefix + "w2": dw2, prefix + "b2": db2}
