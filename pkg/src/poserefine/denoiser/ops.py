"""Differentiable building blocks for the pose denoiser.

Every forward returns ``(output, cache)`` and the matching backward consumes
``(grad_output, cache)``, returning gradients in the same order as the
forward inputs.  Everything runs in float64; gradients are exact, which the
test suite pins against central finite differences.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def linear_forward(x, w, b):
    """y = x @ w + b over the last axis."""
    return x @ w + b, (x, w)


def linear_backward(gy, cache):
    x, w = cache
    gx = gy @ w.T
    x2 = x.reshape(-1, x.shape[-1])
    gy2 = gy.reshape(-1, gy.shape[-1])
    gw = x2.T @ gy2
    gb = gy2.sum(axis=0)
    return gx, gw, gb


def layernorm_forward(x, gain, bias, eps: float = 1e-5):
    mean = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gain * xhat + bias, (xhat, inv_std, gain)


def layernorm_backward(gy, cache):
    xhat, inv_std, gain = cache
    gxhat = gy * gain
    gx = inv_std * (
        gxhat
        - gxhat.mean(axis=-1, keepdims=True)
        - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
    )
    lead = tuple(range(gy.ndim - 1))
    ggain = (gy * xhat).sum(axis=lead)
    gbias = gy.sum(axis=lead)
    return gx, ggain, gbias


def gelu_forward(x):
    cdf = 0.5 * (1.0 + erf(x / SQRT2))
    return x * cdf, (x, cdf)


def gelu_backward(gy, cache):
    x, cdf = cache
    pdf = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return gy * (cdf + x * pdf)


def softmax_forward(scores):
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    return probs, probs


def softmax_backward(gp, probs):
    return probs * (gp - (gp * probs).sum(axis=-1, keepdims=True))


def _split_heads(x, heads):
    b, t, c = x.shape
    return x.reshape(b, t, heads, c // heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


def attention_forward(xq, xkv, weights, prefix, heads):
    """Multi-head attention of queries ``xq`` over key/value tokens ``xkv``.

    ``xq`` is (B, Tq, C); ``xkv`` is (B, Tk, Dkv) and may have a different
    channel width than C (the key/value projections map it to C).  Used both
    for self-attention (xkv is xq) and for cross-attention onto the timestep
    embedding (Tk = 1).
    """
    q, c_q = linear_forward(xq, weights[prefix + ".wq"], weights[prefix + ".bq"])
    k, c_k = linear_forward(xkv, weights[prefix + ".wk"], weights[prefix + ".bk"])
    v, c_v = linear_forward(xkv, weights[prefix + ".wv"], weights[prefix + ".bv"])
    qh = _split_heads(q, heads)
    kh = _split_heads(k, heads)
    vh = _split_heads(v, heads)
    scale = 1.0 / math.sqrt(qh.shape[-1])
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    attn, c_sm = softmax_forward(scores)
    ctx = _merge_heads(attn @ vh)
    out, c_o = linear_forward(ctx, weights[prefix + ".wo"], weights[prefix + ".bo"])
    return out, (c_q, c_k, c_v, qh, kh, vh, c_sm, scale, c_o, heads)


def attention_backward(gy, cache, grads, prefix):
    """Returns (grad_xq, grad_xkv) and accumulates weight grads into ``grads``."""
    c_q, c_k, c_v, qh, kh, vh, attn, scale, c_o, heads = cache
    gctx, gwo, gbo = linear_backward(gy, c_o)
    _accumulate(grads, prefix + ".wo", gwo)
    _accumulate(grads, prefix + ".bo", gbo)

    gctxh = _split_heads(gctx, heads)
    gattn = gctxh @ vh.transpose(0, 1, 3, 2)
    gvh = attn.transpose(0, 1, 3, 2) @ gctxh
    gscores = softmax_backward(gattn, attn) * scale
    gqh = gscores @ kh
    gkh = gscores.transpose(0, 1, 3, 2) @ qh

    gq, gwq, gbq = linear_backward(_merge_heads(gqh), c_q)
    gk, gwk, gbk = linear_backward(_merge_heads(gkh), c_k)
    gv, gwv, gbv = linear_backward(_merge_heads(gvh), c_v)
    _accumulate(grads, prefix + ".wq", gwq)
    _accumulate(grads, prefix + ".bq", gbq)
    _accumulate(grads, prefix + ".wk", gwk)
    _accumulate(grads, prefix + ".bk", gbk)
    _accumulate(grads, prefix + ".wv", gwv)
    _accumulate(grads, prefix + ".bv", gbv)
    return gq, gk + gv


def _accumulate(grads, name, value):
    if name in grads:
        grads[name] += value
    else:
        grads[name] = value
