"""Differentiable layer kernels: convolutions, padding, normalization, attention pieces, losses.

Layout is channels-first with a leading batch axis: ``(B, C, *spatial)`` with
one (linear), two (2-D) or three (3-D) spatial axes.  Convolutions are "valid"
(no implicit padding) cross-correlations.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .tensor import Tensor, as_tensor, make_result, matmul, softmax, transpose, reshape


# -- convolution helpers ------------------------------------------------------------
# Convolutions run channels-last and accumulate one matmul per kernel offset:
# y[:, window(o)] += x_slice(o) @ W[o].  For the small maps used here this beats
# im2col by a wide margin and needs no scatter-add in the backward pass.
def _offsets(ksize):
    return list(itertools.product(*(range(k) for k in ksize)))


def _window(offs, n_out, stride):
    return (slice(None),) + tuple(slice(o, o + stride * (n - 1) + 1, stride) for o, n in zip(offs, n_out))


def _gather(xcl, wk, ksize, stride, out_sp):
    """Valid correlation: ``(B, *S, Ci)`` x ``(K, Ci, Co)`` -> ``(B, *S_out, Co)``."""
    y = np.zeros((xcl.shape[0],) + tuple(out_sp) + (wk.shape[2],), dtype=xcl.dtype)
    for i, offs in enumerate(_offsets(ksize)):
        y += xcl[_window(offs, out_sp, stride)] @ wk[i]
    return y


def _scatter(gcl, wk, ksize, stride, in_sp):
    """Adjoint of :func:`_gather` in its input: ``(B, *S_out, Co)`` -> ``(B, *S, Ci)``."""
    out_sp = gcl.shape[1:-1]
    x = np.zeros((gcl.shape[0],) + tuple(in_sp) + (wk.shape[1],), dtype=gcl.dtype)
    wt = np.swapaxes(wk, 1, 2)
    for i, offs in enumerate(_offsets(ksize)):
        x[_window(offs, out_sp, stride)] += gcl @ wt[i]
    return x


def _wgrad(xcl, gcl, ksize, stride):
    """Adjoint of :func:`_gather` in its kernel: returns ``(K, Ci, Co)``."""
    out_sp = gcl.shape[1:-1]
    g2 = gcl.reshape(-1, gcl.shape[-1])
    return np.stack([xcl[_window(offs, out_sp, stride)].reshape(-1, xcl.shape[-1]).T @ g2
                     for offs in _offsets(ksize)])


def _channels_last(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(a, 1, -1))


def _channels_first(a: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.moveaxis(a, -1, 1))


def conv(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1) -> Tensor:
    """Valid N-d cross-correlation.  ``weight`` is ``(C_out, C_in, *k)``."""
    nsp = weight.ndim - 2
    if x.ndim != nsp + 2:
        raise ValueError(f"input rank {x.ndim} does not match a {nsp}-d kernel")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"input has {x.shape[1]} channels, kernel expects {weight.shape[1]}")
    ksize = weight.shape[2:]
    if any(k > s for k, s in zip(ksize, x.shape[2:])):
        raise ValueError(f"kernel {ksize} larger than input {x.shape[2:]}")
    cout, cin = weight.shape[:2]
    out_sp = tuple((s - k) // stride + 1 for s, k in zip(x.shape[2:], ksize))
    xcl = _channels_last(x.data)
    wk = np.ascontiguousarray(weight.data.reshape(cout, cin, -1).transpose(2, 1, 0))
    y = _gather(xcl, wk, ksize, stride, out_sp)
    if bias is not None:
        y += bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gcl = _channels_last(g)
        if weight.requires_grad:
            gw = _wgrad(xcl, gcl, ksize, stride)
            weight._accumulate(gw.transpose(2, 1, 0).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(gcl.reshape(-1, cout).sum(axis=0))
        if x.requires_grad:
            x._accumulate(_channels_first(_scatter(gcl, wk, ksize, stride, x.shape[2:])))

    return make_result(_channels_first(y), parents, backward)


conv2d = conv
conv3d = conv


def conv_transpose(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 1) -> Tensor:
    """Transposed valid convolution; ``weight`` is ``(C_in, C_out, *k)``.

    Output spatial size is ``(n - 1) * stride + k`` per axis (adjoint of :func:`conv`).
    """
    nsp = weight.ndim - 2
    if x.ndim != nsp + 2:
        raise ValueError(f"input rank {x.ndim} does not match a {nsp}-d kernel")
    if x.shape[1] != weight.shape[0]:
        raise ValueError(f"input has {x.shape[1]} channels, kernel expects {weight.shape[0]}")
    cin, cout = weight.shape[:2]
    ksize = weight.shape[2:]
    out_sp = tuple((n - 1) * stride + k for n, k in zip(x.shape[2:], ksize))
    xcl = _channels_last(x.data)
    # As a correlation kernel mapping the output back to the input: (K, C_out, C_in).
    wk = np.ascontiguousarray(weight.data.reshape(cin, cout, -1).transpose(2, 1, 0))
    y = _scatter(xcl, wk, ksize, stride, out_sp)
    if bias is not None:
        y += bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gcl = _channels_last(g)
        if weight.requires_grad:
            gw = _wgrad(gcl, xcl, ksize, stride)  # (K, C_out, C_in)
            weight._accumulate(gw.transpose(2, 1, 0).reshape(weight.shape))
        if bias is not None and bias.requires_grad:
            bias._accumulate(gcl.reshape(-1, cout).sum(axis=0))
        if x.requires_grad:
            x._accumulate(_channels_first(_gather(gcl, wk, ksize, stride, x.shape[2:])))

    return make_result(_channels_first(y), parents, backward)


conv_transpose2d = conv_transpose


def pad(x: Tensor, widths, mode: str = "wrap") -> Tensor:
    """``np.pad`` on the trailing axes; ``widths`` lists ``(before, after)`` per trailing axis.

    ``mode`` is ``'wrap'`` (circular) or ``'constant'`` (zeros), or a list with one
    mode per trailing axis.
    """
    widths = [tuple(w) for w in widths]
    lead = x.ndim - len(widths)
    modes = [mode] * len(widths) if isinstance(mode, str) else list(mode)
    data = x.data
    for i, (w, m) in enumerate(zip(widths, modes)):
        if w == (0, 0):
            continue
        spec = [(0, 0)] * x.ndim
        spec[lead + i] = w
        data = np.pad(data, spec, mode=m)
    crop = tuple([slice(None)] * lead + [slice(b, n + b) for (b, _), n in zip(widths, x.shape[lead:])])
    wrap_axes = [lead + i for i, m in enumerate(modes) if m == "wrap" and widths[i] != (0, 0)]

    def backward(g):
        g = g.copy()
        # Fold the wrapped margins back onto the interior, axis by axis.
        for ax in range(lead, x.ndim):
            b, a = widths[ax - lead]
            if (b, a) == (0, 0):
                continue
            n = x.shape[ax]
            if ax in wrap_axes:
                g = _fold_wrap(g, ax, n, b, a)
            else:
                g = np.take(g, range(b, b + n), axis=ax)
        x._accumulate(g)

    return make_result(data, (x,), backward)


def _fold_wrap(g, axis, n, before, after):
    idx = (np.arange(-before, n + after)) % n
    out_shape = list(g.shape)
    out_shape[axis] = n
    out = np.zeros(out_shape, dtype=g.dtype)
    moved = np.moveaxis(g, axis, 0)
    target = np.moveaxis(out, axis, 0)
    np.add.at(target, idx, moved)
    return out


def circular_pad2d(x: Tensor, k: int) -> Tensor:
    return pad(x, [(k, k), (k, k)], "wrap")


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray, running_var: np.ndarray,
               training: bool, momentum: float = 0.1, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over every axis but 1.

    In training mode the batch statistics are used and the running buffers are
    updated in place (unbiased variance, PyTorch convention).
    """
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, x.shape[1]) + (1,) * (x.ndim - 2)
    if training:
        if x.shape[0] < 2:
            raise ValueError("batch norm in training mode needs a batch of at least 2")
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        m = x.data.size // x.shape[1]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * m / max(m - 1, 1)
    else:
        mu, var = running_mean, running_var
    invstd = (1.0 / np.sqrt(var + eps)).astype(x.dtype)
    xhat = (x.data - mu.reshape(bshape).astype(x.dtype)) * invstd.reshape(bshape)
    out = xhat * gamma.data.reshape(bshape) + beta.data.reshape(bshape)

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).sum(axis=axes))
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=axes))
        if x.requires_grad:
            gx_hat = g * gamma.data.reshape(bshape)
            if training:
                m = x.data.size // x.shape[1]
                s1 = gx_hat.sum(axis=axes, keepdims=True)
                s2 = (gx_hat * xhat).sum(axis=axes, keepdims=True)
                gx = (invstd.reshape(bshape) / m) * (m * gx_hat - s1 - xhat * s2)
            else:
                gx = gx_hat * invstd.reshape(bshape)
            x._accumulate(gx)

    return make_result(out, (x, gamma, beta), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis; ``weight`` is ``(out, in)``."""
    lead = x.shape[:-1]
    flat = x.data.reshape(-1, x.shape[-1])
    y = flat @ weight.data.T
    if bias is not None:
        y += bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        gflat = g.reshape(-1, weight.shape[0])
        if weight.requires_grad:
            weight._accumulate(gflat.T @ flat)
        if bias is not None and bias.requires_grad:
            bias._accumulate(gflat.sum(axis=0))
        if x.requires_grad:
            x._accumulate((gflat @ weight.data).reshape(x.shape))

    return make_result(y.reshape(lead + (weight.shape[0],)), parents, backward)


def multi_head_self_attention(x: Tensor, wq, bq, wk, bk, wv, bv, wo, bo, heads: int) -> Tensor:
    """Scaled dot-product self-attention over tokens ``x`` of shape ``(B, N, D)``.

    Per head: ``softmax(Q K^T / sqrt(D/h)) V``; heads are concatenated and passed
    through the output projection.  No positional information is added.  A key
    bias only shifts every score of a query by the same amount, so it cancels in
    the softmax; pass ``bk=None`` to leave it out.
    """
    b, n, dm = x.shape
    if dm % heads:
        raise ValueError(f"model dim {dm} not divisible by {heads} heads")
    dh = dm // heads

    def split(t):
        return transpose(reshape(t, (b, n, heads, dh)), (0, 2, 1, 3))

    q = split(linear(x, wq, bq))
    k = split(linear(x, wk, bk))
    v = split(linear(x, wv, bv))
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * np.asarray(1.0 / math.sqrt(dh), dtype=x.dtype)
    attn = softmax(scores, axis=-1)
    ctx = reshape(transpose(matmul(attn, v), (0, 2, 1, 3)), (b, n, dm))
    return linear(ctx, wo, bo)


def global_avg_pool(x: Tensor) -> Tensor:
    """Average every axis after the channel axis: ``(B, C, ...)`` -> ``(B, C)``."""
    axes = tuple(range(2, x.ndim))
    return x.mean(axis=axes)


# -- losses ------------------------------------------------------------------------
def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean cross-entropy; class axis 1, ``labels`` has the logits' shape minus that axis."""
    labels = np.asarray(labels).astype(np.int64)
    ncls = logits.shape[1]
    if labels.shape != logits.shape[:1] + logits.shape[2:]:
        raise ValueError(f"labels shape {labels.shape} does not fit logits {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= ncls):
        raise ValueError(f"labels must lie in [0, {ncls})")
    z = np.moveaxis(logits.data, 1, -1).reshape(-1, ncls)
    lab = labels.reshape(-1)
    zmax = z.max(axis=1, keepdims=True)
    e = np.exp(z - zmax)
    s = e.sum(axis=1, keepdims=True)
    lse = (np.log(s) + zmax)[:, 0]
    loss = (lse - z[np.arange(len(lab)), lab]).mean()

    def backward(g):
        p = e / s
        p[np.arange(len(lab)), lab] -= 1.0
        p *= g / len(lab)
        moved_shape = (logits.shape[0],) + logits.shape[2:] + (ncls,)
        logits._accumulate(np.moveaxis(p.reshape(moved_shape), -1, 1))

    return make_result(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def sigmoid_bce(logits: Tensor, targets) -> Tensor:
    """Mean binary cross-entropy with logits (numerically stable form)."""
    t = np.asarray(targets, dtype=logits.dtype)
    if t.shape != logits.shape:
        raise ValueError(f"targets shape {t.shape} does not match logits {logits.shape}")
    if t.size and (t.min() < 0 or t.max() > 1):
        raise ValueError("binary targets must lie in [0, 1]")
    z = logits.data
    loss = (np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))).mean()

    def backward(g):
        sig = 0.5 * (1.0 + np.tanh(0.5 * z))
        logits._accumulate((sig - t) * (g / z.size))

    return make_result(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


__all__ = [
    "conv", "conv2d", "conv3d", "conv_transpose", "conv_transpose2d", "pad", "circular_pad2d",
    "batch_norm", "linear", "multi_head_self_attention", "global_avg_pool",
    "softmax_cross_entropy", "sigmoid_bce", "as_tensor",
]
