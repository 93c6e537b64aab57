"""Finite-difference gradient checking in float64."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor


def numeric_grad(fn, inputs, index: int, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar ``fn(*inputs)`` w.r.t. ``inputs[index]``."""
    x = inputs[index].data
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        orig = x[i]
        x[i] = orig + eps
        fp = float(np.sum(fn(*inputs).data))
        x[i] = orig - eps
        fm = float(np.sum(fn(*inputs).data))
        x[i] = orig
        g[i] = (fp - fm) / (2 * eps)
    return g


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """``max|a - b| / max(max|a|, max|b|, floor)``; the floor absorbs identically-zero gradients."""
    scale = max(np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0), floor)
    return float(np.abs(a - b).max(initial=0.0) / scale)


def check_gradients(fn, arrays, eps: float = 1e-5, seed: int | None = None) -> list[float]:
    """Compare analytic and numeric gradients of ``fn`` for every input.

    ``fn`` maps tensors to a tensor; non-scalar outputs are contracted with a fixed
    random cotangent so every output element is exercised.  Returns one relative
    error per input.
    """
    inputs = [Tensor(np.array(a, dtype=np.float64), requires_grad=True) for a in arrays]
    probe = fn(*inputs)
    cot = None
    if probe.data.size != 1:
        cot = np.random.default_rng(seed).standard_normal(probe.shape)

    def scalar(*xs):
        out = fn(*xs)
        if cot is None:
            return out
        return (out * Tensor(cot)).sum()

    loss = scalar(*inputs)
    loss.backward()
    errors = []
    for k, t in enumerate(inputs):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        errors.append(relative_error(analytic, numeric_grad(scalar, inputs, k, eps)))
    return errors


def check_parameter_gradients(loss_fn, params, eps: float = 1e-5, max_coords: int | None = None,
                              rng: np.random.Generator | None = None) -> list[float]:
    """Finite-difference check of ``loss_fn()`` w.r.t. tensors it closes over.

    ``params`` are float64 tensors with ``requires_grad``.  With ``max_coords``
    only that many randomly chosen entries per tensor are perturbed, which keeps
    whole-network checks affordable.  Returns one relative error per tensor.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [p.grad.copy() if p.grad is not None else np.zeros_like(p.data) for p in params]
    errors = []
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = rng.choice(flat.size, size=max_coords, replace=False)
        num = np.empty(len(idx))
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(loss_fn().data)
            flat[i] = orig - eps
            fm = float(loss_fn().data)
            flat[i] = orig
            num[j] = (fp - fm) / (2 * eps)
        errors.append(relative_error(a.reshape(-1)[idx], num))
    return errors


__all__ = ["numeric_grad", "relative_error", "check_gradients", "check_parameter_gradients"]
