"""Minimal module system: named parameters and buffers, train/eval mode, state dicts."""
from __future__ import annotations

import math

import numpy as np

from . import functional as F
from .tensor import Parameter


class Module:
    """Base class.  Attributes that are Parameters, Modules or lists of Modules are tracked."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "_children", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
            value = ModuleList(value)
            self._children[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray):
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p
        for cname, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{cname}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = ""):
        for name in self._buffers:
            yield prefix + name, getattr(self, name)
        for cname, child in self._children.items():
            yield from child.named_buffers(f"{prefix}{cname}.")

    def modules(self):
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode: bool = True):
        for m in self.modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def state_dict(self) -> dict:
        """Flat ``name -> array`` of parameters and buffers (copies)."""
        out = {name: p.data.copy() for name, p in self.named_parameters()}
        out.update({name: np.array(b, copy=True) for name, b in self.named_buffers()})
        return out

    def load_state_dict(self, state: dict, strict: bool = True):
        """Copy arrays in place.  Returns ``(missing, unexpected)`` name lists."""
        own = dict(self.named_parameters())
        bufs = dict(self.named_buffers())
        missing = [n for n in list(own) + list(bufs) if n not in state]
        unexpected = [n for n in state if n not in own and n not in bufs]
        if strict and (missing or unexpected):
            raise KeyError(f"state mismatch: missing={missing} unexpected={unexpected}")
        for name, arr in state.items():
            if name in own:
                tgt = own[name].data
            elif name in bufs:
                tgt = bufs[name]
            else:
                continue
            if tgt.shape != np.shape(arr):
                raise ValueError(f"{name}: shape {np.shape(arr)} != {tgt.shape}")
            tgt[...] = arr
        return missing, unexpected

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        self._items = []
        for m in mods:
            self.append(m)

    def append(self, m: Module):
        self._children[str(len(self._items))] = m
        self._items.append(m)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


def _uniform(rng, shape, fan_in, dtype):
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv(Module):
    """Valid N-d convolution (``ndim`` = 2 or 3); fan-in uniform weights, zero bias."""

    def __init__(self, cin, cout, k, ndim=2, bias=True, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng()
        fan_in = cin * k ** ndim
        self.weight = Parameter(_uniform(rng, (cout, cin) + (k,) * ndim, fan_in, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x):
        return F.conv(x, self.weight, self.bias)


class ConvTranspose2d(Module):
    def __init__(self, cin, cout, k, bias=True, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng()
        fan_in = cout * k * k
        self.weight = Parameter(_uniform(rng, (cin, cout, k, k), fan_in, dtype))
        self.bias = Parameter(np.zeros(cout, dtype=dtype)) if bias else None

    def forward(self, x):
        return F.conv_transpose(x, self.weight, self.bias)


class BatchNorm(Module):
    """Batch normalization over channel axis 1 (any rank)."""

    def __init__(self, c, momentum=0.1, eps=1e-5, dtype=np.float32):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.weight = Parameter(np.ones(c, dtype=dtype))
        self.bias = Parameter(np.zeros(c, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(c, dtype=dtype))
        self.register_buffer("running_var", np.ones(c, dtype=dtype))

    def forward(self, x):
        return F.batch_norm(x, self.weight, self.bias, self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class Linear(Module):
    def __init__(self, din, dout, bias=True, rng=None, dtype=np.float32):
        super().__init__()
        rng = rng or np.random.default_rng()
        self.weight = Parameter(_uniform(rng, (dout, din), din, dtype))
        self.bias = Parameter(np.zeros(dout, dtype=dtype)) if bias else None

    def forward(self, x):
        return F.linear(x, self.weight, self.bias)


class SelfAttention(Module):
    """Multi-head self-attention over the spatial positions of a ``(B, C, *S)`` map.

    Each position is a token with ``C`` features.  The result is added back to
    the input (residual), so the block starts close to the identity.
    """

    def __init__(self, c, heads=4, rng=None, dtype=np.float32):
        super().__init__()
        if c % heads:
            raise ValueError(f"{c} channels not divisible by {heads} attention heads")
        self.heads = heads
        self.q = Linear(c, c, rng=rng, dtype=dtype)
        self.k = Linear(c, c, bias=False, rng=rng, dtype=dtype)
        self.v = Linear(c, c, rng=rng, dtype=dtype)
        self.o = Linear(c, c, rng=rng, dtype=dtype)

    def forward(self, x):
        b, c = x.shape[:2]
        sp = x.shape[2:]
        n = int(np.prod(sp))
        tokens = x.reshape(b, c, n).transpose(0, 2, 1)
        y = F.multi_head_self_attention(tokens, self.q.weight, self.q.bias, self.k.weight, None,
                                        self.v.weight, self.v.bias, self.o.weight, self.o.bias,
                                        self.heads)
        return x + y.transpose(0, 2, 1).reshape((b, c) + sp)


__all__ = ["Module", "ModuleList", "Conv", "ConvTranspose2d", "BatchNorm", "Linear", "SelfAttention"]
