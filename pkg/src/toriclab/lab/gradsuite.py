"""Finite-difference gradient suite over every differentiable op and both networks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.gradcheck import check_gradients, check_parameter_gradients
from ..autodiff.layers import SelfAttention
from ..autodiff.tensor import Tensor, concat, matmul, relu, sigmoid, softmax
from ..sunet import HighLevelModel, LowLevelModel, ResBlock2d, ResBlock3d, SuNetConfig

TOLERANCE = 1e-4


@dataclass(frozen=True)
class CaseResult:
    name: str
    shapes: int
    max_error: float

    @property
    def passed(self) -> bool:
        return self.max_error < TOLERANCE


def _randn(rng, *shape):
    return rng.standard_normal(shape)


def _op_cases(rng):
    """name -> list of (fn, arrays) over distinct random shapes."""
    R = lambda *s: _randn(rng, *s)  # noqa: E731
    cases = {}

    def sizes(k):
        return [tuple(int(v) for v in rng.integers(2, 5, size=k)) for _ in range(5)]

    cases["add_broadcast"] = [(lambda a, b: a + b, [R(*s), R(1, s[1])]) for s in sizes(2)]
    cases["mul_broadcast"] = [(lambda a, b: a * b, [R(*s), R(s[0], 1)]) for s in sizes(2)]
    cases["matmul"] = [(matmul, [R(s[0], s[1], s[2]), R(s[0], s[2], s[1])]) for s in sizes(3)]
    cases["reshape_transpose"] = [(lambda a: a.transpose(2, 0, 1).reshape(a.shape[2], -1), [R(*s)])
                                  for s in sizes(3)]
    cases["sum_mean"] = [(lambda a: a.sum(axis=1, keepdims=True) * a.mean(axis=0) + a.sum(), [R(*s)])
                         for s in sizes(2)]
    cases["relu"] = [(relu, [R(*s)]) for s in sizes(3)]
    cases["sigmoid"] = [(sigmoid, [R(*s)]) for s in sizes(3)]
    cases["softmax"] = [(lambda a: softmax(a, axis=-1), [R(*s)]) for s in sizes(3)]
    cases["concat"] = [(lambda a, b: concat([a, b], axis=1), [R(*s), R(s[0], 1, s[2])]) for s in sizes(3)]

    conv2 = []
    for _ in range(5):
        b, ci, co = rng.integers(1, 4, size=3)
        k = int(rng.choice([1, 3]))
        n = int(rng.integers(k, k + 4))
        conv2.append((lambda x, w, bb: F.conv(x, w, bb), [R(b, ci, n, n + 1), R(co, ci, k, k), R(co)]))
    cases["conv2d"] = conv2
    conv3 = []
    for _ in range(5):
        b, ci, co = rng.integers(1, 3, size=3)
        n = int(rng.integers(3, 5))
        conv3.append((lambda x, w, bb: F.conv(x, w, bb), [R(b, ci, 3, n, n), R(co, ci, 3, 3, 3), R(co)]))
    cases["conv3d"] = conv3
    convt = []
    for _ in range(5):
        b, ci, co = rng.integers(1, 4, size=3)
        n = int(rng.integers(1, 4))
        convt.append((lambda x, w, bb: F.conv_transpose(x, w, bb), [R(b, ci, n, n), R(ci, co, 3, 3), R(co)]))
    cases["conv_transpose2d"] = convt
    cases["circular_pad"] = [(lambda x: F.pad(x, [(2, 2), (2, 2)], "wrap"), [R(s[0], s[1], s[2], s[2])])
                             for s in sizes(3)]
    cases["mixed_pad_3d"] = [(lambda x: F.pad(x, [(1, 1)] * 3, ["constant", "wrap", "wrap"]),
                              [R(s[0], s[1], 2, s[2], s[2])]) for s in sizes(3)]

    def bn_train(x, g, b):
        c = x.shape[1]
        return F.batch_norm(x, g, b, np.zeros(c), np.ones(c), True)

    def bn_eval(x, g, b):
        c = x.shape[1]
        return F.batch_norm(x, g, b, np.full(c, 0.3), np.full(c, 1.7), False)

    bn_shapes = [(int(rng.integers(2, 5)), int(rng.integers(1, 4)), int(rng.integers(2, 4)),
                  int(rng.integers(2, 4))) for _ in range(5)]
    cases["batch_norm_train"] = [(bn_train, [R(*s), R(s[1]), R(s[1])]) for s in bn_shapes]
    cases["batch_norm_eval"] = [(bn_eval, [R(*s), R(s[1]), R(s[1])]) for s in bn_shapes]
    cases["linear"] = [(lambda x, w, b: F.linear(x, w, b), [R(s[0], s[1], s[2]), R(s[0] + 1, s[2]), R(s[0] + 1)])
                       for s in sizes(3)]

    def mhsa(x, wq, bq, wk, wv, bv, wo, bo):
        return F.multi_head_self_attention(x, wq, bq, wk, None, wv, bv, wo, bo, heads=2)

    att = []
    for _ in range(5):
        b, n = (int(v) for v in rng.integers(1, 4, size=2))
        dm = 2 * int(rng.integers(1, 4))
        att.append((mhsa, [R(b, n, dm), R(dm, dm), R(dm), R(dm, dm), R(dm, dm), R(dm), R(dm, dm), R(dm)]))
    cases["multi_head_self_attention"] = att
    cases["global_avg_pool"] = [(F.global_avg_pool, [R(*s, 3)]) for s in sizes(3)]

    ce = []
    for _ in range(5):
        b, n = (int(v) for v in rng.integers(1, 4, size=2))
        labels = rng.integers(0, 4, size=(b, 2, n))
        ce.append((lambda z, lab=labels: F.softmax_cross_entropy(z, lab), [R(b, 4, 2, n)]))
    cases["softmax_cross_entropy"] = ce
    bce = []
    for _ in range(5):
        b = int(rng.integers(1, 5))
        t = rng.integers(0, 2, size=(b, 4))
        bce.append((lambda z, tt=t: F.sigmoid_bce(z, tt), [R(b, 4)]))
    cases["sigmoid_bce"] = bce
    return cases


def _module_case(make, x_shape, rng, max_coords=None):
    """Check input and parameter gradients of a float64 module in train mode."""
    mod = make()
    x = Tensor(rng.standard_normal(x_shape), requires_grad=True)
    out = mod(x)
    cot = rng.standard_normal(out.shape)

    def f():
        return (mod(x) * Tensor(cot)).sum()

    params = [x] + mod.parameters()
    return max(check_parameter_gradients(f, params, max_coords=max_coords, rng=rng))


def _tiny(d, kind):
    return SuNetConfig(d=d, down_channels=(4, 8), heads=2, kind=kind, fusion_channels=4, fusion_blocks=1)


def _network_case(kind, d, batch, rng, max_coords):
    cfg = _tiny(d, kind)
    model = (LowLevelModel if kind == "low" else HighLevelModel)(cfg, seed=int(rng.integers(1 << 31)),
                                                                 dtype=np.float64)
    syn = Tensor((rng.random((batch, 2, d, d)) < 0.3).astype(np.float64))
    if kind == "low":
        out_shape = (batch, 4, 2, d, d)
        cot = rng.standard_normal(out_shape)

        def f():
            return (model(syn) * Tensor(cot)).sum()
    else:
        rec = Tensor(rng.integers(0, 2, size=(batch, 4, d, d)).astype(np.float64))
        cot = rng.standard_normal((batch, 4))

        def f():
            return (model(syn, rec) * Tensor(cot)).sum()

    return max(check_parameter_gradients(f, model.parameters(), max_coords=max_coords, rng=rng))


def run_suite(seed: int = 0, shapes: int = 5, networks: bool = True, max_coords: int = 3) -> list[CaseResult]:
    rng = np.random.default_rng(seed)
    results = []
    for name, items in _op_cases(rng).items():
        errs = []
        for fn, arrays in items[:shapes]:
            errs.extend(check_gradients(fn, arrays, seed=int(rng.integers(1 << 31))))
        results.append(CaseResult(name, len(items[:shapes]), max(errs)))

    blocks = {
        "residual_block_2d": lambda s: _module_case(
            lambda: ResBlock2d(s[1], s[1] + 1, rng=rng, dtype=np.float64), (s[0], s[1], s[2], s[2]), rng),
        "residual_block_3d": lambda s: _module_case(
            lambda: ResBlock3d(s[1], rng=rng, dtype=np.float64), (s[0], s[1], 2, s[2], s[2]), rng),
        "attention_block": lambda s: _module_case(
            lambda: SelfAttention(2 * s[1], heads=2, rng=rng, dtype=np.float64), (s[0], 2 * s[1], s[2], s[2]), rng),
    }
    for name, fn in blocks.items():
        errs = []
        for _ in range(shapes):
            s = (int(rng.integers(2, 4)), int(rng.integers(1, 3)), int(rng.integers(2, 4)))
            errs.append(fn(s))
        results.append(CaseResult(name, shapes, max(errs)))
    if networks:
        for kind in ("low", "high"):
            errs = [_network_case(kind, int(rng.choice([3, 5])), int(rng.integers(2, 4)), rng, max_coords)
                    for _ in range(shapes)]
            results.append(CaseResult(f"{kind}_level_network", shapes, max(errs)))
    return results


__all__ = ["TOLERANCE", "CaseResult", "run_suite"]
