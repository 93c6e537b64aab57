import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from toriclab.autodiff import (
    AdamW, BatchNorm, Conv, ConvTranspose2d, Linear, Parameter, SelfAttention, StepLR, Tensor, concat,
    no_grad, relu, sigmoid, softmax,
)
from toriclab.autodiff import functional as F
from toriclab.autodiff.gradcheck import check_gradients, relative_error
from toriclab.autodiff.serialize import dumps, load_state, loads, save_state
from toriclab.errors import FormatError

TOL = 1e-4


def _naive_conv(x, w, stride=1):
    """Direct loop cross-correlation over any number of spatial axes."""
    b, cin = x.shape[:2]
    k = w.shape[2:]
    out_sp = tuple((n - kk) // stride + 1 for n, kk in zip(x.shape[2:], k))
    out = np.zeros((b, w.shape[0]) + out_sp)
    for pos in np.ndindex(*out_sp):
        sl = tuple(slice(p * stride, p * stride + kk) for p, kk in zip(pos, k))
        patch = x[(slice(None), slice(None)) + sl]
        out[(slice(None), slice(None)) + pos] = np.tensordot(patch, w, axes=(range(1, x.ndim), range(1, w.ndim)))
    return out


def _naive_conv_transpose(x, w, stride=1):
    b, cin = x.shape[:2]
    k = w.shape[2:]
    out_sp = tuple((n - 1) * stride + kk for n, kk in zip(x.shape[2:], k))
    out = np.zeros((b, w.shape[1]) + out_sp)
    for pos in np.ndindex(*x.shape[2:]):
        sl = tuple(slice(p * stride, p * stride + kk) for p, kk in zip(pos, k))
        v = x[(slice(None), slice(None)) + pos]
        out[(slice(None), slice(None)) + sl] += np.tensordot(v, w, axes=(1, 0))
    return out


# [TRIVIAL]
def test_conv_identity_kernel():
    x = np.random.default_rng(0).standard_normal((2, 3, 4, 5))
    w = np.eye(3).reshape(3, 3, 1, 1)
    assert np.allclose(F.conv(Tensor(x), Tensor(w)).data, x)


def test_conv_all_ones():
    out = F.conv(Tensor(np.ones((1, 1, 5, 5))), Tensor(np.ones((1, 1, 3, 3)))).data
    assert out.shape == (1, 1, 3, 3) and np.all(out == 9)


def test_conv_shape_errors():
    with pytest.raises(ValueError):
        F.conv(Tensor(np.ones((1, 2, 5, 5))), Tensor(np.ones((1, 3, 3, 3))))
    with pytest.raises(ValueError):
        F.conv(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 3, 3))))


# [DERIVED] against direct loops
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.sampled_from([1, 2, 3]),
       st.integers(3, 6), st.sampled_from([1, 2]), st.integers(0, 2**31))
def test_conv2d_matches_loops(b, ci, co, k, n, stride, seed):
    rng = np.random.default_rng(seed)
    x, w = rng.standard_normal((b, ci, n, n + 1)), rng.standard_normal((co, ci, k, k))
    got = F.conv(Tensor(x), Tensor(w), stride=stride).data
    assert np.allclose(got, _naive_conv(x, w, stride))


def test_conv3d_and_transpose_match_loops(rng):
    x, w = rng.standard_normal((2, 2, 3, 4, 4)), rng.standard_normal((3, 2, 3, 3, 3))
    assert np.allclose(F.conv(Tensor(x), Tensor(w)).data, _naive_conv(x, w))
    for stride in (1, 2):
        x2, w2 = rng.standard_normal((2, 3, 3, 2)), rng.standard_normal((3, 4, 3, 3))
        got = F.conv_transpose(Tensor(x2), Tensor(w2), stride=stride).data
        assert np.allclose(got, _naive_conv_transpose(x2, w2, stride))


def test_conv_transpose_is_adjoint_of_conv(rng):
    x = rng.standard_normal((2, 3, 6, 6))
    w = rng.standard_normal((4, 3, 3, 3))
    y = rng.standard_normal((2, 4, 4, 4))
    lhs = (F.conv(Tensor(x), Tensor(w)).data * y).sum()
    # a (Cout, Cin, k, k) conv kernel is a (Cin', Cout', k, k) transposed kernel as is
    rhs = (x * F.conv_transpose(Tensor(y), Tensor(w)).data).sum()
    assert lhs == pytest.approx(rhs)


# [DERIVED] finite differences, one shape per hypothesis example
@given(st.integers(0, 2**31))
def test_conv_gradients(seed):
    rng = np.random.default_rng(seed)
    errs = check_gradients(lambda x, w, b: F.conv(x, w, b, stride=2),
                           [rng.standard_normal((2, 2, 5, 5)), rng.standard_normal((3, 2, 3, 3)),
                            rng.standard_normal(3)], seed=seed)
    assert max(errs) < TOL


def test_elementwise_gradients(rng):
    arrays = [rng.standard_normal((3, 4)), rng.standard_normal((1, 4))]
    assert max(check_gradients(lambda a, b: relu(a * b) + sigmoid(a - b) + softmax(a, axis=0), arrays)) < TOL
    assert max(check_gradients(lambda a, b: concat([a, b], axis=0).mean(axis=1), arrays)) < TOL


def test_pad_wrap_and_gradient(rng):
    x = rng.standard_normal((1, 2, 3, 3))
    out = F.circular_pad2d(Tensor(x), 2).data
    assert np.array_equal(out, np.pad(x, [(0, 0), (0, 0), (2, 2), (2, 2)], mode="wrap"))
    assert max(check_gradients(lambda a: F.pad(a, [(2, 2), (1, 3)], "wrap"), [x])) < TOL
    y = rng.standard_normal((1, 1, 2, 3, 3))
    mixed = F.pad(Tensor(y), [(1, 1), (1, 1), (1, 1)], ["constant", "wrap", "wrap"]).data
    assert np.all(mixed[:, :, 0] == 0) and np.array_equal(mixed[:, :, 1:3, 1:4, 1:4], y)


# -- batch norm
def test_batch_norm_eval_identity(rng):
    x = rng.standard_normal((3, 2, 4, 4))
    out = F.batch_norm(Tensor(x), Tensor(np.ones(2)), Tensor(np.zeros(2)), np.zeros(2), np.ones(2), False)
    assert np.allclose(out.data, x / math.sqrt(1 + 1e-5))


def test_batch_norm_train_statistics(rng):
    bn = BatchNorm(3, dtype=np.float64)
    x = 5 + 3 * rng.standard_normal((8, 3, 4, 4))
    y = bn(Tensor(x)).data
    assert np.allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-5)
    assert np.allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-5)
    # running statistics move 10% of the way toward the batch statistics
    n = 8 * 16
    assert np.allclose(bn.running_mean, 0.1 * x.mean(axis=(0, 2, 3)))
    assert np.allclose(bn.running_var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * n / (n - 1))


def test_batch_norm_rejects_single_sample():
    bn = BatchNorm(2)
    with pytest.raises(ValueError):
        bn(Tensor(np.ones((1, 2, 3, 3))))
    bn.eval()
    assert bn(Tensor(np.ones((1, 2, 3, 3)))).shape == (1, 2, 3, 3)


def test_batch_norm_gradients(rng):
    x = rng.standard_normal((4, 3, 2, 2))
    fn = lambda a, g, b: F.batch_norm(a, g, b, np.zeros(3), np.ones(3), True)  # noqa: E731
    assert max(check_gradients(fn, [x, rng.standard_normal(3), rng.standard_normal(3)])) < TOL


# -- attention
def _attention_inputs(rng, b, n, dm):
    ws = [Tensor(rng.standard_normal((dm, dm))) for _ in range(4)]
    bs = [Tensor(rng.standard_normal(dm)) for _ in range(4)]
    return ws, bs


def test_attention_single_token_is_projected_value(rng):
    ws, bs = _attention_inputs(rng, 1, 1, 4)
    x = rng.standard_normal((2, 1, 4))
    out = F.multi_head_self_attention(Tensor(x), ws[0], bs[0], ws[1], bs[1], ws[2], bs[2], ws[3], bs[3], 2).data
    v = x @ ws[2].data.T + bs[2].data
    assert np.allclose(out, v @ ws[3].data.T + bs[3].data)


@given(st.integers(0, 2**31))
def test_attention_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    ws, bs = _attention_inputs(rng, 2, 5, 6)
    x = rng.standard_normal((2, 5, 6))
    perm = rng.permutation(5)
    f = lambda a: F.multi_head_self_attention(  # noqa: E731
        Tensor(a), ws[0], bs[0], ws[1], None, ws[2], bs[2], ws[3], bs[3], 3).data
    assert np.allclose(f(x)[:, perm], f(x[:, perm]))


def test_attention_matches_reference(rng):
    ws, bs = _attention_inputs(rng, 1, 3, 4)
    x = rng.standard_normal((1, 3, 4))
    got = F.multi_head_self_attention(Tensor(x), ws[0], bs[0], ws[1], bs[1], ws[2], bs[2], ws[3], bs[3], 2).data
    q, k, v = (x[0] @ ws[i].data.T + bs[i].data for i in range(3))
    heads = []
    for h in range(2):
        sl = slice(2 * h, 2 * h + 2)
        s = q[:, sl] @ k[:, sl].T / math.sqrt(2)
        a = np.exp(s - s.max(1, keepdims=True))
        heads.append((a / a.sum(1, keepdims=True)) @ v[:, sl])
    assert np.allclose(got[0], np.concatenate(heads, 1) @ ws[3].data.T + bs[3].data)


def test_attention_divisibility():
    with pytest.raises(ValueError):
        SelfAttention(6, heads=4)
    with pytest.raises(ValueError):
        F.multi_head_self_attention(Tensor(np.ones((1, 2, 6))), *([Tensor(np.eye(6)), None] * 4), heads=4)


def test_attention_gradients(rng):
    ws, bs = _attention_inputs(rng, 2, 3, 4)
    fn = lambda x, wq, wv: F.multi_head_self_attention(  # noqa: E731
        x, wq, bs[0], ws[1], None, wv, bs[2], ws[3], bs[3], 2)
    assert max(check_gradients(fn, [rng.standard_normal((2, 3, 4)), ws[0].data, ws[2].data])) < TOL


# -- losses
def test_uniform_cross_entropy_is_log4():
    loss = F.softmax_cross_entropy(Tensor(np.zeros((3, 4, 2, 5, 5))), np.zeros((3, 2, 5, 5), int))
    assert float(loss.data) == pytest.approx(math.log(4))


def test_confident_losses_vanish():
    labels = np.array([[0, 3], [2, 1]])
    logits = np.full((2, 4, 2), -50.0)
    np.put_along_axis(logits, labels[:, None], 50.0, axis=1)
    assert float(F.softmax_cross_entropy(Tensor(logits), labels).data) < 1e-12
    t = np.array([[1, 0, 0, 1]])
    assert float(F.sigmoid_bce(Tensor(np.where(t, 40.0, -40.0)), t).data) < 1e-12


def test_loss_label_validation():
    with pytest.raises(ValueError):
        F.softmax_cross_entropy(Tensor(np.zeros((1, 4, 2))), np.array([[0, 4]]))
    with pytest.raises(ValueError):
        F.sigmoid_bce(Tensor(np.zeros((1, 4))), np.array([[0, 1, 2, 0]]))


def test_bce_matches_formula(rng):
    z = rng.standard_normal((5, 4))
    t = rng.integers(0, 2, (5, 4))
    p = 1 / (1 + np.exp(-z))
    ref = -(t * np.log(p) + (1 - t) * np.log(1 - p)).mean()
    assert float(F.sigmoid_bce(Tensor(z), t).data) == pytest.approx(ref)
    assert max(check_gradients(lambda a: F.sigmoid_bce(a, t), [z])) < TOL


# -- optimizer
def test_adam_zero_gradient_without_decay_is_still():
    p = Parameter(np.array([1.0, -2.0]))
    opt = AdamW([p], weight_decay=0.0)
    for _ in range(10):
        p.grad = np.zeros(2)
        opt.step()
    assert np.array_equal(p.data, [1.0, -2.0])


def test_adam_decay_shrinks_norm():
    p = Parameter(np.array([1.0, -2.0]))
    opt = AdamW([p], weight_decay=0.1)
    norms = []
    for _ in range(5):
        p.grad = np.zeros(2)
        opt.step()
        norms.append(np.linalg.norm(p.data))
    assert all(b < a for a, b in zip([math.sqrt(5)] + norms, norms))


def test_adam_moves_against_constant_gradient():
    p = Parameter(np.zeros(3))
    opt = AdamW([p], weight_decay=0.0)
    g = np.array([1.0, -0.5, 3.0])
    for _ in range(50):
        p.grad = g.copy()
        opt.step()
    assert np.array_equal(np.sign(p.data), -np.sign(g))


# [DERIVED] closed-form optimum at the origin
def test_adam_minimizes_quadratic():
    p = Parameter(np.array([0.7, -0.4, 1.2]))
    opt = AdamW([p], lr=0.01, weight_decay=0.0)
    scale = np.array([1.0, 3.0, 0.5])
    for _ in range(500):
        loss = (p * p * Tensor(scale)).sum()
        opt.zero_grad()
        loss.backward()
        opt.step()
        if float(loss.data) < 1e-6:
            break
    assert float(((p.data ** 2) * scale).sum()) < 1e-6


def test_step_schedule():
    opt = AdamW([Parameter(np.zeros(1))], lr=0.01)
    sched = StepLR(opt, (30, 40), 0.1)
    assert sched.set_epoch(0) == 0.01
    assert sched.set_epoch(30) == pytest.approx(0.001)
    assert sched.set_epoch(45) == pytest.approx(1e-4)


# -- modules, determinism and files
def test_module_tracks_named_parameters():
    conv = Conv(2, 3, 3, bias=True)
    names = [n for n, _ in conv.named_parameters()]
    assert names == ["weight", "bias"] and not conv.bias.data.any()
    bn = BatchNorm(3)
    assert [n for n, _ in bn.named_buffers()] == ["running_mean", "running_var"]
    assert np.all(bn.weight.data == 1) and np.all(bn.bias.data == 0)
    bound = 1 / math.sqrt(2 * 9)
    assert np.abs(conv.weight.data).max() <= bound


def test_state_dict_round_trip(rng):
    a, b = Linear(3, 2, rng=rng), Linear(3, 2, rng=np.random.default_rng(99))
    b.load_state_dict(a.state_dict())
    assert np.array_equal(a.weight.data, b.weight.data)
    with pytest.raises(KeyError):
        b.load_state_dict({"weight": a.weight.data})
    with pytest.raises(ValueError):
        b.load_state_dict({"weight": np.zeros((4, 4)), "bias": np.zeros(2)})


def test_forward_determinism(rng):
    m = ConvTranspose2d(2, 3, 3, rng=rng)
    x = Tensor(rng.standard_normal((2, 2, 3, 3)).astype(np.float32))
    with no_grad():
        assert np.array_equal(m(x).data, m(x).data)


def test_gradient_accumulates_and_no_grad():
    p = Parameter(np.array([2.0]))
    (p * p).sum().backward()
    (p * p).sum().backward()
    assert np.allclose(p.grad, [8.0])
    with no_grad():
        out = p * p
    assert not out.requires_grad


def test_relative_error_floor():
    assert relative_error(np.zeros(3), np.zeros(3)) == 0.0
    assert relative_error(np.array([1.0]), np.array([1.0 + 1e-9])) < 1e-8


@given(st.dictionaries(st.text(st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=8),
                       st.lists(st.integers(1, 3), min_size=0, max_size=3), max_size=4), st.integers(0, 99))
def test_parameter_file_round_trip(shapes, seed):
    rng = np.random.default_rng(seed)
    state = {k: rng.standard_normal(s).astype(np.float32) for k, s in shapes.items()}
    back = loads(dumps(state))
    assert list(back) == list(state)
    for k in state:
        assert back[k].dtype == np.float32 and back[k].shape == state[k].shape
        assert back[k].tobytes() == state[k].tobytes()


def test_parameter_file_rejects_damage(tmp_path):
    blob = dumps({"w": np.ones((2, 2), np.float32)})
    assert blob[:8] == b"TQNNPARM"
    for bad in (blob[:-1], b"XXXXXXXX" + blob[8:], blob + b"\0", blob[:8] + b"\x09" + blob[9:]):
        with pytest.raises(FormatError):
            loads(bad)
    path = tmp_path / "m.tqnn"
    save_state(path, {"w": np.ones(3, np.float32)})
    assert np.array_equal(load_state(path)["w"], np.ones(3))
