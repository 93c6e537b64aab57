"""SU-Net decoder networks.

An SU-Net is a small U-Net on the ``d x d`` torus whose stages are a residual
block (circular padding, two 3x3 convs) followed by a self-attention block.
Downsampling uses unpadded 3x3 convs, upsampling transposed 3x3 convs, and
skips are concatenated.  The final feature map is lifted to a ``(F, 2, d, d)``
volume, one slice per sublattice, and fused by 3-D residual and attention
blocks before a 1x1x1 output projection.

Every weight depends only on channel counts, never on ``d``, so a model trained
at one distance loads into a model for another (:func:`transfer_weights`).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import functional as F
from .autodiff.layers import BatchNorm, Conv, ConvTranspose2d, Module, ModuleList, SelfAttention
from .autodiff.serialize import dumps, loads, save_state
from .autodiff.tensor import Tensor, as_tensor, concat, no_grad, relu
from .errors import FormatError, IncompatibleModel

LOW = "low"
HIGH = "high"


def default_channels(d: int) -> list[int]:
    return [32, 64] if d <= 5 else [16, 32, 64]


@dataclass(frozen=True)
class SuNetConfig:
    """Shape of one decoder model.

    ``kind`` is ``"low"`` (syndrome -> per-site 4-class logits) or ``"high"``
    (syndrome + recovery -> 4 logical logits).  ``fusion_channels`` and
    ``fusion_blocks`` size the 3-D stage.
    """

    d: int
    down_channels: tuple = ()
    heads: int = 4
    kernel: int = 3
    kind: str = LOW
    fusion_channels: int = 32
    fusion_blocks: int = 2
    down_stride: int = 1
    attention: bool = True

    def __post_init__(self):
        chans = tuple(int(c) for c in (self.down_channels or default_channels(self.d)))
        object.__setattr__(self, "down_channels", chans)
        if self.kind not in (LOW, HIGH):
            raise ValueError(f"kind must be {LOW!r} or {HIGH!r}")
        if self.d < 3:
            raise ValueError("d must be at least 3")
        if not chans or min(chans) < 1:
            raise ValueError("down_channels must be a non-empty list of positive ints")
        if self.kernel % 2 == 0 or self.kernel < 1:
            raise ValueError("kernel must be odd")
        if self.down_stride not in (1, 2):
            raise ValueError("down_stride must be 1 or 2")
        for c in chans + (self.fusion_channels,):
            if self.attention and c % self.heads:
                raise ValueError(f"{c} channels not divisible by {self.heads} heads")
        self.stage_sizes()

    def stage_sizes(self) -> list[int]:
        """Spatial size at each U-Net stage; raises if a stage would vanish or not invert."""
        sizes = [self.d]
        for _ in self.down_channels[1:]:
            n = (sizes[-1] - 3) // self.down_stride + 1
            if sizes[-1] < 3 or n < 1:
                raise ValueError(f"d={self.d} too small for {len(self.down_channels)} stages")
            if (n - 1) * self.down_stride + 3 != sizes[-1]:
                raise ValueError(f"stride {self.down_stride} does not invert at size {sizes[-1]}")
            sizes.append(n)
        return sizes

    @property
    def out_channels(self) -> int:
        return 4 if self.kind == LOW else 1

    def with_d(self, d: int) -> "SuNetConfig":
        return replace(self, d=d)

    def to_dict(self) -> dict:
        return {"d": self.d, "down_channels": list(self.down_channels), "heads": self.heads,
                "kernel": self.kernel, "kind": self.kind, "fusion_channels": self.fusion_channels,
                "fusion_blocks": self.fusion_blocks, "down_stride": self.down_stride,
                "attention": self.attention}


# -- blocks -----------------------------------------------------------------------
class ResBlock2d(Module):
    """circular pad -> conv -> BN -> ReLU -> conv -> BN, plus skip, then ReLU; size preserved."""

    def __init__(self, cin, cout, k=3, rng=None, dtype=np.float32):
        super().__init__()
        self.pad = k - 1
        self.conv1 = Conv(cin, cout, k, bias=False, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm(cout, dtype=dtype)
        self.conv2 = Conv(cout, cout, k, bias=False, rng=rng, dtype=dtype)
        self.bn2 = BatchNorm(cout, dtype=dtype)
        self.skip = Conv(cin, cout, 1, bias=False, rng=rng, dtype=dtype) if cin != cout else None

    def forward(self, x):
        h = F.pad(x, [(self.pad, self.pad)] * 2, "wrap")
        h = relu(self.bn1(self.conv1(h)))
        h = self.bn2(self.conv2(h))
        return relu(h + (self.skip(x) if self.skip is not None else x))


class ResBlock3d(Module):
    """3-D residual block on ``(B, C, 2, d, d)``.

    Each conv is padded to keep its size: zeros on the 2-deep sublattice axis,
    circular on the two lattice axes.
    """

    def __init__(self, c, k=3, rng=None, dtype=np.float32):
        super().__init__()
        self.pad = k // 2
        self.conv1 = Conv(c, c, k, ndim=3, bias=False, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm(c, dtype=dtype)
        self.conv2 = Conv(c, c, k, ndim=3, bias=False, rng=rng, dtype=dtype)
        self.bn2 = BatchNorm(c, dtype=dtype)

    def forward(self, x):
        widths, modes = [(self.pad, self.pad)] * 3, ["constant", "wrap", "wrap"]
        h = relu(self.bn1(self.conv1(F.pad(x, widths, modes))))
        h = self.bn2(self.conv2(F.pad(h, widths, modes)))
        return relu(h + x)


class Stage(Module):
    """Residual block followed by an attention block (``heads=0`` drops the attention)."""

    def __init__(self, cin, cout, k, heads, rng=None, dtype=np.float32, dims=2):
        super().__init__()
        if dims == 2:
            self.res = ResBlock2d(cin, cout, k, rng=rng, dtype=dtype)
        else:
            self.res = ResBlock3d(cout, k, rng=rng, dtype=dtype)
        self.attn = SelfAttention(cout, heads, rng=rng, dtype=dtype) if heads else None

    def forward(self, x):
        h = self.res(x)
        return self.attn(h) if self.attn is not None else h


class Down(Module):
    def __init__(self, cin, cout, k, heads, stride, rng=None, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.conv = Conv(cin, cout, 3, bias=False, rng=rng, dtype=dtype)
        self.bn = BatchNorm(cout, dtype=dtype)
        self.stage = Stage(cout, cout, k, heads, rng=rng, dtype=dtype)

    def forward(self, x):
        h = relu(self.bn(F.conv(x, self.conv.weight, None, self.stride)))
        return self.stage(h)


class Up(Module):
    def __init__(self, cin, cout, k, heads, stride, rng=None, dtype=np.float32):
        super().__init__()
        self.stride = stride
        self.up = ConvTranspose2d(cin, cout, 3, rng=rng, dtype=dtype)
        self.stage = Stage(2 * cout, cout, k, heads, rng=rng, dtype=dtype)

    def forward(self, x, skip):
        h = F.conv_transpose(x, self.up.weight, self.up.bias, self.stride)
        return self.stage(concat([h, skip], axis=1))


class SuNet(Module):
    """``(B, C_in, d, d)`` -> ``(B, C_out, 2, d, d)``."""

    def __init__(self, cin, cout, cfg: SuNetConfig, rng=None, dtype=np.float32):
        super().__init__()
        ch = cfg.down_channels
        k, h = cfg.kernel, (cfg.heads if cfg.attention else 0)
        self.fusion_channels = cfg.fusion_channels
        self.stem = Stage(cin, ch[0], k, h, rng=rng, dtype=dtype)
        self.down = ModuleList(Down(a, b, k, h, cfg.down_stride, rng=rng, dtype=dtype)
                               for a, b in zip(ch[:-1], ch[1:]))
        self.up = ModuleList(Up(b, a, k, h, cfg.down_stride, rng=rng, dtype=dtype)
                             for a, b in reversed(list(zip(ch[:-1], ch[1:]))))
        self.lift = Conv(ch[0], 2 * cfg.fusion_channels, 1, rng=rng, dtype=dtype)
        self.fuse = ModuleList(Stage(cfg.fusion_channels, cfg.fusion_channels, k, h, rng=rng,
                                     dtype=dtype, dims=3)
                               for _ in range(cfg.fusion_blocks))
        self.out = Conv(cfg.fusion_channels, cout, 1, ndim=3, rng=rng, dtype=dtype)

    def forward(self, x):
        skips = []
        h = self.stem(x)
        for block in self.down:
            skips.append(h)
            h = block(h)
        for block in self.up:
            h = block(h, skips.pop())
        b, _, n, m = h.shape
        vol = self.lift(h).reshape(b, self.fusion_channels, 2, n, m)
        for block in self.fuse:
            vol = block(vol)
        return self.out(vol)


# -- decoders -----------------------------------------------------------------------
def _check_input(x, d, channels, what):
    if x.ndim != 4 or x.shape[1:] != (channels, d, d):
        raise ValueError(f"{what} shape {x.shape[1:]} does not match (channels={channels}, d={d})")


def recovery_channels(recovery: np.ndarray) -> np.ndarray:
    """``(B, 2, d, d)`` Pauli codes -> ``(B, 4, d, d)`` bits: X part, then Z part, per sublattice."""
    r = np.asarray(recovery, dtype=np.uint8)
    return np.concatenate([r & 1, (r >> 1) & 1], axis=1).astype(np.float32)


class LowLevelModel(Module):
    """Syndrome ``(B, 2, d, d)`` -> logits ``(B, 4, 2, d, d)`` over {I, X, Z, Y} per qubit."""

    def __init__(self, cfg: SuNetConfig, rng=None, seed: int | None = None, dtype=np.float32):
        super().__init__()
        if cfg.kind != LOW:
            cfg = replace(cfg, kind=LOW)
        rng = rng if rng is not None else np.random.default_rng(seed)
        object.__setattr__(self, "config", cfg)
        self.low = SuNet(2, 4, cfg, rng=rng, dtype=dtype)

    def forward(self, syndrome):
        x = as_tensor(syndrome, np.float32) if not isinstance(syndrome, Tensor) else syndrome
        _check_input(x, self.config.d, 2, "syndrome")
        return self.low(x)

    def predict(self, syndromes) -> np.ndarray:
        """Eval-mode logits for a numpy batch, without building a graph."""
        return _predict(self, syndromes)


class HighLevelModel(Module):
    """(syndrome, recovery) -> 4 logits for the logical classes X1, X2, Z1, Z2."""

    def __init__(self, cfg: SuNetConfig, rng=None, seed: int | None = None, dtype=np.float32):
        super().__init__()
        if cfg.kind != HIGH:
            cfg = replace(cfg, kind=HIGH)
        rng = rng if rng is not None else np.random.default_rng(seed)
        object.__setattr__(self, "config", cfg)
        self.front_syndrome = SuNet(2, 1, cfg, rng=rng, dtype=dtype)
        self.front_recovery = SuNet(4, 1, cfg, rng=rng, dtype=dtype)
        self.combine = Conv(2, 1, 1, ndim=3, rng=rng, dtype=dtype)
        self.back = SuNet(2, 4, cfg, rng=rng, dtype=dtype)

    def forward(self, syndrome, recovery):
        s = syndrome if isinstance(syndrome, Tensor) else as_tensor(syndrome, np.float32)
        r = recovery if isinstance(recovery, Tensor) else Tensor(recovery_channels(recovery))
        d = self.config.d
        _check_input(s, d, 2, "syndrome")
        _check_input(r, d, 4, "recovery")
        a = self.front_syndrome(s)
        b = self.front_recovery(r)
        merged = self.combine(concat([a, b], axis=1))
        feat = self.back(merged.reshape(s.shape[0], 2, d, d))
        return F.global_avg_pool(feat)

    def predict(self, syndromes, recoveries) -> np.ndarray:
        return _predict(self, syndromes, recoveries)


def _predict(model, *arrays, batch: int = 256) -> np.ndarray:
    was_training = model.training
    model.eval()
    n = len(arrays[0])
    outs = []
    try:
        with no_grad():
            for i in range(0, n, batch):
                # The syndrome goes in as floats; recovery codes are expanded by the model.
                part = [np.asarray(arrays[0][i:i + batch], dtype=np.float32)]
                part += [np.asarray(a[i:i + batch]) for a in arrays[1:]]
                outs.append(model(*part).data)
    finally:
        model.train(was_training)
    return np.concatenate(outs, axis=0) if outs else np.zeros((0,))


def build_model(cfg: SuNetConfig, seed: int | None = None, dtype=np.float32):
    cls = LowLevelModel if cfg.kind == LOW else HighLevelModel
    return cls(cfg, seed=seed, dtype=dtype)


# -- transfer and persistence --------------------------------------------------------
def transfer_weights(source: Module, target_cfg: SuNetConfig, seed: int | None = None):
    """New model for ``target_cfg`` with every parameter and buffer copied from ``source``.

    Raises :class:`IncompatibleModel` listing the offending names if any tensor
    is missing, extra or differently shaped.
    """
    target = build_model(target_cfg, seed=seed)
    src = source.state_dict()
    own = target.state_dict()
    bad = sorted(set(src) ^ set(own))
    bad += [n for n in own if n in src and src[n].shape != own[n].shape]
    if bad:
        raise IncompatibleModel(f"{len(bad)} tensors do not transfer, first: {bad[0]}", bad)
    target.load_state_dict(src)
    return target


_META = "meta."
_META_KEYS = ("d", "heads", "kernel", "fusion_channels", "fusion_blocks", "down_stride", "attention")


def _config_records(cfg: SuNetConfig) -> dict:
    rec = {_META + k: np.array([getattr(cfg, k)], dtype=np.float32) for k in _META_KEYS}
    rec[_META + "kind"] = np.array([0.0 if cfg.kind == LOW else 1.0], dtype=np.float32)
    rec[_META + "down_channels"] = np.array(cfg.down_channels, dtype=np.float32)
    return rec


def _config_from_records(state: dict) -> SuNetConfig:
    try:
        kw = {k: int(state[_META + k][0]) for k in _META_KEYS}
        kw["attention"] = bool(kw["attention"])
        kw["kind"] = LOW if state[_META + "kind"][0] == 0 else HIGH
        kw["down_channels"] = tuple(int(c) for c in state[_META + "down_channels"])
    except KeyError as exc:
        raise FormatError(f"model file lacks config record {exc}") from None
    return SuNetConfig(**kw)


def model_bytes(model) -> bytes:
    state = _config_records(model.config)
    state.update(model.state_dict())
    return dumps(state)


def save_model(model, path):
    state = _config_records(model.config)
    state.update(model.state_dict())
    save_state(path, state)


def load_model(path, config: SuNetConfig | None = None):
    """Rebuild a model from a parameter file.

    With ``config`` given, the stored tensors must match it exactly; the first
    mismatching name is reported in :class:`IncompatibleModel`.
    """
    with open(path, "rb") as fh:
        state = loads(fh.read())
    return model_from_state(state, config)


def model_from_state(state: dict, config: SuNetConfig | None = None):
    stored = _config_from_records(state)
    cfg = config or stored
    weights = {k: v for k, v in state.items() if not k.startswith(_META)}
    model = build_model(cfg, seed=0)
    own = model.state_dict()
    bad = [n for n in own if n not in weights or weights[n].shape != own[n].shape]
    bad += [n for n in weights if n not in own]
    if bad:
        raise IncompatibleModel(f"model file does not fit config, first mismatch: {bad[0]}", bad)
    model.load_state_dict(weights)
    return model


def parameter_count(cfg: SuNetConfig) -> int:
    return build_model(cfg, seed=0).num_parameters()


__all__ = [
    "LOW", "HIGH", "default_channels", "SuNetConfig", "ResBlock2d", "ResBlock3d", "Stage", "SuNet",
    "LowLevelModel", "HighLevelModel", "recovery_channels", "build_model", "transfer_weights",
    "save_model", "load_model", "model_from_state", "model_bytes", "parameter_count",
]
