"""Two-level decoding: iterative low-level recovery, then a high-level logical correction.

Low-level models map a batch of syndromes ``(B, 2, d, d)`` to logits
``(B, 4, 2, d, d)`` over {I, X, Z, Y}; high-level models map (syndromes,
recoveries) to 4 logits for (X1, X2, Z1, Z2).  Anything with a matching
``predict`` method (or a plain callable) works, which is how the MWPM and
ground-truth oracles below plug in.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .mwpm import mwpm_decode_batch
from .toric import logical_bits, syndrome_of_codes

SUCCESS = "success"
NOT_CLEARED = "syndrome_not_cleared"
LOGICAL_MISMATCH = "logical_mismatch"


class Verdict(str, enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


def _call(model, *arrays):
    fn = getattr(model, "predict", None) or model
    return np.asarray(fn(*arrays))


def _model_d(model):
    cfg = getattr(model, "config", None)
    return getattr(cfg, "d", None)


@dataclass
class DecodeConfig:
    model_high_rate: object
    model_low_rate: object
    high_model: object = None
    n_max: int = 6
    threshold: float = 0.5

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    def check_d(self, d: int):
        for m in (self.model_high_rate, self.model_low_rate, self.high_model):
            md = _model_d(m)
            if md is not None and md != d:
                raise ValueError(f"model built for d={md} cannot decode d={d}")


@dataclass
class DecodeOutcome:
    recovery: np.ndarray
    logical_errors: np.ndarray
    status: str
    iterations: int
    rounds: list = field(default_factory=list)

    @property
    def cleared(self) -> bool:
        return self.status != NOT_CLEARED


@dataclass
class BatchOutcome:
    """Vectorized :class:`DecodeOutcome` for ``N`` samples."""

    recovery: np.ndarray  # (N, 2, d, d)
    logical_errors: np.ndarray  # (N, 4)
    cleared: np.ndarray  # (N,) bool
    iterations: np.ndarray  # (N,) int

    def __len__(self):
        return len(self.cleared)

    def outcome(self, k: int) -> DecodeOutcome:
        status = SUCCESS if self.cleared[k] else NOT_CLEARED
        return DecodeOutcome(self.recovery[k], self.logical_errors[k], status, int(self.iterations[k]))


def argmax_recovery(logits: np.ndarray) -> np.ndarray:
    """Per-site class choice: ``(B, 4, 2, d, d)`` logits -> ``(B, 2, d, d)`` Pauli codes."""
    return np.argmax(logits, axis=1).astype(np.uint8)


def predict_logicals(high_model, syndromes, recoveries, threshold: float = 0.5) -> np.ndarray:
    """Threshold ``sigmoid(logits) > T`` (equivalently ``logit > logit(T)``) into bits."""
    logits = _call(high_model, syndromes, recoveries).reshape(len(syndromes), 4)
    cut = np.log(threshold / (1.0 - threshold))
    return (logits > cut).astype(np.uint8)


def iterative_decode_batch(syndromes, cfg: DecodeConfig, trace: list | None = None) -> BatchOutcome:
    """Run the iterative low-level loop on a batch, then the high-level model.

    Round 1 uses ``model_high_rate``, later rounds ``model_low_rate``.  After each
    round the residual syndrome is recomputed as ``S_origin ^ syndrome(R_acc)``.
    If ``trace`` is a list, ``(active_indices, R_current, R_acc, S_current)`` is
    appended per round.
    """
    s0 = np.asarray(syndromes, dtype=np.uint8)
    if s0.ndim != 4 or s0.shape[1] != 2 or s0.shape[2] != s0.shape[3]:
        raise ValueError(f"expected (N, 2, d, d) syndromes, got {s0.shape}")
    n, d = len(s0), s0.shape[-1]
    cfg.check_d(d)
    acc = np.zeros_like(s0)
    current = s0.copy()
    iterations = np.zeros(n, dtype=np.int64)
    for rnd in range(cfg.n_max):
        active = np.flatnonzero(current.reshape(n, -1).any(axis=1))
        if not len(active):
            break
        model = cfg.model_high_rate if rnd == 0 else cfg.model_low_rate
        r_cur = argmax_recovery(_call(model, current[active]))
        acc[active] ^= r_cur
        current[active] = s0[active] ^ syndrome_of_codes(acc[active])
        iterations[active] += 1
        if trace is not None:
            trace.append((active, r_cur, acc[active].copy(), current[active].copy()))
    cleared = ~current.reshape(n, -1).any(axis=1)
    logicals = np.zeros((n, 4), dtype=np.uint8)
    if cfg.high_model is not None and cleared.any():
        idx = np.flatnonzero(cleared)
        logicals[idx] = predict_logicals(cfg.high_model, s0[idx], acc[idx], cfg.threshold)
    return BatchOutcome(acc, logicals, cleared, iterations)


def iterative_decode(syndrome, cfg: DecodeConfig) -> DecodeOutcome:
    """Single-sample decode; ``rounds`` lists each round's recovery."""
    trace = []
    out = iterative_decode_batch(np.asarray(syndrome)[None], cfg, trace)
    res = out.outcome(0)
    res.rounds = [t[1][0] for t in trace]
    return res


def enhanced_mwpm_batch(syndromes, high_model, threshold: float = 0.5, policy: str = "fail",
                        backend: str | None = None) -> BatchOutcome:
    """MWPM recovery followed by a high-level logical prediction.

    Samples MWPM cannot decode (odd parity under ``policy='fail'``) are marked
    not cleared.
    """
    s0 = np.asarray(syndromes, dtype=np.uint8)
    rec, ok = mwpm_decode_batch(s0, policy=policy, backend=backend)
    cleared = ok & ~(s0 ^ syndrome_of_codes(rec)).reshape(len(s0), -1).any(axis=1)
    logicals = np.zeros((len(s0), 4), dtype=np.uint8)
    if high_model is not None and cleared.any():
        idx = np.flatnonzero(cleared)
        logicals[idx] = predict_logicals(high_model, s0[idx], rec[idx], threshold)
    return BatchOutcome(rec, logicals, cleared, cleared.astype(np.int64))


def enhanced_mwpm_decode(syndrome, high_model, threshold: float = 0.5, policy: str = "fail") -> DecodeOutcome:
    return enhanced_mwpm_batch(np.asarray(syndrome)[None], high_model, threshold, policy).outcome(0)


def adjudicate_batch(errors, recoveries, predicted, cleared=None) -> np.ndarray:
    """Boolean success per sample.

    Success needs ``error * recovery`` to have zero syndrome and a logical class
    equal to the prediction.  ``cleared=False`` forces failure.
    """
    net = np.bitwise_xor(np.asarray(errors, dtype=np.uint8), np.asarray(recoveries, dtype=np.uint8))
    n = len(net)
    ok = ~syndrome_of_codes(net).reshape(n, -1).any(axis=1)
    ok &= (logical_bits(net) == np.asarray(predicted, dtype=np.uint8).reshape(n, 4)).all(axis=1)
    if cleared is not None:
        ok &= np.asarray(cleared, dtype=bool)
    return ok


def adjudicate(error, outcome: DecodeOutcome) -> Verdict:
    codes = getattr(error, "codes", error)
    ok = adjudicate_batch(np.asarray(codes)[None], outcome.recovery[None], outcome.logical_errors[None],
                          [outcome.cleared])
    return Verdict.SUCCESS if ok[0] else Verdict.FAILURE


def outcome_status(error, outcome: DecodeOutcome) -> str:
    """``success``, ``syndrome_not_cleared`` or ``logical_mismatch`` against the true error."""
    if not outcome.cleared:
        return NOT_CLEARED
    return SUCCESS if adjudicate(error, outcome) is Verdict.SUCCESS else LOGICAL_MISMATCH


# -- labels ---------------------------------------------------------------------------
def label_batch(errors, strict: bool = True, backend: str | None = None):
    """Training labels for noiseless samples.

    The MWPM recovery becomes the label when it decodes correctly (clears the
    syndrome in the trivial logical class) and uses fewer single-qubit operators
    than the error (``<=`` with ``strict=False``); otherwise the error itself is
    the label.  Returns ``(recovery_labels, logical_labels)``.
    """
    errors = np.asarray(errors, dtype=np.uint8)
    n = len(errors)
    syn = syndrome_of_codes(errors)
    rec, ok = mwpm_decode_batch(syn, policy="fail", backend=backend)
    net = errors ^ rec
    ok &= ~syndrome_of_codes(net).reshape(n, -1).any(axis=1)
    ok &= ~logical_bits(net).any(axis=1)
    w_rec = (rec != 0).reshape(n, -1).sum(axis=1)
    w_err = (errors != 0).reshape(n, -1).sum(axis=1)
    lighter = w_rec < w_err if strict else w_rec <= w_err
    use_mwpm = ok & lighter
    labels = np.where(use_mwpm[:, None, None, None], rec, errors)
    return labels, logical_bits(errors ^ labels)


def label_sample(error, strict: bool = True):
    codes = np.asarray(getattr(error, "codes", error))
    labels, logicals = label_batch(codes[None], strict)
    return labels[0], logicals[0]


# -- oracles ----------------------------------------------------------------------------
ORACLE_MARGIN = 20.0


class MwpmOracleLowModel:
    """Low-level stand-in whose argmax is exactly the MWPM recovery."""

    def __init__(self, policy: str = "leave", backend: str | None = None):
        self.policy = policy
        self.backend = backend

    def predict(self, syndromes):
        rec, _ = mwpm_decode_batch(syndromes, policy=self.policy, backend=self.backend)
        return one_hot_logits(rec)


def one_hot_logits(codes, margin: float = ORACLE_MARGIN) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    out = np.zeros((len(codes), 4) + codes.shape[1:], dtype=np.float32)
    np.put_along_axis(out, codes[:, None], margin, axis=1)
    return out


class GroundTruthHighModel:
    """High-level stand-in that reads the true logical class of ``error * recovery``.

    It must be bound to the batch of true errors (and, under measurement noise,
    the syndromes the decoder actually saw); queries are matched back to that
    batch by syndrome.  When several bound errors share a syndrome, the first
    whose ``error * recovery`` has zero syndrome is used.
    """

    def __init__(self, errors=None, syndromes=None):
        self.bind(errors if errors is not None else np.zeros((0, 2, 1, 1), np.uint8), syndromes)

    def bind(self, errors, syndromes=None):
        self.errors = np.asarray(errors, dtype=np.uint8)
        seen = syndrome_of_codes(self.errors) if syndromes is None else np.asarray(syndromes, np.uint8)
        self._by_syndrome = {}
        for k, s in enumerate(seen):
            self._by_syndrome.setdefault(s.tobytes(), []).append(k)
        return self

    def predict(self, syndromes, recoveries):
        out = np.full((len(syndromes), 4), -ORACLE_MARGIN, dtype=np.float32)
        for i, (s, r) in enumerate(zip(np.asarray(syndromes, np.uint8), np.asarray(recoveries, np.uint8))):
            matches = self._by_syndrome.get(s.tobytes(), ())
            nets = [self.errors[k] ^ r for k in matches]
            clean = [net for net in nets if not syndrome_of_codes(net).any()]
            if clean or nets:
                bits = logical_bits((clean or nets)[0])
                out[i] = np.where(bits == 1, ORACLE_MARGIN, -ORACLE_MARGIN)
        return out


__all__ = [
    "SUCCESS", "NOT_CLEARED", "LOGICAL_MISMATCH", "Verdict", "DecodeConfig", "DecodeOutcome",
    "BatchOutcome", "argmax_recovery", "predict_logicals", "iterative_decode", "iterative_decode_batch",
    "enhanced_mwpm_decode", "enhanced_mwpm_batch", "adjudicate", "adjudicate_batch", "outcome_status",
    "label_batch", "label_sample", "MwpmOracleLowModel", "GroundTruthHighModel", "one_hot_logits",
]
