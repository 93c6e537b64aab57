"""Minibatch training for the low- and high-level models."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..autodiff.functional import sigmoid_bce, softmax_cross_entropy
from ..autodiff.optim import AdamW, StepLR
from ..autodiff.tensor import Tensor, no_grad
from ..errors import TrainingDiverged
from ..mapping import AUGMENT_PROBABILITY, augment_batch
from ..noise import SHUFFLE_STREAM, rng_stream
from ..sunet import LOW, save_model
from .dataset import Dataset


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    lr: float = 0.01
    weight_decay: float = 1e-4
    milestones: tuple = (30, 40)
    gamma: float = 0.1
    augment: bool = True
    augment_probability: float = AUGMENT_PROBABILITY
    seed: int = 0
    checkpoint_dir: str | None = None
    keep_checkpoints: str = "all"  # "all" or "last"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 2:
            raise ValueError("need epochs >= 1 and batch_size >= 2 (batch norm)")
        if self.keep_checkpoints not in ("all", "last"):
            raise ValueError("keep_checkpoints must be 'all' or 'last'")


@dataclass
class TrainResult:
    model: object
    losses: list = field(default_factory=list)  # mean train loss per epoch
    val_losses: list = field(default_factory=list)
    checkpoints: list = field(default_factory=list)


def model_loss(model, syndromes, recoveries, logicals) -> Tensor:
    """Cross-entropy per site for low-level models, BCE per logical bit for high-level ones."""
    x = Tensor(np.asarray(syndromes, dtype=np.float32))
    if model.config.kind == LOW:
        return softmax_cross_entropy(model(x), recoveries)
    return sigmoid_bce(model(x, recoveries), logicals)


def evaluate_loss(model, ds: Dataset, batch_size: int = 256) -> float:
    """Eval-mode mean loss over a dataset (no augmentation, no graph)."""
    was = model.training
    model.eval()
    total = 0.0
    try:
        with no_grad():
            for i in range(0, len(ds), batch_size):
                sl = slice(i, i + batch_size)
                loss = model_loss(model, ds.syndromes[sl], ds.recoveries[sl], ds.logicals[sl])
                total += float(loss.data) * len(ds.syndromes[sl])
    finally:
        model.train(was)
    return total / len(ds)


def _check_kind(model, ds):
    if ds.d != model.config.d:
        raise ValueError(f"dataset d={ds.d} does not match model d={model.config.d}")
    if ds.kind != model.config.kind:
        raise ValueError(f"{ds.kind}-level dataset cannot train a {model.config.kind}-level model")


def train(model, ds: Dataset, cfg: TrainConfig, val: Dataset | None = None, log=None) -> TrainResult:
    """Adam with decoupled weight decay and step decay, random toroidal shifts per sample.

    Raises :class:`TrainingDiverged` on a non-finite loss.  ``log`` receives one
    dict per epoch.
    """
    _check_kind(model, ds)
    if val is not None:
        _check_kind(model, val)
    opt = AdamW(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)
    sched = StepLR(opt, cfg.milestones, cfg.gamma)
    result = TrainResult(model)
    n = len(ds)
    model.train()
    for epoch in range(cfg.epochs):
        lr = sched.set_epoch(epoch)
        order = rng_stream(cfg.seed, epoch, SHUFFLE_STREAM).permutation(n)
        total, seen = 0.0, 0
        for i in range(0, n, cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            if len(idx) < 2:
                continue  # batch norm needs two samples
            syn, rec = ds.syndromes[idx], ds.recoveries[idx]
            if cfg.augment:
                syn, rec = augment_batch(syn, rec, cfg.seed, idx, epoch, cfg.augment_probability)
            loss = model_loss(model, syn, rec, ds.logicals[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise TrainingDiverged(f"non-finite loss {value} at epoch {epoch} batch {i // cfg.batch_size}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += value * len(idx)
            seen += len(idx)
        result.losses.append(total / max(seen, 1))
        entry = {"epoch": epoch, "lr": lr, "loss": result.losses[-1]}
        if val is not None:
            result.val_losses.append(evaluate_loss(model, val))
            entry["val_loss"] = result.val_losses[-1]
            model.train()
        if cfg.checkpoint_dir:
            result.checkpoints.append(_checkpoint(model, cfg, epoch, result.checkpoints))
        if log is not None:
            log(entry)
    model.eval()
    return result


def _checkpoint(model, cfg: TrainConfig, epoch: int, previous: list) -> str:
    os.makedirs(cfg.checkpoint_dir, exist_ok=True)
    path = os.path.join(cfg.checkpoint_dir, f"{model.config.kind}_epoch{epoch:03d}.tqnn")
    save_model(model, path)
    if cfg.keep_checkpoints == "last":
        for old in previous:
            if os.path.exists(old):
                os.remove(old)
    return path


__all__ = ["TrainConfig", "TrainResult", "train", "model_loss", "evaluate_loss"]
