"""Adam with decoupled weight decay and a step learning-rate schedule."""
from __future__ import annotations

import numpy as np


class AdamW:
    def __init__(self, params, lr=0.01, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            if self.weight_decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            p.data -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.data.dtype)


class StepLR:
    """Multiply the learning rate by ``gamma`` at each milestone epoch."""

    def __init__(self, optimizer, milestones=(30, 40), gamma=0.1):
        self.optimizer = optimizer
        self.base_lr = optimizer.lr
        self.milestones = sorted(milestones)
        self.gamma = gamma

    def lr_at(self, epoch: int) -> float:
        k = sum(1 for m in self.milestones if epoch >= m)
        return self.base_lr * self.gamma ** k

    def set_epoch(self, epoch: int):
        self.optimizer.lr = self.lr_at(epoch)
        return self.optimizer.lr


__all__ = ["AdamW", "StepLR"]
