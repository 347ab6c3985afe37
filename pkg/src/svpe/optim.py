"""Decoupled-weight-decay Adam and a reduce-on-plateau schedule."""
from __future__ import annotations

import math

import torch


class AdamW(torch.optim.Optimizer):
    """Adam with decoupled weight decay.

    Per step: ``p *= 1 - lr * wd`` then the bias-corrected Adam update
    ``p -= lr * m_hat / (sqrt(v_hat) + eps)``.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-2):
        if lr < 0:
            raise ValueError(f"invalid learning rate {lr}")
        if not (0.0 <= betas[0] < 1.0 and 0.0 <= betas[1] < 1.0):
            raise ValueError(f"invalid betas {betas}")
        super().__init__(params, dict(lr=lr, betas=betas, eps=eps, weight_decay=weight_decay))

    @torch.no_grad()
    def step(self, closure=None):
        loss = None
        if closure is not None:
            with torch.enable_grad():
                loss = closure()
        for group in self.param_groups:
            lr = group["lr"]
            b1, b2 = group["betas"]
            eps = group["eps"]
            wd = group["weight_decay"]
            for p in group["params"]:
                if p.grad is None:
                    continue
                state = self.state[p]
                if not state:
                    state["step"] = 0
                    state["m"] = torch.zeros_like(p)
                    state["v"] = torch.zeros_like(p)
                state["step"] += 1
                t = state["step"]
                m, v = state["m"], state["v"]
                g = p.grad
                if wd:
                    p.mul_(1.0 - lr * wd)
                m.mul_(b1).add_(g, alpha=1.0 - b1)
                v.mul_(b2).addcmul_(g, g, value=1.0 - b2)
                bc1 = 1.0 - b1**t
                bc2 = 1.0 - b2**t
                denom = (v / bc2).sqrt_().add_(eps)
                p.addcdiv_(m, denom, value=-lr / bc1)
        return loss


class ReduceLROnPlateau:
    """Multiply every group's lr by ``factor`` once the monitored value has
    failed to improve for more than ``patience`` consecutive epochs.

    Improvement means ``value < best * (1 - threshold)``.
    """

    def __init__(self, optimizer, patience=20, factor=0.8, threshold=1e-4, min_lr=0.0):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must be in (0, 1)")
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.threshold = threshold
        self.min_lr = min_lr
        self.best = math.inf
        self.num_bad_epochs = 0
        self.reductions = 0

    def step(self, value: float) -> bool:
        """Record one epoch; returns True when the learning rates were reduced."""
        value = float(value)
        if value < self.best * (1.0 - self.threshold):
            self.best = value
            self.num_bad_epochs = 0
        else:
            self.num_bad_epochs += 1
        if self.num_bad_epochs > self.patience:
            for g in self.optimizer.param_groups:
                g["lr"] = max(g["lr"] * self.factor, self.min_lr)
            self.num_bad_epochs = 0
            self.reductions += 1
            return True
        return False

    def state_dict(self):
        return {k: getattr(self, k) for k in ("best", "num_bad_epochs", "reductions")}
