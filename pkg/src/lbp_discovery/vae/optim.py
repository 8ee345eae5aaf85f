"""Gradient-descent update rules operating on dicts of numpy arrays."""

from __future__ import annotations

import numpy as np


class Optimizer:
    def __init__(self, lr: float):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.state: dict[str, dict[str, np.ndarray]] = {}

    def _slot(self, name, like, *keys):
        s = self.state.setdefault(name, {})
        for k in keys:
            if k not in s:
                s[k] = np.zeros_like(like)
        return s

    def step(self, params: dict, grads: dict) -> None:
        raise NotImplementedError


class Adam(Optimizer):
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for name, g in grads.items():
            s = self._slot(name, g, "m", "v")
            s["m"] = self.beta1 * s["m"] + (1.0 - self.beta1) * g
            s["v"] = self.beta2 * s["v"] + (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (s["m"] / c1) / (np.sqrt(s["v"] / c2) + self.eps)


class RMSprop(Optimizer):
    def __init__(self, lr, alpha=0.99, eps=1e-8):
        super().__init__(lr)
        self.alpha, self.eps = alpha, eps

    def step(self, params, grads):
        for name, g in grads.items():
            s = self._slot(name, g, "v")
            s["v"] = self.alpha * s["v"] + (1.0 - self.alpha) * g * g
            params[name] -= self.lr * g / (np.sqrt(s["v"]) + self.eps)


class Adadelta(Optimizer):
    """Zeiler's rule; ``lr`` scales the computed update as in common frameworks."""

    def __init__(self, lr, rho=0.9, eps=1e-6):
        super().__init__(lr)
        self.rho, self.eps = rho, eps

    def step(self, params, grads):
        for name, g in grads.items():
            s = self._slot(name, g, "sq", "delta")
            s["sq"] = self.rho * s["sq"] + (1.0 - self.rho) * g * g
            update = np.sqrt(s["delta"] + self.eps) / np.sqrt(s["sq"] + self.eps) * g
            s["delta"] = self.rho * s["delta"] + (1.0 - self.rho) * update * update
            params[name] -= self.lr * update


OPTIMIZERS = {"Adam": Adam, "Adadelta": Adadelta, "RMSprop": RMSprop}


def make_optimizer(name: str, lr: float) -> Optimizer:
    try:
        return OPTIMIZERS[name](lr)
    except KeyError:
        raise ValueError(f"unknown optimizer {name!r}; choose from {sorted(OPTIMIZERS)}") from None
