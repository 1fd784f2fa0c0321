"""Adam with bias correction."""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        """Apply one update in place from the accumulated grads, then clear them."""
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                g = np.zeros_like(p.value)
            else:
                g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value = p.value - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            p.grad = None

    def zero_grad(self):
        for p in self.params:
            p.grad = None


def adam_step(params, state: Adam | None = None, lr: float = 1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> Adam:
    """Functional wrapper: create the optimizer state on first use and step it."""
    if state is None:
        state = Adam(params, lr=lr, betas=(beta1, beta2), eps=eps)
    state.step()
    return state
