"""AdamW with decoupled weight decay.

Update per step t (per tensor, elementwise):
    m = b1*m + (1-b1)*g          v = b2*v + (1-b2)*g^2
    m^ = m/(1-b1^t)              v^ = v/(1-b2^t)
    theta -= lr * (m^/(sqrt(v^) + eps) + wd*theta)

Decay applies to weight matrices only; rank-1 tensors (biases) are
exempt. This is the one place tensors are mutated in place.
"""

import numpy as np

from .tensor import kernels


class AdamW:
    def __init__(self, named_params, lr=1e-4, weight_decay=1e-5,
                 betas=(0.9, 0.999), eps=1e-8):
        self.params = dict(named_params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        kern = kernels()
        for name, p in self.params.items():
            wd = self.weight_decay if p.data.ndim >= 2 else 0.0
            kern.adamw_update(
                p.data, p.grad, self.m[name], self.v[name],
                self.lr, wd, self.beta1, self.beta2, self.eps, bc1, bc2,
            )

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()
