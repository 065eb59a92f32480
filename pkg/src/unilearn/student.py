"""A trained network as a (non-adaptive) deterministic query method."""
from __future__ import annotations

import numpy as np

from .experiments import AdamParams, train_student
from .recovery import DeterministicMethod, NetworkPredictor


class StudentMethod(DeterministicMethod):
    """Query ``m`` seeded uniform points of [0,1]^d, fit a ReLU network with
    Adam, and predict with it. Inputs are shifted to [-0.5, 0.5]^d before
    they reach the network."""

    name = "student"

    def __init__(self, d, m, width=32, depth=4, batch_size=None, epochs=200, seed=0, adam=None):
        super().__init__(d, m)
        self.arch = [d] + [int(width)] * (int(depth) - 1) + [1]
        self.batch_size = int(batch_size) if batch_size else max(1, m // 5)
        self.epochs = int(epochs)
        self.seed = int(seed)
        self.adam = AdamParams(**adam) if isinstance(adam, dict) else (adam or AdamParams(lr_init=1e-3, lr_final=1e-5))

    def run(self, oracle):
        rng = np.random.default_rng([self.seed, 0])
        X = rng.random((self.budget, self.d))
        Y = oracle.query_many(X)
        net, _ = train_student(self.arch, X - 0.5, Y, min(self.batch_size, self.budget), self.epochs, self.adam, np.random.default_rng([self.seed, 1]))
        return NetworkPredictor(net, shift=0.5)
