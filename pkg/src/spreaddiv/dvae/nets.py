"""Dense networks on the tape."""

import math

import numpy as np

from ..autodiff import Tensor
from ..errors import ValidationError
from ..numerics import make_rng

ACTIVATIONS = ("tanh", "relu", "softplus")


class Mlp:
    """Fully connected network; the activation sits between layers only.

    ``sizes=(3, 2)`` is a single affine map, ``(3, 16, 16, 2)`` has two
    hidden layers.  Weights are stored input-major, so ``forward`` computes
    ``h @ W + b`` on row-batched inputs.
    """

    def __init__(self, sizes, activation="tanh", rng=0, weights=None):
        if len(sizes) < 2:
            raise ValidationError("an MLP needs at least input and output sizes")
        if activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        if weights is None:
            rng = make_rng(rng)
            weights = []
            for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
                W = rng.standard_normal((fan_in, fan_out)) / math.sqrt(fan_in)
                weights.append((W, np.zeros(fan_out)))
        if len(weights) != len(self.sizes) - 1:
            raise ValidationError("weight list does not match layer sizes")
        self.layers = []
        for (W, b), fan_in, fan_out in zip(weights, self.sizes[:-1], self.sizes[1:]):
            W = np.asarray(W, dtype=float).reshape(fan_in, fan_out)
            b = np.asarray(b, dtype=float).reshape(fan_out)
            self.layers.append((Tensor(W, requires_grad=True), Tensor(b, requires_grad=True)))

    @property
    def params(self):
        return [p for layer in self.layers for p in layer]

    def named_params(self, prefix):
        for i, (W, b) in enumerate(self.layers):
            yield f"{prefix}.{i}.W", W
            yield f"{prefix}.{i}.b", b

    def _act(self, h):
        if self.activation == "tanh":
            return h.tanh()
        if self.activation == "relu":
            return h.relu()
        return h.softplus()

    def __call__(self, x):
        h = x if isinstance(x, Tensor) else Tensor(x)
        last = len(self.layers) - 1
        for i, (W, b) in enumerate(self.layers):
            h = h @ W + b
            if i < last:
                h = self._act(h)
        return h

    def copy(self):
        return Mlp(self.sizes, self.activation,
                   weights=[(W.value.copy(), b.value.copy()) for W, b in self.layers])
