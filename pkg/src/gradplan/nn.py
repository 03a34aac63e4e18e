"""Layers and parameter containers on top of the autodiff engine.

Weight matrices are initialized uniformly in +-1/sqrt(fan_in); all
parameters are float64. Modules discover their parameters in attribute
declaration order, which also fixes the on-disk checkpoint layout.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Parameter(Tensor):
    """A tensor that a Module reports as trainable state."""


class Module:
    """Base class providing parameter discovery, freezing, and grad reset."""

    arch_name = "module"

    def named_parameters(self):
        out = []
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                out.append((name, value))
            elif isinstance(value, Module):
                out.extend((f"{name}.{k}", p) for k, p in value.named_parameters())
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.extend(
                            (f"{name}.{i}.{k}", p) for k, p in item.named_parameters()
                        )
                    elif isinstance(item, Parameter):
                        out.append((f"{name}.{i}", item))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def freeze(self):
        """Stop recording gradients for parameters (used while planning)."""
        for p in self.parameters():
            p.requires_grad = False

    def unfreeze(self):
        for p in self.parameters():
            p.requires_grad = True

    @contextmanager
    def frozen(self):
        params = self.parameters()
        prior = [p.requires_grad for p in params]
        self.freeze()
        try:
            yield self
        finally:
            for p, r in zip(params, prior):
                p.requires_grad = r


def uniform_init(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, d_in, d_out, rng):
        self.w = Parameter(uniform_init(rng, d_in, (d_in, d_out)))
        self.b = Parameter(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.linear(x, self.w, self.b)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel, rng):
        fan_in = c_in * kernel * kernel
        self.w = Parameter(uniform_init(rng, fan_in, (c_out, c_in, kernel, kernel)))
        self.b = Parameter(np.zeros(c_out))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.w, self.b)


class PReLU(Module):
    def __init__(self, init_slope=0.25):
        self.slope = Parameter(np.array([init_slope]))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.prelu(x, self.slope)


class MLP(Module):
    """Stack of Linear layers with a shared activation kind between them.

    activation is one of "relu", "prelu", "tanh"; the output layer is left
    linear.
    """

    def __init__(self, dims, rng, activation="relu"):
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.activation = activation
        if activation == "prelu":
            self.slopes = [PReLU() for _ in self.layers[:-1]]

    def __call__(self, x: Tensor) -> Tensor:
        last = len(self.layers) - 1
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < last:
                if self.activation == "relu":
                    x = ad.relu(x)
                elif self.activation == "tanh":
                    x = ad.tanh(x)
                elif self.activation == "prelu":
                    x = self.slopes[i](x)
                else:
                    raise ValueError(f"unknown activation {self.activation!r}")
        return x
