"""The five neural authentication architectures.

Each network maps a (batch, 200, 6) gesture tensor to a (batch, 1) acceptance
probability. A network is split into a ``stem`` (the time-reducing
convolutional stage, empty for MLP and GRU) and a ``body`` (everything after),
so the stem's output length can be inspected directly.

Realised sizes, all ReLU unless noted; "head" is dense 32 -> dense 16 -> 1
with a sigmoid output:

=========== ===============================================================
MLP         flatten(1200) -> 54 -> head                          67,159
ConvNet     5 x [conv k5/k5/k3/k3/k3 -> pool], channels 16..64,
            flatten(7 x 64) -> 96 -> head                        65,465
GRU         3 stacked GRU(64), last state -> head                65,793
SimpleMix   5 x [conv k3 -> pool] to 7 steps -> 3 x GRU(48)
            -> head                                              64,073
ComplexMix  4 x [conv k3 | k5 | k7 (16 ch each) -> concat
            -> 1x1 conv to 32 -> pool] to 13 steps
            -> 3 x GRU(48) -> head                               72,657
=========== ===============================================================
"""

from dataclasses import dataclass

import numpy as np

from ..diffcore import (
    GRU, Concat, Conv1d, Dense, Flatten, MaxPool1d, Module, ReLU, Sequential, Sigmoid,
    build_layer,
)

ARCH_NAMES = ("MLP", "ConvNet", "GRU", "SimpleMix", "ComplexMix")
PARAM_BUDGET = (60_000, 80_000)
N_STEPS, N_CHANNELS = 200, 6


class ArchitectureError(ValueError):
    pass


@dataclass(frozen=True)
class ArchSpec:
    name: str
    seed: int = 0
    param_budget: tuple = PARAM_BUDGET

    def __post_init__(self):
        if self.name not in ARCH_NAMES:
            raise ArchitectureError(f"unknown architecture {self.name!r}; choose from {ARCH_NAMES}")


class AuthNet(Module):
    kind = "authnet"

    def __init__(self, name, stem, body):
        self.name = name
        self.stem = stem
        self.body = body

    def forward(self, x):
        return self.body(self.stem(x))

    def to_spec(self):
        return {"kind": self.kind, "name": self.name, "stem": self.stem.to_spec(), "body": self.body.to_spec()}

    @classmethod
    def from_spec(cls, spec, rng=None):
        rng = rng or np.random.default_rng(0)
        return cls(spec["name"], build_layer(spec["stem"], rng), build_layer(spec["body"], rng))


def head(n_in, rng):
    return [Dense(n_in, 32, rng), ReLU(), Dense(32, 16, rng), ReLU(), Dense(16, 1, rng), Sigmoid()]


def gru_stack(n_in, hidden, depth, rng):
    layers = []
    for i in range(depth):
        layers.append(GRU(n_in if i == 0 else hidden, hidden, rng, return_sequences=i < depth - 1))
    return layers


def conv_pool_stack(channels, kernels, rng, c_in=N_CHANNELS):
    layers = []
    for c_out, k in zip(channels, kernels):
        layers += [Conv1d(c_in, c_out, k, rng), ReLU(), MaxPool1d()]
        c_in = c_out
    return layers


def inception_block(c_in, branch_channels, c_out, rng, kernels=(3, 5, 7)):
    branches = [Sequential([Conv1d(c_in, branch_channels, k, rng), ReLU()]) for k in kernels]
    return Sequential([
        Concat(branches),
        Conv1d(branch_channels * len(kernels), c_out, 1, rng),
        ReLU(),
        MaxPool1d(),
    ])


def complexmix_stem(rng, n_blocks=4, branch_channels=16, width=32):
    blocks, c_in = [], N_CHANNELS
    for _ in range(n_blocks):
        blocks.append(inception_block(c_in, branch_channels, width, rng))
        c_in = width
    return Sequential(blocks)


def _build(name, rng):
    if name == "MLP":
        stem = Sequential([])
        body = [Flatten(), Dense(N_STEPS * N_CHANNELS, 54, rng), ReLU()] + head(54, rng)
    elif name == "ConvNet":
        stem = Sequential(conv_pool_stack((16, 24, 32, 48, 64), (5, 5, 3, 3, 3), rng))
        body = [Flatten(), Dense(7 * 64, 96, rng), ReLU()] + head(96, rng)
    elif name == "GRU":
        stem = Sequential([])
        body = gru_stack(N_CHANNELS, 64, 3, rng) + head(64, rng)
    elif name == "SimpleMix":
        stem = Sequential(conv_pool_stack((16, 24, 32, 48, 64), (3, 3, 3, 3, 3), rng))
        body = gru_stack(64, 48, 3, rng) + head(48, rng)
    else:
        stem = complexmix_stem(rng)
        body = gru_stack(32, 48, 3, rng) + head(48, rng)
    return AuthNet(name, stem, Sequential(body))


def build_architecture(spec):
    """Instantiate ``spec`` and verify its trainable parameter count."""
    if isinstance(spec, str):
        spec = ArchSpec(spec)
    model = _build(spec.name, np.random.default_rng(spec.seed))
    n = model.n_params()
    lo, hi = spec.param_budget
    if not lo <= n <= hi:
        raise ArchitectureError(f"{spec.name}: {n} parameters outside budget [{lo}, {hi}]")
    return model
