"""Parametrised layers built on the functional ops.

Every layer can describe itself as a plain dict (``to_spec``) and be rebuilt
from one (``build_layer``); checkpoints rely on that round trip.
"""

import numpy as np

from . import functional as F
from .tensor import Tensor, concat, relu, sigmoid, tanh

LAYER_KINDS = (
    "dense", "conv1d", "maxpool1d", "upsample1d", "gru",
    "relu", "sigmoid", "tanh", "concat", "flatten", "sequential",
)


class Module:
    kind = None

    def __call__(self, x):
        return self.forward(x)

    def named_parameters(self, prefix=""):
        for name, value in self.__dict__.items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def n_params(self):
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def to_spec(self):
        return {"kind": self.kind}


def _uniform(rng, limit, shape, name):
    return Tensor(rng.uniform(-limit, limit, size=shape), requires_grad=True, name=name)


class Dense(Module):
    kind = "dense"

    def __init__(self, n_in, n_out, rng):
        if n_in < 1 or n_out < 1:
            raise ValueError("dense: units must be positive")
        self.n_in, self.n_out = n_in, n_out
        self.w = _uniform(rng, np.sqrt(6.0 / n_in), (n_in, n_out), "w")
        self.b = Tensor(np.zeros(n_out), requires_grad=True, name="b")

    def forward(self, x):
        if x.shape[-1] != self.n_in:
            raise ValueError(f"dense({self.n_in}->{self.n_out}): got input {x.shape}")
        return F.dense(x, self.w, self.b)

    def to_spec(self):
        return {"kind": self.kind, "n_in": self.n_in, "n_out": self.n_out}


class Conv1d(Module):
    kind = "conv1d"

    def __init__(self, c_in, c_out, kernel_size, rng, padding="same"):
        if min(c_in, c_out, kernel_size) < 1:
            raise ValueError("conv1d: hyperparameters must be positive")
        if padding not in ("same", "valid"):
            raise ValueError(f"conv1d: padding must be 'same' or 'valid', got {padding!r}")
        self.c_in, self.c_out, self.kernel_size, self.padding = c_in, c_out, kernel_size, padding
        fan_in = c_in * kernel_size
        self.w = _uniform(rng, np.sqrt(6.0 / fan_in), (kernel_size, c_in, c_out), "w")
        self.b = Tensor(np.zeros(c_out), requires_grad=True, name="b")

    def forward(self, x):
        if x.data.ndim != 3 or x.shape[2] != self.c_in:
            raise ValueError(f"conv1d({self.c_in}->{self.c_out}, k={self.kernel_size}): got input {x.shape}")
        return F.conv1d(x, self.w, self.b, self.padding)

    def to_spec(self):
        return {"kind": self.kind, "c_in": self.c_in, "c_out": self.c_out,
                "kernel_size": self.kernel_size, "padding": self.padding}


class GRU(Module):
    """Single GRU layer; returns the full hidden sequence or only the last state."""

    kind = "gru"

    def __init__(self, n_in, hidden, rng, return_sequences=True):
        if n_in < 1 or hidden < 1:
            raise ValueError("gru: sizes must be positive")
        self.n_in, self.hidden, self.return_sequences = n_in, hidden, return_sequences
        lim = 1.0 / np.sqrt(hidden)
        self.w = _uniform(rng, lim, (n_in, 3 * hidden), "w")
        self.u = _uniform(rng, lim, (hidden, 3 * hidden), "u")
        self.b = Tensor(np.zeros(3 * hidden), requires_grad=True, name="b")

    def forward(self, x):
        if x.data.ndim != 3 or x.shape[2] != self.n_in:
            raise ValueError(f"gru({self.n_in}->{self.hidden}): got input {x.shape}")
        hs = F.gru(x, self.w, self.u, self.b)
        if self.return_sequences:
            return hs
        return hs[:, -1, :]

    def to_spec(self):
        return {"kind": self.kind, "n_in": self.n_in, "hidden": self.hidden,
                "return_sequences": self.return_sequences}


class MaxPool1d(Module):
    kind = "maxpool1d"

    def forward(self, x):
        return F.maxpool1d(x)


class Upsample1d(Module):
    kind = "upsample1d"

    def __init__(self, factor=2):
        if factor < 1:
            raise ValueError("upsample1d: factor must be positive")
        self.factor = factor

    def forward(self, x):
        return F.upsample1d(x, self.factor)

    def to_spec(self):
        return {"kind": self.kind, "factor": self.factor}


class ReLU(Module):
    kind = "relu"

    def forward(self, x):
        return relu(x)


class Sigmoid(Module):
    kind = "sigmoid"

    def forward(self, x):
        return sigmoid(x)


class Tanh(Module):
    kind = "tanh"

    def forward(self, x):
        return tanh(x)


class Flatten(Module):
    kind = "flatten"

    def forward(self, x):
        return F.flatten(x)


class Sequential(Module):
    kind = "sequential"

    def __init__(self, layers):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer(x)
        return x

    def to_spec(self):
        return {"kind": self.kind, "layers": [layer.to_spec() for layer in self.layers]}


class Concat(Module):
    """Apply parallel branches to the same input and join along channels."""

    kind = "concat"

    def __init__(self, branches):
        self.branches = list(branches)

    def forward(self, x):
        return concat([branch(x) for branch in self.branches], axis=-1)

    def to_spec(self):
        return {"kind": self.kind, "branches": [b.to_spec() for b in self.branches]}


def build_layer(spec, rng):
    kind = spec["kind"]
    if kind == "dense":
        return Dense(spec["n_in"], spec["n_out"], rng)
    if kind == "conv1d":
        return Conv1d(spec["c_in"], spec["c_out"], spec["kernel_size"], rng, spec.get("padding", "same"))
    if kind == "gru":
        return GRU(spec["n_in"], spec["hidden"], rng, spec.get("return_sequences", True))
    if kind == "maxpool1d":
        return MaxPool1d()
    if kind == "upsample1d":
        return Upsample1d(spec.get("factor", 2))
    if kind == "relu":
        return ReLU()
    if kind == "sigmoid":
        return Sigmoid()
    if kind == "tanh":
        return Tanh()
    if kind == "flatten":
        return Flatten()
    if kind == "sequential":
        return Sequential([build_layer(s, rng) for s in spec["layers"]])
    if kind == "concat":
        return Concat([build_layer(s, rng) for s in spec["branches"]])
    raise ValueError(f"unknown layer kind {kind!r}")
