"""Fixed-topology multilayer perceptron with hand-written reverse mode.

Everything is float64. Weights are stored as (fan_in, fan_out) so a batch
``x`` of shape (N, fan_in) maps to ``x @ W + b``.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .enums import ConfigError

ACTIVATIONS = ("identity", "tanh")
MAGIC = b"SARMLP"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, truncated or incompatible parameter file."""


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray | None = None

    def arrays(self) -> list[np.ndarray]:
        return [g for pair in zip(self.weights, self.biases) for g in pair]


class Mlp:
    def __init__(self, layer_sizes, output_activation: str = "identity", rng: np.random.Generator | None = None):
        layer_sizes = [int(n) for n in layer_sizes]
        if len(layer_sizes) < 2:
            raise ConfigError("an MLP needs at least an input and an output size")
        if any(n <= 0 for n in layer_sizes):
            raise ConfigError(f"layer sizes must be positive, got {layer_sizes}")
        if output_activation not in ACTIVATIONS:
            raise ConfigError(f"output activation must be one of {ACTIVATIONS}, got {output_activation!r}")
        self.layer_sizes = layer_sizes
        self.output_activation = output_activation
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    def parameters(self) -> list[np.ndarray]:
        """Flat list W0, b0, W1, b1, ... (live references)."""
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "Mlp":
        twin = Mlp.__new__(Mlp)
        twin.layer_sizes = list(self.layer_sizes)
        twin.output_activation = self.output_activation
        twin.weights = [w.copy() for w in self.weights]
        twin.biases = [b.copy() for b in self.biases]
        return twin

    def same_architecture(self, other: "Mlp") -> bool:
        return self.layer_sizes == other.layer_sizes and self.output_activation == other.output_activation

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.layer_sizes[0]:
            raise ValueError(f"input has {x.shape[-1]} features, network expects {self.layer_sizes[0]}")
        return x

    def forward(self, x) -> np.ndarray:
        x = self._check_input(x)
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return np.tanh(h) if self.output_activation == "tanh" else h

    __call__ = forward

    def forward_cached(self, x) -> tuple[np.ndarray, list[np.ndarray]]:
        """Forward pass keeping each layer's input for ``backward``."""
        x = self._check_input(x)
        inputs = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
                inputs.append(h)
        out = np.tanh(h) if self.output_activation == "tanh" else h
        return out, inputs

    def backward(self, x, output_grad, cache=None, need_input_grad: bool = True) -> Gradients:
        """Gradients of sum(output_grad * forward(x)) w.r.t. parameters and input.

        Batched inputs accumulate (sum) parameter gradients over the batch.
        """
        out, inputs = cache if cache is not None else self.forward_cached(x)
        g = np.asarray(output_grad, dtype=float)
        if g.shape != out.shape:
            raise ValueError(f"output_grad shape {g.shape} does not match output shape {out.shape}")
        if self.output_activation == "tanh":
            g = g * (1.0 - out * out)
        n_layers = len(self.weights)
        gw: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
        gb: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
        for i in range(n_layers - 1, -1, -1):
            a = inputs[i]
            if a.ndim == 1:
                gw[i] = np.outer(a, g)
                gb[i] = g.copy()
            else:
                gw[i] = a.T @ g
                gb[i] = g.sum(axis=0)
            if i > 0 or need_input_grad:
                g = g @ self.weights[i].T
                if i > 0:
                    g = g * (inputs[i] > 0)
        return Gradients(gw, gb, g if need_input_grad else None)

    # -- serialization -------------------------------------------------

    def to_bytes(self) -> bytes:
        header = json.dumps({"layer_sizes": self.layer_sizes, "output_activation": self.output_activation,
                             "n_params": self.n_params}, sort_keys=True).encode()
        payload = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in self.parameters())
        return MAGIC + struct.pack("<II", FORMAT_VERSION, len(header)) + header + payload

    @classmethod
    def from_bytes(cls, data: bytes, expect_sizes=None, expect_activation: str | None = None) -> "Mlp":
        prefix = len(MAGIC) + 8
        if len(data) < prefix or not data.startswith(MAGIC):
            raise CheckpointError("not an MLP parameter file")
        version, header_len = struct.unpack("<II", data[len(MAGIC):prefix])
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported MLP format version {version}")
        try:
            header = json.loads(data[prefix:prefix + header_len])
        except ValueError as exc:
            raise CheckpointError(f"corrupt MLP header: {exc}") from None
        sizes, act = header["layer_sizes"], header["output_activation"]
        if expect_sizes is not None and list(expect_sizes) != sizes:
            raise CheckpointError(f"architecture mismatch: file has {sizes}, expected {list(expect_sizes)}")
        if expect_activation is not None and expect_activation != act:
            raise CheckpointError(f"activation mismatch: file has {act}, expected {expect_activation}")
        body = data[prefix + header_len:]
        if len(body) != 8 * header["n_params"]:
            raise CheckpointError(f"parameter block has {len(body)} bytes, expected {8 * header['n_params']} (truncated?)")
        net = cls(sizes, act)
        flat = np.frombuffer(body, dtype="<f8")
        offset = 0
        for p in net.parameters():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size
        return net

    def save(self, path) -> None:
        atomic_write(path, self.to_bytes())

    @classmethod
    def load(cls, path, expect_sizes=None, expect_activation: str | None = None) -> "Mlp":
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise CheckpointError(f"cannot read {path}: {exc}") from None
        try:
            return cls.from_bytes(data, expect_sizes, expect_activation)
        except CheckpointError as exc:
            raise CheckpointError(f"{path}: {exc}") from None


def atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, **kwargs) -> "AdamState":
        params = net.parameters()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kwargs)


def adam_step(net: Mlp, grads: Gradients, state: AdamState, lr: float) -> None:
    """In-place bias-corrected Adam update. Non-finite gradients are rejected."""
    grad_arrays = grads.arrays()
    params = net.parameters()
    if len(grad_arrays) != len(params) or any(g.shape != p.shape for g, p in zip(grad_arrays, params)):
        raise ValueError("gradient shapes do not match network parameters")
    if not all(np.all(np.isfinite(g)) for g in grad_arrays):
        raise FloatingPointError("non-finite gradient; update rejected")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grad_arrays, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if lr:
            p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def polyak_update(target: Mlp, source: Mlp, tau: float) -> None:
    if not target.same_architecture(source):
        raise ValueError("polyak_update needs identical architectures")
    for t, s in zip(target.parameters(), source.parameters()):
        t[...] = (1.0 - tau) * t + tau * s
