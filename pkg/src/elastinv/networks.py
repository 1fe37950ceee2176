"""Coordinate networks: positional encoding, sine MLP, and their pullbacks.

Each network maps normalised (x, y) coordinates to a small vector of field
values. Reverse-mode gradients are hand-derived: every forward pass can
return a *pullback* closure that maps an output cotangent to a
:class:`NetworkParameters` gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit


class NonFiniteError(FloatingPointError):
    """A forward pass or loss produced NaN or Inf."""


@dataclass(frozen=True)
class EncodingConfig:
    f_min: float = 1e-4
    omega: int = 64

    def __post_init__(self):
        if not self.f_min > 0:
            raise ValueError(f"f_min must be positive, got {self.f_min}")
        if self.omega < 1:
            raise ValueError(f"omega must be >= 1, got {self.omega}")

    @property
    def frequencies(self) -> np.ndarray:
        i = np.arange(1, self.omega + 1)
        return self.f_min ** (2.0 * i / self.omega)

    @property
    def size(self) -> int:
        return 4 * self.omega


@dataclass(frozen=True)
class NetworkConfig:
    depth: int = 16
    width: int = 128
    head: str = "linear"
    sine_scale: float = 30.0
    outputs: int = 2

    def __post_init__(self):
        if self.depth < 1 or self.width < 1:
            raise ValueError(f"depth and width must be >= 1, got {self.depth}, {self.width}")
        if self.head not in ("linear", "softplus"):
            raise ValueError(f"head must be 'linear' or 'softplus', got {self.head!r}")
        if not self.sine_scale > 0:
            raise ValueError("sine_scale must be positive")
        if self.outputs < 1:
            raise ValueError("outputs must be >= 1")


@dataclass
class NetworkParameters:
    """Weights ``W[l]`` of shape ``(fan_in, fan_out)`` and biases ``b[l]``;
    the last pair is the output layer."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def tensors(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_tensors(cls, tensors) -> "NetworkParameters":
        tensors = list(tensors)
        return cls(weights=tensors[0::2], biases=tensors[1::2])

    def map(self, fn) -> "NetworkParameters":
        return NetworkParameters([fn(w) for w in self.weights], [fn(b) for b in self.biases])

    def copy(self) -> "NetworkParameters":
        return self.map(np.array)

    def zeros_like(self) -> "NetworkParameters":
        return self.map(np.zeros_like)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.tensors())

    def shapes(self) -> list[tuple[int, ...]]:
        return [a.shape for a in self.tensors()]

    def equals(self, other: "NetworkParameters") -> bool:
        return self.shapes() == other.shapes() and all(
            np.array_equal(a, b) for a, b in zip(self.tensors(), other.tensors())
        )


def init_parameters(cfg: NetworkConfig, n_in: int, rng: np.random.Generator) -> NetworkParameters:
    """Sine-network initialisation.

    First layer weights are ``U(-1/n, 1/n)``; later layers ``U(-sqrt(6/n), sqrt(6/n))``
    with the sine frequency already folded into the weights, and the output layer
    ``U(-sqrt(6/n)/s, sqrt(6/n)/s)``. Biases are ``U(-1/sqrt(n), 1/sqrt(n))``.
    """
    weights, biases = [], []
    fan_in = n_in
    for layer in range(cfg.depth + 1):
        fan_out = cfg.width if layer < cfg.depth else cfg.outputs
        if layer == 0:
            bound = 1.0 / fan_in
        elif layer < cfg.depth:
            bound = np.sqrt(6.0 / fan_in)
        else:
            bound = np.sqrt(6.0 / fan_in) / cfg.sine_scale
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bb = 1.0 / np.sqrt(fan_in)
        biases.append(rng.uniform(-bb, bb, size=fan_out))
        fan_in = fan_out
    return NetworkParameters(weights, biases)


def positional_encode(x, y, cfg: EncodingConfig = EncodingConfig()) -> np.ndarray:
    """Encode one coordinate pair as ``[sin x, cos x, sin y, cos y]`` blocks of length omega."""
    return encode_coordinates(np.array([[x, y]], dtype=np.float64), cfg)[0]


def encode_coordinates(coords: np.ndarray, cfg: EncodingConfig) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    freq = cfg.frequencies
    px = coords[:, :1] * freq
    py = coords[:, 1:2] * freq
    return np.hstack([np.sin(px), np.cos(px), np.sin(py), np.cos(py)])


def _check(arr, layer):
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite activation at layer {layer}")


def forward(params: NetworkParameters, features: np.ndarray, cfg: NetworkConfig) -> np.ndarray:
    out, _ = _forward(params, features, cfg, keep=False)
    return out


def forward_with_pullback(
    params: NetworkParameters, features: np.ndarray, cfg: NetworkConfig
) -> tuple[np.ndarray, Callable[[np.ndarray], NetworkParameters]]:
    out, cache = _forward(params, features, cfg, keep=True)

    def pullback(g_out: np.ndarray) -> NetworkParameters:
        return _backward(params, cache, g_out, cfg)

    return out, pullback


def _forward(params, features, cfg, keep):
    depth = cfg.depth
    if len(params.weights) != depth + 1:
        raise ValueError(f"parameters have {len(params.weights) - 1} hidden layers, config says {depth}")
    a = features
    acts = [a]
    pre = []
    for layer in range(depth):
        z = a @ params.weights[layer] + params.biases[layer]
        if layer == 0:
            z = cfg.sine_scale * z
        a = np.sin(z)
        _check(a, layer)
        if keep:
            pre.append(z)
            acts.append(a)
    y = a @ params.weights[depth] + params.biases[depth]
    _check(y, depth)
    if cfg.head == "softplus":
        out = np.logaddexp(0.0, y)
    else:
        out = y
    return out, ((acts, pre, y) if keep else None)


def _backward(params, cache, g_out, cfg):
    acts, pre, y = cache
    depth = cfg.depth
    g = np.asarray(g_out, dtype=np.float64)
    if cfg.head == "softplus":
        g = g * expit(y)
    gW = [None] * (depth + 1)
    gb = [None] * (depth + 1)
    gW[depth] = acts[depth].T @ g
    gb[depth] = g.sum(axis=0)
    g = g @ params.weights[depth].T
    for layer in range(depth - 1, -1, -1):
        g = g * np.cos(pre[layer])
        if layer == 0:
            g = g * cfg.sine_scale
        gW[layer] = acts[layer].T @ g
        gb[layer] = g.sum(axis=0)
        if layer > 0:
            g = g @ params.weights[layer].T
    return NetworkParameters(gW, gb)


@dataclass(frozen=True)
class CoordinateNet:
    """A network configuration bundled with its input encoding."""

    net: NetworkConfig
    encoding: EncodingConfig = field(default_factory=EncodingConfig)

    def init(self, rng: np.random.Generator) -> NetworkParameters:
        return init_parameters(self.net, self.encoding.size, rng)

    def features(self, coords) -> np.ndarray:
        return encode_coordinates(coords, self.encoding)

    def __call__(self, params, coords) -> np.ndarray:
        return forward(params, self.features(coords), self.net)


def displacement_net(depth=16, width=128, encoding=EncodingConfig(), sine_scale=30.0) -> CoordinateNet:
    return CoordinateNet(NetworkConfig(depth, width, "linear", sine_scale, 2), encoding)


def strain_net(depth=16, width=128, encoding=EncodingConfig(), sine_scale=30.0) -> CoordinateNet:
    return CoordinateNet(NetworkConfig(depth, width, "linear", sine_scale, 3), encoding)


def elasticity_net(depth=16, width=128, encoding=EncodingConfig(), sine_scale=30.0) -> CoordinateNet:
    return CoordinateNet(NetworkConfig(depth, width, "softplus", sine_scale, 2), encoding)


def _forward_checked(coords, params, cfg: CoordinateNet, head, outputs):
    if cfg.net.head != head or cfg.net.outputs != outputs:
        raise ValueError(
            f"expected a {head} head with {outputs} outputs, got {cfg.net.head} with {cfg.net.outputs}"
        )
    return cfg(params, np.atleast_2d(np.asarray(coords, dtype=np.float64)))


def forward_displacement(coords, params, cfg: CoordinateNet) -> np.ndarray:
    """``(N, 2)`` array of ``(ux, uy)``."""
    return _forward_checked(coords, params, cfg, "linear", 2)


def forward_strain(coords, params, cfg: CoordinateNet) -> np.ndarray:
    """``(N, 3)`` array of ``(exx, eyy, gxy)``."""
    return _forward_checked(coords, params, cfg, "linear", 3)


def forward_elasticity(coords, params, cfg: CoordinateNet) -> np.ndarray:
    """``(N, 2)`` array of ``(E, nu)``, strictly positive."""
    return _forward_checked(coords, params, cfg, "softplus", 2)


# gradient plumbing over parameter trees (a NetworkParameters or a dict of them)

def tree_tensors(tree) -> list[np.ndarray]:
    if isinstance(tree, NetworkParameters):
        return tree.tensors()
    if isinstance(tree, dict):
        out = []
        for key in sorted(tree):
            out.extend(tree_tensors(tree[key]))
        return out
    if isinstance(tree, (list, tuple)):
        out = []
        for item in tree:
            out.extend(tree_tensors(item))
        return out
    return [np.asarray(tree)]


def tree_rebuild(template, tensors):
    """Inverse of :func:`tree_tensors` with the structure of ``template``."""
    it = iter(tensors)

    def build(node):
        if isinstance(node, NetworkParameters):
            n = len(node.weights)
            flat = [next(it) for _ in range(2 * n)]
            return NetworkParameters.from_tensors(flat)
        if isinstance(node, dict):
            return {k: build(node[k]) for k in sorted(node)}
        if isinstance(node, (list, tuple)):
            return type(node)(build(v) for v in node)
        return next(it)

    return build(template)


def parameter_gradients(evaluator, params):
    """Reverse-mode gradient of a scalar loss.

    ``evaluator(params)`` returns ``(loss, pullback)`` where ``pullback(1.0)``
    yields a gradient tree congruent to ``params``.
    """
    loss, pullback = evaluator(params)
    loss = float(loss)
    if not np.isfinite(loss):
        raise NonFiniteError(f"loss is not finite: {loss}")
    grads = pullback(1.0)
    want = [a.shape for a in tree_tensors(params)]
    got = [np.shape(a) for a in tree_tensors(grads)]
    if want != got:
        raise ValueError(f"gradient structure {got} is not congruent to parameters {want}")
    return grads
