"""Maxout networks: representation, forward pass, local gain, pattern.

A hidden layer holds ``p * w`` affine channels; each neuron outputs the
maximum of its ``p`` channels.  The network output is an affine map of
the last hidden layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundaryPointError

TIE_TOL = 1e-9


@dataclass(frozen=True)
class MaxoutLayer:
    """One hidden layer: weights (p·w × w_prev), biases (p·w), p channels, w neurons."""

    weights: np.ndarray
    biases: np.ndarray
    channels: int
    neurons: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", np.atleast_2d(np.asarray(self.weights, dtype=float)))
        object.__setattr__(self, "biases", np.asarray(self.biases, dtype=float).reshape(-1))
        if self.channels < 1 or self.neurons < 1:
            raise ValueError("channels and neurons must be >= 1")
        rows = self.channels * self.neurons
        if self.weights.shape[0] != rows or self.biases.size != rows:
            raise ValueError(
                f"layer needs {rows} affine rows, got W {self.weights.shape}, b {self.biases.shape}")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    def preactivations(self, y: np.ndarray) -> np.ndarray:
        return self.weights @ y + self.biases


@dataclass(frozen=True)
class MaxoutNetwork:
    """Hidden maxout layers plus an affine output map."""

    layers: tuple[MaxoutLayer, ...]
    output_weights: np.ndarray
    output_biases: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "output_weights",
                           np.atleast_2d(np.asarray(self.output_weights, dtype=float)))
        object.__setattr__(self, "output_biases",
                           np.asarray(self.output_biases, dtype=float).reshape(-1))
        if not self.layers:
            raise ValueError("network needs at least one hidden layer")
        width = self.layers[0].fan_in
        for i, layer in enumerate(self.layers):
            if layer.fan_in != width:
                raise ValueError(f"layer {i} expects fan-in {layer.fan_in}, got {width}")
            width = layer.neurons
        if self.output_weights.shape[1] != width:
            raise ValueError("output weights do not match last hidden width")
        if self.output_biases.size != self.output_weights.shape[0]:
            raise ValueError("output bias length mismatch")

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.output_weights.shape[0]

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return tuple(layer.neurons for layer in self.layers)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)


@dataclass(frozen=True)
class ActivationPattern:
    """Winning channel per neuron per layer; ``ties`` lists (layer, neuron)
    pairs whose top two channels were within the tie tolerance."""

    winners: tuple[tuple[int, ...], ...]
    ties: tuple[tuple[int, int], ...] = ()

    def delta_matrices(self, net: MaxoutNetwork) -> list[np.ndarray]:
        mats = []
        for layer, win in zip(net.layers, self.winners):
            D = np.zeros((layer.neurons, layer.channels * layer.neurons))
            for s, k in enumerate(win):
                D[s, s * layer.channels + k] = 1.0
            mats.append(D)
        return mats


def _winners_for(z: np.ndarray, layer: MaxoutLayer, collect_ties, layer_idx: int):
    zz = z.reshape(layer.neurons, layer.channels)
    win = np.argmax(zz, axis=1)  # lowest index wins on exact ties
    if collect_ties is not None:
        part = np.sort(zz, axis=1)
        margin = part[:, -1] - part[:, -2] if layer.channels > 1 else np.full(layer.neurons, np.inf)
        for s in np.nonzero(margin <= TIE_TOL)[0]:
            collect_ties.append((layer_idx, int(s)))
    return win, zz


def evaluate(net: MaxoutNetwork, x) -> np.ndarray:
    """Forward pass Φ(x) via the per-neuron channel maximum."""
    y = np.asarray(x, dtype=float).reshape(-1)
    if y.size != net.input_dim:
        raise ValueError(f"expected input of dimension {net.input_dim}, got {y.size}")
    for layer in net.layers:
        z = layer.preactivations(y)
        y = z.reshape(layer.neurons, layer.channels).max(axis=1)
    return net.output_weights @ y + net.output_biases


def activation_pattern(net: MaxoutNetwork, x) -> ActivationPattern:
    """Winning channels at ``x``; ties are flagged, lowest index wins."""
    y = np.asarray(x, dtype=float).reshape(-1)
    if y.size != net.input_dim:
        raise ValueError("dimension mismatch")
    winners = []
    ties: list[tuple[int, int]] = []
    for i, layer in enumerate(net.layers):
        z = layer.preactivations(y)
        win, zz = _winners_for(z, layer, ties, i)
        winners.append(tuple(int(k) for k in win))
        y = zz[np.arange(layer.neurons), win]
    return ActivationPattern(winners=tuple(winners), ties=tuple(ties))


def local_gain(net: MaxoutNetwork, x, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Jacobian ∇Φ(x)ᵀ — the product of winning channel rows.

    Raises :class:`BoundaryPointError` when any neuron's top two channels
    are within ``tie_tol`` (the gradient is undefined on activation
    boundaries).
    """
    y = np.asarray(x, dtype=float).reshape(-1)
    if y.size != net.input_dim:
        raise ValueError("dimension mismatch")
    K = np.eye(net.input_dim)
    for i, layer in enumerate(net.layers):
        z = layer.preactivations(y)
        zz = z.reshape(layer.neurons, layer.channels)
        win = np.argmax(zz, axis=1)
        if layer.channels > 1:
            part = np.sort(zz, axis=1)
            margin = part[:, -1] - part[:, -2]
            if np.any(margin <= tie_tol):
                s = int(np.nonzero(margin <= tie_tol)[0][0])
                raise BoundaryPointError(
                    f"activation tie at layer {i}, neuron {s}: gradient undefined")
        rows = win + np.arange(layer.neurons) * layer.channels
        K = layer.weights[rows] @ K
        y = zz[np.arange(layer.neurons), win]
    return net.output_weights @ K


def param_count(net: MaxoutNetwork) -> int:
    """Number of parameters: Σ (w_{i−1}+1)·p_i·w_i + (w_ℓ+1)·w_{ℓ+1}."""
    total = 0
    for layer in net.layers:
        total += (layer.fan_in + 1) * layer.channels * layer.neurons
    total += (net.layers[-1].neurons + 1) * net.output_dim
    return total


def relu_to_maxout(weights: list, biases: list) -> MaxoutNetwork:
    """Embed a ReLU network as a maxout network with p=2.

    ``weights``/``biases`` list the hidden layers followed by the final
    affine output layer.  Every hidden neuron becomes a two-channel maxout
    neuron whose second channel is identically zero.
    """
    if len(weights) != len(biases) or len(weights) < 2:
        raise ValueError("need at least one hidden layer plus the output layer")
    layers = []
    for W, b in zip(weights[:-1], biases[:-1]):
        W = np.atleast_2d(np.asarray(W, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        if W.shape[0] != b.size:
            raise ValueError("weight/bias row mismatch in ReLU layer")
        w = W.shape[0]
        Wm = np.zeros((2 * w, W.shape[1]))
        bm = np.zeros(2 * w)
        Wm[0::2] = W
        bm[0::2] = b
        layers.append(MaxoutLayer(weights=Wm, biases=bm, channels=2, neurons=w))
    return MaxoutNetwork(layers=tuple(layers),
                         output_weights=weights[-1], output_biases=biases[-1])
