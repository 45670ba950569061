"""Feed-forward networks: activations, losses, forward and backward passes.

Weights of a layer map ``s_in`` units to ``s_out`` units and are stored as
an ``s_out x s_in`` matrix with a separate bias vector, so a layer computes
``g(a @ W.T + b)`` on a batch ``a`` holding one example per row.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .exceptions import ParameterError, ShapeError, UnsupportedCombinationError
from .linalg import dot

ACTIVATIONS = ("sigmoid", "softmax", "relu", "softplus", "linear")
LOSSES = ("squared_error", "cross_entropy")
CE_CLIP = 1e-12


@dataclass
class LayerParams:
    weights: np.ndarray
    bias: np.ndarray

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def copy(self) -> "LayerParams":
        return LayerParams(self.weights.copy(), self.bias.copy())


@dataclass
class NetworkParams:
    layers: List[LayerParams]
    hidden_activation: str = "sigmoid"
    output_activation: str = "softmax"

    def __post_init__(self):
        if not self.layers:
            raise ParameterError("a network needs at least one layer")
        for kind in (self.hidden_activation, self.output_activation):
            if kind not in ACTIVATIONS:
                raise ParameterError(f"unknown activation {kind!r}")
        if self.hidden_activation == "softmax":
            raise ParameterError("softmax is only allowed on the output layer")
        for i, (lo, hi) in enumerate(zip(self.layers, self.layers[1:])):
            if lo.n_out != hi.n_in:
                raise ShapeError(
                    f"layer {i} outputs {lo.n_out} units but layer {i + 1} expects {hi.n_in}"
                )

    @property
    def sizes(self) -> List[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    def activation_of(self, index: int) -> str:
        """Activation used by layer ``index`` (0-based)."""
        return self.output_activation if index == len(self.layers) - 1 else self.hidden_activation

    def parameters(self) -> List[np.ndarray]:
        """Weight and bias arrays in a fixed order; mutating them mutates the net."""
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    def copy(self) -> "NetworkParams":
        return NetworkParams([l.copy() for l in self.layers], self.hidden_activation, self.output_activation)


@dataclass
class RegularizerSpec:
    l2_lambda: float = 0.0
    l1_lambda: float = 0.0

    def __post_init__(self):
        if self.l2_lambda < 0 or self.l1_lambda < 0:
            raise ParameterError("regularization weights must be non-negative")


@dataclass
class DropoutSpec:
    retain_input: float = 1.0
    retain_hidden: float = 1.0

    def __post_init__(self):
        for name in ("retain_input", "retain_hidden"):
            p = getattr(self, name)
            if not 0.0 < p <= 1.0:
                raise ParameterError(f"{name} must lie in (0, 1], got {p}")


def grads_as_list(grads: Sequence[LayerParams]) -> List[np.ndarray]:
    out = []
    for g in grads:
        out.extend((g.weights, g.bias))
    return out


# activations

def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def activate(kind: str, z) -> np.ndarray:
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "softmax":
        return softmax(np.atleast_2d(z))
    z = np.asarray(z, dtype=np.float64)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "softplus":
        return np.logaddexp(0.0, z)
    if kind == "linear":
        return z.copy()
    raise ParameterError(f"unknown activation {kind!r}")


def activate_derivative(kind: str, a) -> np.ndarray:
    """Derivative g'(z) expressed through the activation output ``a = g(z)``."""
    a = np.asarray(a, dtype=np.float64)
    if kind == "sigmoid":
        return a * (1.0 - a)
    if kind == "relu":
        return (a > 0).astype(np.float64)
    if kind == "softplus":
        # sigma(z) = 1 - exp(-softplus(z))
        return -np.expm1(-a)
    if kind == "linear":
        return np.ones_like(a)
    if kind == "softmax":
        raise UnsupportedCombinationError("softmax has no elementwise derivative; pair it with cross_entropy")
    raise ParameterError(f"unknown activation {kind!r}")


# forward pass

def _check_input(net: NetworkParams, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.layers[0].n_in:
        raise ShapeError(f"input has shape {X.shape}, network expects {net.layers[0].n_in} columns")
    return X


def layer_forward(a: np.ndarray, layer: LayerParams, kind: str) -> np.ndarray:
    return activate(kind, dot(a, layer.weights.T) + layer.bias)


def _dropout_mask(shape, retain: float, rng: np.random.Generator) -> Optional[np.ndarray]:
    if retain >= 1.0:
        return None
    return (rng.random(shape) < retain) / retain


def forward_with_masks(net, X, dropout=None, rng=None):
    """Forward pass returning ``(activations, masks)``.

    ``activations[0]`` is the (possibly dropped) input. ``masks[l]`` is the
    inverted-dropout scale applied to ``activations[l]``, or None.
    """
    acts, _, masks = _forward_full(net, X, dropout, rng)
    return acts, masks


def _forward_full(net, X, dropout, rng):
    X = _check_input(net, X)
    n_layers = len(net.layers)
    masks: List[Optional[np.ndarray]] = [None] * (n_layers + 1)
    if dropout is not None and (dropout.retain_input < 1.0 or dropout.retain_hidden < 1.0):
        if rng is None:
            raise ParameterError("dropout needs a random generator")
        masks[0] = _dropout_mask(X.shape, dropout.retain_input, rng)
    a = X if masks[0] is None else X * masks[0]
    acts = [a]
    clean = [X]
    for i, layer in enumerate(net.layers):
        a = layer_forward(a, layer, net.activation_of(i))
        clean.append(a)
        if dropout is not None and i < n_layers - 1:
            masks[i + 1] = _dropout_mask(a.shape, dropout.retain_hidden, rng)
            if masks[i + 1] is not None:
                a = a * masks[i + 1]
        acts.append(a)
    return acts, clean, masks


def forward(net: NetworkParams, X, dropout: Optional[DropoutSpec] = None,
            rng: Optional[np.random.Generator] = None) -> List[np.ndarray]:
    """Activations of every layer, input included."""
    return forward_with_masks(net, X, dropout, rng)[0]


def predict_output(net: NetworkParams, X) -> np.ndarray:
    return forward(net, X)[-1]


# loss

def regularization_penalty(net: Optional[NetworkParams], reg: Optional[RegularizerSpec]) -> float:
    if net is None or reg is None:
        return 0.0
    total = 0.0
    for layer in net.layers:
        if reg.l2_lambda:
            total += reg.l2_lambda * float(np.sum(layer.weights ** 2))
        if reg.l1_lambda:
            total += reg.l1_lambda * float(np.sum(np.abs(layer.weights)))
    return total


def data_loss(kind: str, pred, target, categorical: bool = False) -> float:
    """Batch-averaged data term.

    ``squared_error`` is the per-example sum of squared differences.
    ``cross_entropy`` is the per-example Bernoulli cross-entropy summed over
    outputs, or ``-sum(y log p)`` when ``categorical`` (softmax outputs).
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction shape {pred.shape} != target shape {target.shape}")
    if pred.ndim < 2:
        # a 1-D input holds one output per example
        pred = pred.reshape(-1, 1)
        target = target.reshape(-1, 1)
    m = pred.shape[0]
    if kind == "squared_error":
        return float(np.sum((target - pred) ** 2)) / m
    if kind == "cross_entropy":
        p = np.clip(pred, CE_CLIP, 1.0 - CE_CLIP)
        if categorical:
            return float(-np.sum(target * np.log(p))) / m
        return float(-np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p))) / m
    raise ParameterError(f"unknown loss {kind!r}")


def loss(kind: str, pred, target, reg: Optional[RegularizerSpec] = None,
         net: Optional[NetworkParams] = None) -> float:
    """Data loss plus L2/L1 weight penalties (biases excluded).

    Cross-entropy switches to its categorical form when ``net`` has a
    softmax output layer.
    """
    categorical = net is not None and net.output_activation == "softmax"
    value = data_loss(kind, pred, target, categorical)
    penalty = regularization_penalty(net, reg)
    return value + penalty if penalty else value


def network_loss(net: NetworkParams, X, Y, kind: str = "cross_entropy",
                 reg: Optional[RegularizerSpec] = None) -> float:
    return loss(kind, predict_output(net, X), Y, reg, net)


# backward pass

def _check_pairing(net: NetworkParams, kind: str) -> None:
    if kind not in LOSSES:
        raise ParameterError(f"unknown loss {kind!r}")
    out = net.output_activation
    if kind == "squared_error" and out == "softmax":
        raise UnsupportedCombinationError("softmax output requires the cross_entropy loss")
    if kind == "cross_entropy" and out not in ("sigmoid", "softmax"):
        raise UnsupportedCombinationError(f"cross_entropy needs outputs in [0, 1]; {out} output is unbounded")


def output_delta(net: NetworkParams, pred: np.ndarray, Y: np.ndarray, kind: str) -> np.ndarray:
    """dJ/dz at the output layer, before averaging over the batch."""
    _check_pairing(net, kind)
    if kind == "cross_entropy":
        # fused softmax/sigmoid + cross-entropy
        return pred - Y
    return 2.0 * (pred - Y) * activate_derivative(net.output_activation, pred)


def backprop(net: NetworkParams, X, Y, loss_kind: str = "cross_entropy",
             reg: Optional[RegularizerSpec] = None, dropout: Optional[DropoutSpec] = None,
             rng: Optional[np.random.Generator] = None,
             hidden_grad_extra: Optional[Dict[int, np.ndarray]] = None) -> List[LayerParams]:
    """Batch-averaged gradients of :func:`loss` for every weight and bias.

    ``hidden_grad_extra`` maps an activation index (1..L-1) to an additional
    dJ/da term for that hidden layer, already scaled by 1/m; the sparse
    autoencoder penalty enters this way.
    """
    X = _check_input(net, X)
    Y = np.asarray(Y, dtype=np.float64)
    n_layers = len(net.layers)
    if Y.shape != (X.shape[0], net.layers[-1].n_out):
        raise ShapeError(f"target shape {Y.shape} does not match ({X.shape[0]}, {net.layers[-1].n_out})")
    _check_pairing(net, loss_kind)
    acts, clean, masks = _forward_full(net, X, dropout, rng)
    m = X.shape[0]

    grads: List[Optional[LayerParams]] = [None] * n_layers
    delta = output_delta(net, acts[-1], Y, loss_kind) / m
    for i in range(n_layers - 1, -1, -1):
        layer = net.layers[i]
        gw = dot(delta.T, acts[i])
        gb = delta.sum(axis=0)
        if reg is not None:
            if reg.l2_lambda:
                gw = gw + 2.0 * reg.l2_lambda * layer.weights
            if reg.l1_lambda:
                gw = gw + reg.l1_lambda * np.sign(layer.weights)
        grads[i] = LayerParams(gw, gb)
        if i == 0:
            break
        da = dot(delta, layer.weights)
        if hidden_grad_extra and i in hidden_grad_extra:
            # the penalty is defined on the undropped activation
            extra = hidden_grad_extra[i]
            if masks[i] is not None:
                da = da * masks[i] + extra
            else:
                da = da + extra
        elif masks[i] is not None:
            da = da * masks[i]
        delta = da * activate_derivative(net.hidden_activation, clean[i])
    return grads


# initialization

def fan_sigma(n_in: int, n_out: int) -> float:
    """Gaussian scale matching a sigmoid-adjusted Glorot uniform draw."""
    return 4.0 * float(np.sqrt(2.0 / (n_in + n_out)))


def init_network(sizes: Sequence[int], scheme: str = "gaussian", sigma: Optional[float] = 0.01,
                 k_nonzero: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                 hidden_activation: str = "sigmoid", output_activation: str = "softmax") -> NetworkParams:
    """Random weights, zero biases.

    ``gaussian`` draws every weight from N(0, sigma^2). ``sparse`` gives each
    unit exactly ``k_nonzero`` incoming N(0, sigma^2) weights, the rest zero.
    ``sigma=None`` picks :func:`fan_sigma` per layer.
    """
    sizes = list(sizes)
    if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
        raise ParameterError(f"need at least two positive layer sizes, got {sizes}")
    if sigma is not None and sigma < 0:
        raise ParameterError("sigma must be non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    layers = []
    for n_in, n_out in zip(sizes, sizes[1:]):
        scale = fan_sigma(n_in, n_out) if sigma is None else sigma
        if scheme == "gaussian":
            w = rng.normal(0.0, 1.0, (n_out, n_in)) * scale
        elif scheme == "sparse":
            if k_nonzero is None or not 1 <= k_nonzero <= n_in:
                raise ParameterError(f"k_nonzero must lie in [1, fan-in={n_in}], got {k_nonzero}")
            w = np.zeros((n_out, n_in))
            for unit in range(n_out):
                idx = rng.choice(n_in, size=k_nonzero, replace=False)
                w[unit, idx] = rng.normal(0.0, 1.0, k_nonzero) * scale
        else:
            raise ParameterError(f"unknown init scheme {scheme!r}")
        layers.append(LayerParams(w, np.zeros(n_out)))
    return NetworkParams(layers, hidden_activation, output_activation)
