"""Three-layer autoencoders: plain, sparse (KL penalty) and denoising.

Encoder and decoder are untied sigmoid layers trained on the Bernoulli
cross-entropy between reconstruction and the clean input. A denoising
autoencoder sees a corrupted input but reconstructs the clean one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import xlogy

from .exceptions import ParameterError, ShapeError
from .linalg import col_means
from .nn import (
    LayerParams,
    NetworkParams,
    RegularizerSpec,
    backprop,
    grads_as_list,
    init_network,
    layer_forward,
    loss,
    predict_output,
)
from .optim import History, OptimizerConfig, run_epochs

KL_CLIP = 1e-12
CORRUPTIONS = ("none", "masking", "salt_pepper")


@dataclass
class AutoencoderParams:
    encoder: LayerParams
    decoder: LayerParams

    def __post_init__(self):
        if self.decoder.n_in != self.encoder.n_out or self.decoder.n_out != self.encoder.n_in:
            raise ShapeError(
                f"decoder {self.decoder.weights.shape} does not mirror encoder {self.encoder.weights.shape}"
            )

    def as_network(self) -> NetworkParams:
        """Shares arrays with this autoencoder."""
        return NetworkParams([self.encoder, self.decoder], "sigmoid", "sigmoid")

    def encode(self, X) -> np.ndarray:
        return layer_forward(np.asarray(X, dtype=np.float64), self.encoder, "sigmoid")

    def reconstruct(self, X) -> np.ndarray:
        return predict_output(self.as_network(), X)


@dataclass
class SparsityConfig:
    target: float = 0.05
    weight: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.target < 1.0:
            raise ParameterError(f"sparsity target must lie in (0, 1), got {self.target}")
        if self.weight < 0:
            raise ParameterError(f"sparsity weight must be >= 0, got {self.weight}")


@dataclass
class CorruptionSpec:
    kind: str = "none"
    level: float = 0.0

    def __post_init__(self):
        if self.kind not in CORRUPTIONS:
            raise ParameterError(f"corruption kind must be one of {CORRUPTIONS}, got {self.kind!r}")
        if not 0.0 <= self.level <= 1.0:
            raise ParameterError(f"corruption level must lie in [0, 1], got {self.level}")


def kl_divergence(p, q):
    """KL divergence between Bernoulli(p) and Bernoulli(q), elementwise."""
    p = np.asarray(p, dtype=np.float64)
    q = np.clip(np.asarray(q, dtype=np.float64), KL_CLIP, 1.0 - KL_CLIP)
    out = xlogy(p, p) - xlogy(p, q) + xlogy(1.0 - p, 1.0 - p) - xlogy(1.0 - p, 1.0 - q)
    # rounding can leave tiny negatives when p ~ q
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


def kl_derivative(p: float, q) -> np.ndarray:
    """d KL(p || q) / dq."""
    q = np.clip(np.asarray(q, dtype=np.float64), KL_CLIP, 1.0 - KL_CLIP)
    return -p / q + (1.0 - p) / (1.0 - q)


def mean_hidden_activation(ae: AutoencoderParams, X) -> np.ndarray:
    """Average hidden activation over all rows of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ShapeError(f"need a non-empty 2-D input, got shape {X.shape}")
    return col_means(ae.encode(X))[0]


def corrupt(X, spec: CorruptionSpec, rng: np.random.Generator) -> np.ndarray:
    """Masking zeroes each entry with probability ``level``; salt-and-pepper
    replaces it by 0 or 1 (fair coin) with that probability."""
    X = np.asarray(X, dtype=np.float64)
    if spec.kind == "none" or spec.level == 0.0:
        return X.copy()
    hit = rng.random(X.shape) < spec.level
    if spec.kind == "masking":
        return np.where(hit, 0.0, X)
    coin = (rng.random(X.shape) < 0.5).astype(np.float64)
    return np.where(hit, coin, X)


def sparse_penalty(net: NetworkParams, X, sparsity: Optional[SparsityConfig]) -> float:
    if sparsity is None or sparsity.weight == 0.0:
        return 0.0
    rho_hat = col_means(layer_forward(np.asarray(X, dtype=np.float64), net.layers[0], "sigmoid"))[0]
    return sparsity.weight * float(np.sum(kl_divergence(sparsity.target, rho_hat)))


def _sparsity_extra(sparsity: SparsityConfig, rho_hat: np.ndarray, m: int):
    coeff = sparsity.weight * kl_derivative(sparsity.target, rho_hat) / m
    return {1: np.broadcast_to(coeff, (m, rho_hat.size))}


def autoencoder_loss(net: NetworkParams, X_in, X_target, sparsity: Optional[SparsityConfig] = None,
                     reg: Optional[RegularizerSpec] = None) -> float:
    """Reconstruction cross-entropy + weight penalties + sparsity penalty.

    The average hidden activation is taken over ``X_in``.
    """
    value = loss("cross_entropy", predict_output(net, X_in), X_target, reg, net)
    return value + sparse_penalty(net, X_in, sparsity)


def autoencoder_gradient(net: NetworkParams, X_in, X_target, sparsity: Optional[SparsityConfig] = None,
                         reg: Optional[RegularizerSpec] = None, rho_hat: Optional[np.ndarray] = None):
    """Gradient of :func:`autoencoder_loss`.

    With ``rho_hat`` given, the sparsity term uses that fixed estimate (the
    per-epoch rule) instead of the activations of ``X_in``.
    """
    X_in = np.asarray(X_in, dtype=np.float64)
    extra = None
    if sparsity is not None and sparsity.weight:
        if rho_hat is None:
            rho_hat = col_means(layer_forward(X_in, net.layers[0], "sigmoid"))[0]
        extra = _sparsity_extra(sparsity, rho_hat, X_in.shape[0])
    return backprop(net, X_in, X_target, "cross_entropy", reg, hidden_grad_extra=extra)


class _AutoencoderObjective:
    def __init__(self, net, sparsity, corruption, reg, rng, sparsity_mode):
        self.net = net
        self.sparsity = sparsity if (sparsity is not None and sparsity.weight) else None
        self.corruption = corruption
        self.reg = reg
        self.rng = rng
        self.sparsity_mode = sparsity_mode
        self.rho_hat = None

    def parameters(self):
        return self.net.parameters()

    def on_epoch_start(self, X, Y):
        if self.sparsity is not None and self.sparsity_mode == "epoch":
            self.rho_hat = col_means(layer_forward(X, self.net.layers[0], "sigmoid"))[0]

    def gradient(self, Xb, Yb):
        X_in = corrupt(Xb, self.corruption, self.rng)
        rho = self.rho_hat if self.sparsity_mode == "epoch" else None
        return grads_as_list(autoencoder_gradient(self.net, X_in, Yb, self.sparsity, self.reg, rho))

    def loss(self, X, Y):
        return autoencoder_loss(self.net, X, Y, self.sparsity, self.reg)

    def validation_error(self, X, Y):
        return self.loss(X, Y)


def init_autoencoder(n_visible: int, n_hidden: int, rng: np.random.Generator,
                     sigma: Optional[float] = None) -> AutoencoderParams:
    net = init_network([n_visible, n_hidden, n_visible], sigma=sigma, rng=rng,
                       hidden_activation="sigmoid", output_activation="sigmoid")
    return AutoencoderParams(net.layers[0], net.layers[1])


def train_autoencoder(X, n_hidden: int, sparsity: Optional[SparsityConfig] = None,
                      corruption: Optional[CorruptionSpec] = None, opt: Optional[OptimizerConfig] = None,
                      rng: Optional[np.random.Generator] = None, reg: Optional[RegularizerSpec] = None,
                      sparsity_mode: str = "epoch", ae: Optional[AutoencoderParams] = None,
                      ) -> Tuple[AutoencoderParams, History]:
    """Fit an autoencoder to reconstruct ``X`` (entries in [0, 1]).

    ``sparsity_mode="epoch"`` recomputes the average hidden activation over
    the whole training set at the start of each epoch; ``"batch"`` uses the
    current mini-batch instead.
    """
    X = np.asarray(X, dtype=np.float64)
    if n_hidden < 1:
        raise ParameterError(f"n_hidden must be >= 1, got {n_hidden}")
    if X.ndim != 2 or X.shape[0] == 0:
        raise ShapeError(f"need a non-empty 2-D input, got shape {X.shape}")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ParameterError("autoencoder inputs must lie in [0, 1]")
    if sparsity_mode not in ("epoch", "batch"):
        raise ParameterError(f"sparsity_mode must be 'epoch' or 'batch', got {sparsity_mode!r}")
    opt = opt or OptimizerConfig()
    corruption = corruption or CorruptionSpec()
    rng = rng if rng is not None else np.random.default_rng(opt.shuffle_seed)
    if ae is None:
        ae = init_autoencoder(X.shape[1], n_hidden, rng)
    objective = _AutoencoderObjective(ae.as_network(), sparsity, corruption, reg, rng, sparsity_mode)
    history = run_epochs(objective, X, X, opt, rng=rng)
    return ae, history
