"""Greedy layer-wise stacks, unrolling into classifiers, and fine-tuning."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .autoencoder import CorruptionSpec, SparsityConfig, train_autoencoder
from .data import Dataset
from .exceptions import ParameterError, ShapeError
from .nn import (
    DropoutSpec,
    LayerParams,
    NetworkParams,
    RegularizerSpec,
    backprop,
    grads_as_list,
    init_network,
    layer_forward,
    network_loss,
    predict_output,
)
from .optim import EarlyStoppingConfig, History, OptimizerConfig, run_epochs
from .rbm import CdConfig, train_rbm

UNIT_KINDS = ("rbm", "autoencoder")
OUTPUT_INIT_SIGMA = 0.01


@dataclass
class StackSpec:
    hidden_sizes: List[int]
    unit_kind: str = "rbm"
    cd: CdConfig = field(default_factory=CdConfig)
    ae_opt: OptimizerConfig = field(default_factory=OptimizerConfig)
    sparsity: Optional[SparsityConfig] = None
    corruption: CorruptionSpec = field(default_factory=CorruptionSpec)
    reg: Optional[RegularizerSpec] = None

    def __post_init__(self):
        if not self.hidden_sizes or any(int(h) < 1 for h in self.hidden_sizes):
            raise ParameterError(f"hidden_sizes must be a non-empty list of positive ints, got {self.hidden_sizes}")
        if self.unit_kind not in UNIT_KINDS:
            raise ParameterError(f"unit_kind must be one of {UNIT_KINDS}, got {self.unit_kind!r}")


@dataclass
class PretrainReport:
    curves: List[List[float]] = field(default_factory=list)
    seconds: List[float] = field(default_factory=list)
    inputs: Optional[List[np.ndarray]] = None


def pretrain_stack(X, spec: StackSpec, rng: np.random.Generator,
                   capture_inputs: bool = False) -> Tuple[List[LayerParams], PretrainReport]:
    """Train one RBM or autoencoder per hidden layer, bottom-up.

    Each layer is trained on the hidden probabilities of the layer below.
    Only the encoder side of each autoencoder is kept.
    """
    a = np.asarray(X, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] == 0:
        raise ShapeError(f"need a non-empty 2-D input, got shape {a.shape}")
    if a.min() < 0.0 or a.max() > 1.0:
        raise ParameterError("pre-training inputs must lie in [0, 1]")
    layers: List[LayerParams] = []
    report = PretrainReport(inputs=[] if capture_inputs else None)
    for n_hidden in spec.hidden_sizes:
        if capture_inputs:
            report.inputs.append(a)
        start = time.perf_counter()
        if spec.unit_kind == "rbm":
            rbm, rbm_report = train_rbm(a, n_hidden, spec.cd, rng)
            layer = LayerParams(np.ascontiguousarray(rbm.W.T), rbm.b.copy())
            curve = rbm_report.recon_error
        else:
            ae, hist = train_autoencoder(a, n_hidden, spec.sparsity, spec.corruption, spec.ae_opt,
                                         rng, spec.reg)
            layer = ae.encoder
            curve = hist.train_loss
        report.seconds.append(time.perf_counter() - start)
        report.curves.append(list(curve))
        layers.append(layer)
        a = layer_forward(a, layer, "sigmoid")
    return layers, report


def unroll_to_classifier(layers: Sequence[LayerParams], n_classes: int, output_activation: str = "softmax",
                         rng: Optional[np.random.Generator] = None, n_inputs: Optional[int] = None,
                         hidden_activation: str = "sigmoid") -> NetworkParams:
    """Pre-trained layers (copied) followed by a fresh N(0, 0.01^2) output layer."""
    if n_classes < 2:
        raise ParameterError(f"n_classes must be >= 2, got {n_classes}")
    rng = rng if rng is not None else np.random.default_rng()
    hidden = [layer.copy() for layer in layers]
    if hidden:
        fan_in = hidden[-1].n_out
    elif n_inputs is not None:
        fan_in = n_inputs
    else:
        raise ParameterError("an empty stack needs n_inputs")
    out = LayerParams(rng.normal(0.0, 1.0, (n_classes, fan_in)) * OUTPUT_INIT_SIGMA, np.zeros(n_classes))
    return NetworkParams(hidden + [out], hidden_activation, output_activation)


class ClassifierObjective:
    """Adapts a network to :func:`deepstack.optim.run_epochs`."""

    def __init__(self, net: NetworkParams, loss_kind: str = "cross_entropy",
                 reg: Optional[RegularizerSpec] = None, dropout: Optional[DropoutSpec] = None,
                 rng: Optional[np.random.Generator] = None):
        self.net = net
        self.loss_kind = loss_kind
        self.reg = reg
        self.dropout = dropout
        self.rng = rng

    def parameters(self):
        return self.net.parameters()

    def gradient(self, Xb, Yb):
        return grads_as_list(backprop(self.net, Xb, Yb, self.loss_kind, self.reg, self.dropout, self.rng))

    def loss(self, X, Y):
        return network_loss(self.net, X, Y, self.loss_kind, self.reg)

    def validation_error(self, X, Y):
        return error_rate(self.net, X, np.argmax(Y, axis=1))


def finetune(net: NetworkParams, train: Dataset, val: Optional[Dataset] = None,
             opt: Optional[OptimizerConfig] = None, reg: Optional[RegularizerSpec] = None,
             dropout: Optional[DropoutSpec] = None, early_stop: Optional[EarlyStoppingConfig] = None,
             rng: Optional[np.random.Generator] = None,
             loss_kind: str = "cross_entropy") -> Tuple[NetworkParams, History]:
    """Supervised backpropagation over the whole network; returns a trained copy."""
    opt = opt or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng(opt.shuffle_seed)
    net = net.copy()
    if train.X.shape[1] != net.layers[0].n_in:
        raise ShapeError(f"data has {train.X.shape[1]} features, network expects {net.layers[0].n_in}")
    objective = ClassifierObjective(net, loss_kind, reg, dropout, rng)
    val_pair = (val.X, val.Y) if val is not None else None
    history = run_epochs(objective, train.X, train.Y, opt, val=val_pair, early_stopping=early_stop, rng=rng)
    return net, history


def discriminative_pretrain(sizes: Sequence[int], train: Dataset, val: Optional[Dataset] = None,
                            opt: Optional[OptimizerConfig] = None, rng: Optional[np.random.Generator] = None,
                            reg: Optional[RegularizerSpec] = None, dropout: Optional[DropoutSpec] = None,
                            finetune_opt: Optional[OptimizerConfig] = None,
                            early_stop: Optional[EarlyStoppingConfig] = None,
                            loss_kind: str = "cross_entropy", output_activation: str = "softmax",
                            init_sigma: Optional[float] = None,
                            on_stage: Optional[Callable[[int, NetworkParams], None]] = None,
                            hidden_activation: str = "sigmoid",
                            ) -> Tuple[NetworkParams, List[History]]:
    """Grow a network one hidden layer at a time, training all of it each stage.

    ``sizes`` is ``[n_inputs, h1, ..., hk, n_classes]``. Stage 1 trains a
    single-hidden-layer net; each later stage inserts a fresh hidden layer
    (and a fresh output layer) above the existing hidden layers and retrains
    everything. ``finetune_opt`` adds a final full fine-tuning pass.
    ``on_stage(stage, net)`` sees each network right before it is trained.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 3:
        raise ParameterError(f"sizes needs inputs, at least one hidden layer and outputs, got {sizes}")
    opt = opt or OptimizerConfig()
    rng = rng if rng is not None else np.random.default_rng(opt.shuffle_seed)
    n_classes = sizes[-1]
    histories: List[History] = []
    net = init_network(sizes[:2] + [n_classes], sigma=init_sigma, rng=rng,
                       hidden_activation=hidden_activation, output_activation=output_activation)
    if on_stage is not None:
        on_stage(1, net)
    net, hist = finetune(net, train, val, opt, reg, dropout, early_stop, rng, loss_kind)
    histories.append(hist)
    for stage, (n_prev, n_new) in enumerate(zip(sizes[1:-2], sizes[2:-1]), start=2):
        grown = init_network([n_prev, n_new, n_classes], sigma=init_sigma, rng=rng,
                             hidden_activation=hidden_activation, output_activation=output_activation)
        net = NetworkParams(net.layers[:-1] + grown.layers, net.hidden_activation, output_activation)
        if on_stage is not None:
            on_stage(stage, net)
        net, hist = finetune(net, train, val, opt, reg, dropout, early_stop, rng, loss_kind)
        histories.append(hist)
    if finetune_opt is not None and finetune_opt.epochs > 0:
        net, hist = finetune(net, train, val, finetune_opt, reg, dropout, early_stop, rng, loss_kind)
        histories.append(hist)
    return net, histories


def predict(net: NetworkParams, X) -> np.ndarray:
    """Index of the largest output per row; ties go to the lowest index."""
    return np.argmax(predict_output(net, X), axis=1)


def error_rate(net: NetworkParams, X, y) -> float:
    y = np.asarray(y)
    if len(y) != len(X):
        raise ShapeError(f"{len(X)} examples but {len(y)} labels")
    return float(np.mean(predict(net, X) != y))


def evaluate(net: NetworkParams, dataset: Dataset) -> float:
    """Fraction of misclassified examples."""
    return error_rate(net, dataset.X, dataset.y)
