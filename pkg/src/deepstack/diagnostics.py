"""Gradient checks: backprop against symmetric finite differences."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .autoencoder import SparsityConfig, autoencoder_gradient, autoencoder_loss
from .nn import (
    LayerParams,
    NetworkParams,
    RegularizerSpec,
    backprop,
    grads_as_list,
    network_loss,
)
from .optim import finite_diff_gradient, relative_error

GRADCHECK_TOLERANCE = 1e-5
GRADCHECK_EPS = 1e-4
# Entries where both gradients are below this are compared on an absolute scale.
RELATIVE_FLOOR = 1e-6


def max_relative_error(analytic: List[np.ndarray], numeric: List[np.ndarray], floor: float = RELATIVE_FLOOR) -> float:
    return max(float(np.max(relative_error(a, n, floor))) for a, n in zip(analytic, numeric))


def check_network_gradient(net: NetworkParams, X, Y, loss_kind: str = "cross_entropy",
                           reg: Optional[RegularizerSpec] = None, eps: float = GRADCHECK_EPS) -> float:
    """Max relative error between backprop and finite differences of the loss."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    analytic = grads_as_list(backprop(net, X, Y, loss_kind, reg))
    numeric = finite_diff_gradient(lambda: network_loss(net, X, Y, loss_kind, reg), net.parameters(), eps)
    return max_relative_error(analytic, numeric)


def check_autoencoder_gradient(net: NetworkParams, X_in, X_target, sparsity: Optional[SparsityConfig] = None,
                               reg: Optional[RegularizerSpec] = None, eps: float = GRADCHECK_EPS) -> float:
    """Same check for the reconstruction + KL sparsity objective.

    The average hidden activation is taken over the checked batch, so the
    analytic gradient is the exact derivative of the checked loss.
    """
    analytic = grads_as_list(autoencoder_gradient(net, X_in, X_target, sparsity, reg))
    numeric = finite_diff_gradient(lambda: autoencoder_loss(net, X_in, X_target, sparsity, reg),
                                   net.parameters(), eps)
    return max_relative_error(analytic, numeric)


def _away_from_zero(rng, shape, low=0.1, high=1.0):
    # keeps weights clear of the L1 kink at 0
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, high, size=shape)


def random_network(sizes, rng, hidden_activation="sigmoid", output_activation="softmax") -> NetworkParams:
    layers = [LayerParams(_away_from_zero(rng, (n_out, n_in)), rng.normal(0.0, 0.5, n_out))
              for n_in, n_out in zip(sizes[:-1], sizes[1:])]
    return NetworkParams(layers, hidden_activation, output_activation)


@dataclass
class GradcheckCase:
    seed: int
    path: str
    n_params: int
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= GRADCHECK_TOLERANCE


def _n_params(net: NetworkParams) -> int:
    return sum(p.size for p in net.parameters())


def random_gradcheck_case(seed: int, eps: float = GRADCHECK_EPS) -> List[GradcheckCase]:
    """One random problem per code path, each with at most 30 parameters.

    Paths: plain loss, L2, L1, L2+L1 with sigmoid and softplus hidden units,
    squared error, sigmoid outputs, and the sparse autoencoder objective.
    Dropout stays off so the objective is deterministic.
    """
    rng = np.random.default_rng(seed)
    cases = []
    m = 5

    def classification(sizes, hidden, output, loss_kind, reg, path):
        net = random_network(sizes, rng, hidden, output)
        X = rng.random((m, sizes[0]))
        if output == "softmax":
            Y = np.eye(sizes[-1])[rng.integers(0, sizes[-1], m)]
        else:
            Y = rng.random((m, sizes[-1]))
        err = check_network_gradient(net, X, Y, loss_kind, reg, eps)
        cases.append(GradcheckCase(seed, path, _n_params(net), err))

    lam = float(rng.uniform(0.001, 0.1))
    classification([3, 3, 3], "sigmoid", "softmax", "cross_entropy", None, "softmax_ce")
    classification([3, 3, 3], "sigmoid", "softmax", "cross_entropy", RegularizerSpec(l2_lambda=lam), "l2")
    classification([3, 3, 3], "sigmoid", "softmax", "cross_entropy", RegularizerSpec(l1_lambda=lam), "l1")
    classification([2, 3, 2, 2], "softplus", "softmax", "cross_entropy", RegularizerSpec(lam, lam), "l1_l2_deep")
    classification([3, 3, 2], "sigmoid", "sigmoid", "squared_error", RegularizerSpec(l2_lambda=lam), "squared")
    classification([3, 3, 2], "sigmoid", "sigmoid", "cross_entropy", None, "sigmoid_ce")

    net = random_network([3, 3, 3], rng, "sigmoid", "sigmoid")
    X = rng.random((m, 3))
    sparsity = SparsityConfig(target=float(rng.uniform(0.05, 0.3)), weight=float(rng.uniform(0.1, 3.0)))
    err = check_autoencoder_gradient(net, X, X, sparsity, RegularizerSpec(l2_lambda=lam), eps)
    cases.append(GradcheckCase(seed, "sparse_autoencoder", _n_params(net), err))
    return cases
