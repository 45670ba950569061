"""Binary restricted Boltzmann machines.

Energy ``E(v, h) = -a.v - b.h - v.W.h`` with ``W`` of shape
``n_visible x n_hidden``. Training uses CD-k; small models can be checked
against exact enumeration of the partition function.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from .exceptions import CapacityError, ParameterError, ShapeError
from .linalg import dot
from .nn import sigmoid

MAX_ENUMERATION_UNITS = 24
VISIBLE_BIAS_CLAMP = 1e-3


@dataclass
class RbmParams:
    W: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.W.ndim != 2 or self.W.shape != (self.a.size, self.b.size):
            raise ShapeError(f"W {self.W.shape} inconsistent with a ({self.a.size}) and b ({self.b.size})")

    @property
    def n_visible(self) -> int:
        return self.a.size

    @property
    def n_hidden(self) -> int:
        return self.b.size

    def parameters(self) -> List[np.ndarray]:
        return [self.W, self.a, self.b]

    def copy(self) -> "RbmParams":
        return RbmParams(self.W.copy(), self.a.copy(), self.b.copy())

    def transposed(self) -> "RbmParams":
        """Same model with the roles of visible and hidden layers swapped."""
        return RbmParams(self.W.T.copy(), self.b.copy(), self.a.copy())


@dataclass
class CdConfig:
    k: int = 1
    learning_rate: float = 0.1
    momentum: float = 0.0
    weight_decay: float = 0.0
    epochs: int = 10
    batch_size: int = 100
    seed: int = 0
    binary_reconstruction: bool = False
    sample_data_hidden: bool = False

    def __post_init__(self):
        problems = []
        if self.k < 1:
            problems.append(f"k must be >= 1, got {self.k}")
        if not self.learning_rate >= 0:
            problems.append(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            problems.append(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            problems.append(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if problems:
            raise ParameterError("; ".join(problems))


def _as_vector(x, n: int, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != n:
        raise ShapeError(f"{name} has length {x.size}, expected {n}")
    return x


def energy(rbm: RbmParams, v, h) -> float:
    v = _as_vector(v, rbm.n_visible, "v")
    h = _as_vector(h, rbm.n_hidden, "h")
    return float(-(rbm.a @ v) - (rbm.b @ h) - v @ rbm.W @ h)


def energy_sum(rbm: RbmParams, v, h) -> float:
    """Energy evaluated term by term, as an independent check on :func:`energy`."""
    v = _as_vector(v, rbm.n_visible, "v")
    h = _as_vector(h, rbm.n_hidden, "h")
    total = 0.0
    for i in range(rbm.n_visible):
        total -= rbm.a[i] * v[i]
    for j in range(rbm.n_hidden):
        total -= rbm.b[j] * h[j]
    for i in range(rbm.n_visible):
        for j in range(rbm.n_hidden):
            total -= v[i] * rbm.W[i, j] * h[j]
    return total


def hidden_probs(rbm: RbmParams, v_batch) -> np.ndarray:
    """p(h_j = 1 | v) for every row of ``v_batch``."""
    v = np.atleast_2d(np.asarray(v_batch, dtype=np.float64))
    if v.shape[1] != rbm.n_visible:
        raise ShapeError(f"visible batch has {v.shape[1]} columns, RBM has {rbm.n_visible} visible units")
    return sigmoid(dot(v, rbm.W) + rbm.b)


def visible_probs(rbm: RbmParams, h_batch) -> np.ndarray:
    """p(v_i = 1 | h) for every row of ``h_batch``."""
    h = np.atleast_2d(np.asarray(h_batch, dtype=np.float64))
    if h.shape[1] != rbm.n_hidden:
        raise ShapeError(f"hidden batch has {h.shape[1]} columns, RBM has {rbm.n_hidden} hidden units")
    return sigmoid(dot(h, rbm.W.T) + rbm.a)


def sample_bernoulli(probs, rng: np.random.Generator) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ParameterError("probabilities must lie in [0, 1]")
    return (rng.random(probs.shape) < probs).astype(np.float64)


def cd_update(rbm: RbmParams, v_batch, cfg: CdConfig, velocity: Optional[List[np.ndarray]],
              rng: np.random.Generator):
    """One CD-k step on a batch, applied in place.

    Hidden states driving the chain are sampled; the final hidden statistics
    use probabilities. Reconstructions are probabilities unless
    ``cfg.binary_reconstruction``. Weight decay touches ``W`` only.

    Returns ``(rbm, velocity, reconstruction_error)`` where the error is the
    mean squared difference between data and reconstruction.
    """
    v0 = np.atleast_2d(np.asarray(v_batch, dtype=np.float64))
    if v0.shape[1] != rbm.n_visible:
        raise ShapeError(f"visible batch has {v0.shape[1]} columns, RBM has {rbm.n_visible} visible units")
    if velocity is None:
        velocity = [np.zeros_like(p) for p in rbm.parameters()]
    n = v0.shape[0]

    ph0 = hidden_probs(rbm, v0)
    h = sample_bernoulli(ph0, rng)
    data_hidden = h if cfg.sample_data_hidden else ph0
    vk, phk = v0, ph0
    for step in range(cfg.k):
        pv = visible_probs(rbm, h)
        vk = sample_bernoulli(pv, rng) if cfg.binary_reconstruction else pv
        phk = hidden_probs(rbm, vk)
        if step < cfg.k - 1:
            h = sample_bernoulli(phk, rng)

    grad_W = (dot(v0.T, data_hidden) - dot(vk.T, phk)) / n
    grad_a = (v0 - vk).mean(axis=0)
    grad_b = (data_hidden - phk).mean(axis=0)
    if cfg.weight_decay:
        grad_W = grad_W - 2.0 * cfg.weight_decay * rbm.W

    # ascent on the log-likelihood estimate
    for param, vel, g in zip(rbm.parameters(), velocity, (grad_W, grad_a, grad_b)):
        vel *= cfg.momentum
        vel += cfg.learning_rate * g
        param += vel
    recon_error = float(np.mean((v0 - vk) ** 2))
    return rbm, velocity, recon_error


def init_rbm(n_visible: int, n_hidden: int, train_data, rng: np.random.Generator,
             sigma: float = 0.01) -> RbmParams:
    """Small Gaussian weights, zero hidden biases, visible biases log(p/(1-p))."""
    data = np.atleast_2d(np.asarray(train_data, dtype=np.float64))
    if data.shape[0] == 0 or data.size == 0:
        raise ParameterError("init_rbm needs non-empty training data")
    if data.shape[1] != n_visible:
        raise ShapeError(f"training data has {data.shape[1]} columns, expected {n_visible}")
    p = np.clip(data.mean(axis=0), VISIBLE_BIAS_CLAMP, 1.0 - VISIBLE_BIAS_CLAMP)
    W = rng.normal(0.0, 1.0, (n_visible, n_hidden)) * sigma
    return RbmParams(W, np.log(p / (1.0 - p)), np.zeros(n_hidden))


@dataclass
class RbmTrainingReport:
    recon_error: List[float] = field(default_factory=list)
    seconds: float = 0.0


def train_rbm(data, n_hidden: int, cfg: CdConfig, rng: Optional[np.random.Generator] = None,
              rbm: Optional[RbmParams] = None):
    """Mini-batch CD-k over shuffled data for ``cfg.epochs`` epochs."""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if rbm is None:
        rbm = init_rbm(data.shape[1], n_hidden, data, rng)
    report = RbmTrainingReport()
    start = time.perf_counter()
    velocity = None
    m = data.shape[0]
    b = min(cfg.batch_size, m)
    for _ in range(cfg.epochs):
        order = rng.permutation(m)
        errors = []
        for s in range(0, m, b):
            _, velocity, err = cd_update(rbm, data[order[s:s + b]], cfg, velocity, rng)
            errors.append(err)
        report.recon_error.append(float(np.mean(errors)))
    report.seconds = time.perf_counter() - start
    return rbm, report


# exact computations by enumeration

def _check_enumerable(rbm: RbmParams) -> None:
    total = rbm.n_visible + rbm.n_hidden
    if total > MAX_ENUMERATION_UNITS:
        raise CapacityError(f"exact enumeration limited to {MAX_ENUMERATION_UNITS} units, model has {total}")


def all_binary(n: int) -> np.ndarray:
    """All 2^n binary vectors as rows, in lexicographic order."""
    if n == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product((0.0, 1.0), repeat=n)))


def _neg_energy_table(rbm: RbmParams, V: np.ndarray, H: np.ndarray) -> np.ndarray:
    # -E for every (v, h) pair: rows index V, columns index H
    return (V @ rbm.a)[:, None] + (H @ rbm.b)[None, :] + V @ rbm.W @ H.T


def _log_unnormalized_marginal(rbm: RbmParams, V: np.ndarray, H: np.ndarray) -> np.ndarray:
    return logsumexp(_neg_energy_table(rbm, V, H), axis=1)


def log_partition(rbm: RbmParams, chunk: int = 4096) -> float:
    """log Z by enumerating every joint configuration."""
    _check_enumerable(rbm)
    H = all_binary(rbm.n_hidden)
    parts = []
    for start in range(0, 1 << rbm.n_visible, chunk):
        V = _visible_block(rbm.n_visible, start, chunk)
        parts.append(logsumexp(_neg_energy_table(rbm, V, H)))
    return float(logsumexp(parts))


def _visible_block(n: int, start: int, count: int) -> np.ndarray:
    idx = np.arange(start, min(start + count, 1 << n))
    bits = (idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
    return bits.astype(np.float64)


def exact_partition(rbm: RbmParams) -> float:
    return math.exp(log_partition(rbm))


def exact_log_marginal(rbm: RbmParams, v, log_z: Optional[float] = None) -> np.ndarray:
    _check_enumerable(rbm)
    V = np.atleast_2d(np.asarray(v, dtype=np.float64))
    if V.shape[1] != rbm.n_visible:
        raise ShapeError(f"visible vector has {V.shape[1]} entries, expected {rbm.n_visible}")
    if log_z is None:
        log_z = log_partition(rbm)
    return _log_unnormalized_marginal(rbm, V, all_binary(rbm.n_hidden)) - log_z


def exact_marginal(rbm: RbmParams, v) -> float:
    """p(v), summing exp(-E) over all hidden configurations."""
    return float(np.exp(exact_log_marginal(rbm, v)[0]))


def exact_loglik(rbm: RbmParams, data) -> float:
    """Mean log p(v) over the rows of ``data``."""
    return float(np.mean(exact_log_marginal(rbm, data)))


def exact_loglik_gradient(rbm: RbmParams, data) -> List[np.ndarray]:
    """Gradient of :func:`exact_loglik` w.r.t. ``(W, a, b)``.

    Each entry is ``<.>_data - <.>_model`` with the model expectation taken
    over the exactly enumerated visible distribution.
    """
    _check_enumerable(rbm)
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    ph = hidden_probs(rbm, data)
    pos_W = data.T @ ph / data.shape[0]
    pos_a = data.mean(axis=0)
    pos_b = ph.mean(axis=0)

    V = all_binary(rbm.n_visible)
    pv = np.exp(exact_log_marginal(rbm, V))
    ph_model = hidden_probs(rbm, V)
    neg_W = (V * pv[:, None]).T @ ph_model
    neg_a = pv @ V
    neg_b = pv @ ph_model
    return [pos_W - neg_W, pos_a - neg_a, pos_b - neg_b]
