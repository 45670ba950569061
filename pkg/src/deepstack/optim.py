"""Gradient descent loops, momentum, early stopping and gradient checking."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import NumericError, ParameterError, ShapeError

log = logging.getLogger(__name__)

ALGORITHMS = ("batch", "stochastic", "minibatch")


@dataclass
class OptimizerConfig:
    algorithm: str = "minibatch"
    learning_rate: float = 1.0
    momentum: float = 0.0
    batch_size: int = 100
    epochs: int = 10
    shuffle_seed: int = 0

    def __post_init__(self):
        problems = []
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.learning_rate > 0:
            problems.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            problems.append(f"momentum must lie in [0, 1), got {self.momentum}")
        if int(self.batch_size) < 1:
            problems.append(f"batch_size must be >= 1, got {self.batch_size}")
        if int(self.epochs) < 0:
            problems.append(f"epochs must be >= 0, got {self.epochs}")
        if problems:
            raise ParameterError("; ".join(problems))

    def effective_batch_size(self, m: int) -> int:
        if self.algorithm == "batch":
            return m
        if self.algorithm == "stochastic":
            return 1
        if self.batch_size > m:
            raise ParameterError(f"batch_size {self.batch_size} exceeds training set size {m}")
        return self.batch_size


@dataclass
class EarlyStoppingConfig:
    patience: int = 0
    min_delta: float = 0.0

    def __post_init__(self):
        if self.patience < 0 or self.min_delta < 0:
            raise ParameterError("patience and min_delta must be non-negative")


@dataclass
class History:
    """Per-epoch record of one training run."""

    epochs: List[int] = field(default_factory=list)
    train_loss: List[float] = field(default_factory=list)
    val_error: List[float] = field(default_factory=list)
    best_epoch: Optional[int] = None
    stopped_early: bool = False

    def rows(self):
        for i, epoch in enumerate(self.epochs):
            val = self.val_error[i] if i < len(self.val_error) else math.nan
            yield epoch, self.train_loss[i], val


def zeros_like(params: Sequence[np.ndarray]) -> List[np.ndarray]:
    return [np.zeros_like(p) for p in params]


def momentum_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
                  velocity: Sequence[np.ndarray], learning_rate: float, momentum: float):
    """``v <- mu*v - alpha*grad; theta <- theta + v``, in place.

    Returns ``(params, velocity)`` for convenience.
    """
    if not (len(params) == len(grads) == len(velocity)):
        raise ShapeError("params, grads and velocity must have the same length")
    for p, g, v in zip(params, grads, velocity):
        if p.shape != g.shape or p.shape != v.shape:
            raise ShapeError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= momentum
        v -= learning_rate * g
        p += v
    return params, velocity


class EarlyStopping:
    """Tracks the best validation error and decides when to stop.

    Training stops once more than ``patience`` consecutive epochs fail to
    beat the best error by strictly more than ``min_delta``.
    """

    def __init__(self, config: Optional[EarlyStoppingConfig] = None):
        self.config = config or EarlyStoppingConfig()
        self.best_error = math.inf
        self.best_epoch: Optional[int] = None
        self.best_state = None
        self._bad_epochs = 0

    def __call__(self, epoch: int, val_error: float, snapshot: Callable[[], object] = None) -> str:
        if not math.isfinite(val_error):
            raise NumericError(f"validation error at epoch {epoch} is not finite")
        if self.best_error - val_error > self.config.min_delta or self.best_epoch is None:
            self.best_error = val_error
            self.best_epoch = epoch
            self.best_state = snapshot() if snapshot is not None else None
            self._bad_epochs = 0
            return "continue"
        self._bad_epochs += 1
        return "stop" if self._bad_epochs > self.config.patience else "continue"


def run_epochs(trainable, X, Y, cfg: OptimizerConfig, val: Optional[Tuple[np.ndarray, np.ndarray]] = None,
               early_stopping: Optional[EarlyStoppingConfig] = None,
               rng: Optional[np.random.Generator] = None) -> History:
    """Train ``trainable`` with batch, stochastic or mini-batch descent.

    ``trainable`` provides ``parameters()`` (arrays updated in place),
    ``gradient(Xb, Yb)`` and ``loss(X, Y)``; ``validation_error(Xv, Yv)`` is
    needed when ``val`` is given and ``on_epoch_start(X, Y)`` is optional.
    Every epoch visits a fresh permutation of the rows in contiguous slices;
    the last slice may be short. With early stopping the parameters of the
    best validation epoch are restored before returning.
    """
    m = len(X)
    if m == 0:
        raise ParameterError("training set is empty")
    b = cfg.effective_batch_size(m)
    rng = rng if rng is not None else np.random.default_rng(cfg.shuffle_seed)
    params = trainable.parameters()
    velocity = zeros_like(params)
    history = History()
    monitor = EarlyStopping(early_stopping) if (early_stopping is not None and val is not None) else None
    epoch_hook = getattr(trainable, "on_epoch_start", None)

    for epoch in range(1, cfg.epochs + 1):
        if epoch_hook is not None:
            epoch_hook(X, Y)
        order = rng.permutation(m)
        for start in range(0, m, b):
            idx = order[start:start + b]
            grads = trainable.gradient(X[idx], Y[idx])
            momentum_step(params, grads, velocity, cfg.learning_rate, cfg.momentum)
        train_loss = float(trainable.loss(X, Y))
        if not math.isfinite(train_loss):
            raise NumericError(f"training loss became non-finite at epoch {epoch}")
        history.epochs.append(epoch)
        history.train_loss.append(train_loss)
        if val is not None:
            err = float(trainable.validation_error(*val))
            history.val_error.append(err)
            log.debug("epoch %d: train_loss=%.6f val_error=%.6f", epoch, train_loss, err)
            if monitor is not None:
                decision = monitor(epoch, err, lambda: [p.copy() for p in params])
                if decision == "stop":
                    history.stopped_early = True
                    break
        else:
            log.debug("epoch %d: train_loss=%.6f", epoch, train_loss)

    if monitor is not None and monitor.best_state is not None:
        for p, best in zip(params, monitor.best_state):
            p[...] = best
        history.best_epoch = monitor.best_epoch
    return history


def finite_diff_gradient(f: Callable[[], float], params, eps: float = 1e-4, one_sided: bool = False):
    """Numerical gradient of ``f`` with respect to ``params``.

    ``params`` is an array or a list of arrays that ``f`` reads; each entry
    is perturbed in place and restored. The symmetric difference
    ``(f(x+e) - f(x-e)) / 2e`` is used unless ``one_sided`` is set.
    """
    if not eps > 0:
        raise ParameterError(f"eps must be > 0, got {eps}")
    single = isinstance(params, np.ndarray)
    arrays = [params] if single else list(params)

    def value() -> float:
        out = float(f())
        if not math.isfinite(out):
            raise NumericError("objective returned a non-finite value")
        return out

    base = value() if one_sided else None
    grads = []
    for arr in arrays:
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = value()
            if one_sided:
                gflat[i] = (up - base) / eps
            else:
                flat[i] = orig - eps
                down = value()
                gflat[i] = (up - down) / (2.0 * eps)
            flat[i] = orig
        grads.append(g)
    return grads[0] if single else grads


def relative_error(a, b, floor: float = 1e-8) -> np.ndarray:
    """Entrywise ``|a - b| / max(|a|, |b|, floor)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@dataclass
class UpdateRatio:
    layer: int
    ratio: float
    status: str  # ok, too_small, too_large or zero_weights


def update_ratio_report(params: Sequence[np.ndarray], updates: Sequence[np.ndarray],
                        band: Tuple[float, float] = (1e-4, 1e-2)) -> List[UpdateRatio]:
    """RMS(update) / RMS(weights) per layer, flagged against ``band``.

    The usual target is about 1e-3. All-zero weights give an infinite ratio
    with status ``zero_weights``.
    """
    if len(params) != len(updates):
        raise ShapeError("params and updates must have the same length")
    report = []
    for i, (w, u) in enumerate(zip(params, updates)):
        w = np.asarray(w, dtype=np.float64)
        u = np.asarray(u, dtype=np.float64)
        if w.shape != u.shape:
            raise ShapeError(f"layer {i}: weights {w.shape} vs updates {u.shape}")
        w_rms = float(np.sqrt(np.mean(w ** 2)))
        u_rms = float(np.sqrt(np.mean(u ** 2)))
        if w_rms == 0.0:
            log.warning("layer %d has all-zero weights; update ratio undefined", i)
            report.append(UpdateRatio(i, math.inf, "zero_weights"))
            continue
        ratio = u_rms / w_rms
        lo, hi = band
        status = "too_small" if ratio < lo else "too_large" if ratio > hi else "ok"
        report.append(UpdateRatio(i, ratio, status))
    return report
