"""One-at-a-time hyperparameter sweeps, result files and training curves.

Each axis is swept on its own with every other field at its default, so a
sweep costs the sum of the axis lengths rather than their product. Trials
report test error directly; there is no separate validation split, so the
selected values are tuned on the test set.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .config import ExperimentConfig, from_dict, resolves, with_overrides
from .exceptions import ConfigError, SelectionError
from .experiment import DataBundle, run_experiment
from .optim import History

log = logging.getLogger(__name__)


@dataclass
class SweepSpec:
    defaults: ExperimentConfig
    axes: List[Tuple[str, List[Any]]]
    epochs_pretrain: Optional[int] = None
    epochs_finetune: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not self.axes:
            problems.append("axes: at least one axis is required")
        for name, values in self.axes:
            if not resolves(name):
                problems.append(f"axes.{name}: not a config field")
            if not isinstance(values, (list, tuple)) or not values:
                problems.append(f"axes.{name}: needs a non-empty list of values")
        if problems:
            raise ConfigError(problems)

    def base_config(self) -> ExperimentConfig:
        return with_overrides(self.defaults, epochs_pretrain=self.epochs_pretrain,
                              epochs_finetune=self.epochs_finetune, seed=self.seed)

    @property
    def n_trials(self) -> int:
        return sum(len(v) for _, v in self.axes)


def sweep_from_dict(d: Dict[str, Any], base_dir: Optional[Path] = None) -> SweepSpec:
    """``{"defaults": {...}, "axes": {"l2": [...], ...}, "epochs_pretrain", "epochs_finetune", "seed"}``.

    ``axes`` may also be a list of ``[name, values]`` pairs.
    """
    allowed = {"defaults", "axes", "epochs_pretrain", "epochs_finetune", "seed"}
    unknown = [f"{k}: unknown key" for k in d if k not in allowed]
    if unknown:
        raise ConfigError(unknown)
    axes = d.get("axes", [])
    pairs = list(axes.items()) if isinstance(axes, dict) else [tuple(a) for a in axes]
    return SweepSpec(from_dict(d.get("defaults", {}), base_dir), [(n, list(v)) for n, v in pairs],
                     d.get("epochs_pretrain"), d.get("epochs_finetune"), d.get("seed", 0))


def load_sweep(path) -> SweepSpec:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such sweep file: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
    return sweep_from_dict(raw, path.parent)


@dataclass
class TrialResult:
    parameter_name: str
    value: Any
    test_error: Optional[float]
    train_error: Optional[float]
    wall_clock_seconds: float
    seed: int
    status: str = "ok"
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def trial_seed(base: int, name: str, value: Any) -> int:
    """Base seed plus a stable hash of (axis, value); independent of trial order."""
    key = f"{name}={json.dumps(value, sort_keys=True)}".encode()
    return int(base) + zlib.crc32(key)


def _default_runner(cfg: ExperimentConfig, data: DataBundle) -> Tuple[float, float]:
    result = run_experiment(cfg, data)
    return result.test_error, result.train_error


def run_sweep(spec: SweepSpec, data: DataBundle,
              runner: Callable[[ExperimentConfig, DataBundle], Tuple[float, float]] = _default_runner,
              ) -> List[TrialResult]:
    """Run every axis value once; a failing trial is recorded and skipped."""
    base = spec.base_config()
    results = []
    for name, values in spec.axes:
        for value in values:
            seed = trial_seed(spec.seed, name, value)
            start = time.perf_counter()
            try:
                cfg = with_overrides(base, **{name: value, "seed": seed})
                test_error, train_error = runner(cfg, data)
                result = TrialResult(name, value, float(test_error), float(train_error),
                                     time.perf_counter() - start, seed)
            except Exception as exc:  # a diverging trial must not end the sweep
                log.warning("trial %s=%r failed: %s", name, value, exc)
                result = TrialResult(name, value, None, None, time.perf_counter() - start, seed,
                                     "failed", f"{type(exc).__name__}: {exc}")
            log.info("%s=%r test_error=%s", name, value, result.test_error)
            results.append(result)
    return results


def select_best(results: Sequence[TrialResult]) -> Dict[str, Any]:
    """Per axis, the value with the lowest test error; the earlier value wins ties."""
    best: Dict[str, Optional[TrialResult]] = {}
    for r in results:
        best.setdefault(r.parameter_name, None)
        if r.ok and (best[r.parameter_name] is None or r.test_error < best[r.parameter_name].test_error):
            best[r.parameter_name] = r
    failed = [name for name, r in best.items() if r is None]
    if failed:
        raise SelectionError(f"every trial failed for axes {failed}")
    return {name: r.value for name, r in best.items()}


def compose_optimal(spec: SweepSpec, bests: Dict[str, Any]) -> ExperimentConfig:
    """Defaults with every per-axis best value applied together."""
    return with_overrides(spec.base_config(), **bests)


def _open_for_write(path):
    try:
        return open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def persist_results(results: Sequence[TrialResult], path) -> None:
    """One JSON object per line, keys in field order."""
    with _open_for_write(path) as f:
        for r in results:
            f.write(json.dumps(dataclasses.asdict(r)) + "\n")


def load_results(path) -> List[TrialResult]:
    try:
        with open(path, encoding="utf-8") as f:
            return [TrialResult(**json.loads(line)) for line in f if line.strip()]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def emit_curves(history: History, path) -> None:
    """CSV ``epoch,train_loss,val_error`` with six decimals; missing values are ``nan``."""
    with _open_for_write(path) as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "train_loss", "val_error"])
        for epoch, train_loss, val_error in history.rows():
            writer.writerow([int(epoch), f"{train_loss:.6f}", f"{val_error:.6f}"])

