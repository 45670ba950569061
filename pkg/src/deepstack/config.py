"""Experiment configuration: JSON schema, validation and overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from .exceptions import ConfigError

MODEL_KINDS = ("dbn", "sae", "sdae", "mlp", "disc_pretrain")
PRETRAINED_KINDS = ("dbn", "sae", "sdae")
DATA_FORMATS = ("idx", "csv")
PATH_FIELDS = ("train_images", "train_labels", "test_images", "test_labels", "train_csv", "test_csv", "out")
# Sweep axes may use "dropout" (fraction of hidden units dropped) instead of retain_hidden.
ALIASES = {"dropout": "retain_hidden"}


@dataclass
class ExperimentConfig:
    model_kind: str = "sdae"
    hidden_sizes: List[int] = field(default_factory=lambda: [100, 100])
    hidden_activation: str = "sigmoid"
    output_activation: str = "softmax"
    loss: str = "cross_entropy"
    learning_rate: float = 1.0
    finetune_learning_rate: Optional[float] = None
    momentum: float = 0.0
    l2: float = 0.0
    l1: float = 0.0
    batch_size: int = 100
    epochs_pretrain: int = 10
    epochs_finetune: int = 10
    retain_input: float = 1.0
    retain_hidden: float = 1.0
    sparsity_target: float = 0.05
    sparsity_weight: float = 0.0
    corruption: str = "masking"
    corruption_level: float = 0.5
    cd_k: int = 1
    finetune: bool = True
    patience: Optional[int] = None
    min_delta: float = 0.0
    validation_fraction: float = 0.0
    init_sigma: Optional[float] = None
    seed: int = 0
    data_format: str = "idx"
    train_images: Optional[str] = None
    train_labels: Optional[str] = None
    test_images: Optional[str] = None
    test_labels: Optional[str] = None
    train_csv: Optional[str] = None
    test_csv: Optional[str] = None
    csv_has_header: bool = False
    resize: bool = False
    n_train: Optional[int] = None
    n_test: Optional[int] = None
    split_seed: int = 0
    threads: int = 1
    out: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def estimator_params(self) -> Dict[str, Any]:
        """Keyword arguments for :class:`deepstack.estimators.DeepClassifier`."""
        keys = ("model_kind", "hidden_sizes", "hidden_activation", "output_activation", "loss",
                "learning_rate", "finetune_learning_rate", "momentum", "l2", "l1", "batch_size",
                "epochs_pretrain", "epochs_finetune", "retain_input", "retain_hidden",
                "sparsity_target", "sparsity_weight", "corruption", "corruption_level", "cd_k",
                "finetune", "patience", "min_delta", "validation_fraction", "init_sigma")
        params = {k: getattr(self, k) for k in keys}
        params["hidden_sizes"] = tuple(self.hidden_sizes)
        params["random_state"] = self.seed
        return params


FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_real(v) -> bool:
    return (isinstance(v, (int, float)) and not isinstance(v, bool)) and v == v and abs(v) != float("inf")


def _problems(cfg: ExperimentConfig) -> List[str]:
    out: List[str] = []

    def need(ok: bool, name: str, msg: str):
        if not ok:
            out.append(f"{name}: {msg} (got {getattr(cfg, name)!r})")

    def choice(name, options):
        need(getattr(cfg, name) in options, name, f"must be one of {list(options)}")

    def real(name, lo=None, hi=None, lo_open=False, hi_open=False, optional=False):
        v = getattr(cfg, name)
        if v is None and optional:
            return
        if not _is_real(v):
            need(False, name, "must be a finite number")
            return
        bad = ((lo is not None and (v <= lo if lo_open else v < lo))
               or (hi is not None and (v >= hi if hi_open else v > hi)))
        if bad:
            left = "(" if lo_open else "["
            right = ")" if hi_open else "]"
            need(False, name, f"must lie in {left}{lo if lo is not None else '-inf'}, "
                              f"{hi if hi is not None else 'inf'}{right}")

    def integer(name, lo=None, optional=False):
        v = getattr(cfg, name)
        if v is None and optional:
            return
        if not _is_int(v):
            need(False, name, "must be an integer")
        elif lo is not None and v < lo:
            need(False, name, f"must be >= {lo}")

    def flag(name):
        need(isinstance(getattr(cfg, name), bool), name, "must be true or false")

    choice("model_kind", MODEL_KINDS)
    hs = cfg.hidden_sizes
    if not isinstance(hs, (list, tuple)) or not all(_is_int(h) and h >= 1 for h in hs):
        need(False, "hidden_sizes", "must be a list of positive integers")
    elif not hs and cfg.model_kind != "mlp":
        need(False, "hidden_sizes", f"{cfg.model_kind} needs at least one hidden layer")
    choice("hidden_activation", ("sigmoid", "relu", "softplus", "linear"))
    if cfg.model_kind in PRETRAINED_KINDS and cfg.hidden_activation != "sigmoid":
        need(False, "hidden_activation", f"{cfg.model_kind} stacks produce sigmoid hidden units")
    choice("output_activation", ("softmax", "sigmoid"))
    choice("loss", ("cross_entropy", "squared_error"))
    if cfg.loss == "squared_error" and cfg.output_activation == "softmax":
        need(False, "loss", "squared_error cannot be paired with a softmax output")
    real("learning_rate", 0.0, lo_open=True)
    real("finetune_learning_rate", 0.0, lo_open=True, optional=True)
    real("momentum", 0.0, 1.0, hi_open=True)
    real("l2", 0.0)
    real("l1", 0.0)
    integer("batch_size", 1)
    integer("epochs_pretrain", 0)
    integer("epochs_finetune", 0)
    real("retain_input", 0.0, 1.0, lo_open=True)
    real("retain_hidden", 0.0, 1.0, lo_open=True)
    real("sparsity_target", 0.0, 1.0, lo_open=True, hi_open=True)
    real("sparsity_weight", 0.0)
    choice("corruption", ("none", "masking", "salt_pepper"))
    real("corruption_level", 0.0, 1.0)
    integer("cd_k", 1)
    flag("finetune")
    integer("patience", 0, optional=True)
    real("min_delta", 0.0)
    real("validation_fraction", 0.0, 1.0, hi_open=True)
    if cfg.patience is not None and cfg.validation_fraction == 0:
        need(False, "validation_fraction", "early stopping (patience) needs a validation split > 0")
    real("init_sigma", 0.0, optional=True)
    integer("seed", 0)
    choice("data_format", DATA_FORMATS)
    for name in PATH_FIELDS:
        v = getattr(cfg, name)
        need(v is None or isinstance(v, str), name, "must be a path string")
    flag("csv_has_header")
    flag("resize")
    integer("n_train", 1, optional=True)
    integer("n_test", 0, optional=True)
    integer("split_seed", 0)
    integer("threads", 1)
    return out


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    problems = _problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def check_data_paths(cfg: ExperimentConfig) -> None:
    """Data source fields are only required once data is actually loaded."""
    problems = []
    if cfg.data_format == "idx":
        for name in ("train_images", "train_labels"):
            if getattr(cfg, name) is None:
                problems.append(f"{name}: required for idx data")
        if (cfg.test_images is None) != (cfg.test_labels is None):
            problems.append("test_images/test_labels: give both or neither")
    elif cfg.train_csv is None:
        problems.append("train_csv: required for csv data")
    if problems:
        raise ConfigError(problems)


def from_dict(d: Dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    """Build and validate a config; unknown keys are rejected alongside other problems.

    Relative paths are resolved against ``base_dir`` when given.
    """
    if not isinstance(d, dict):
        raise ConfigError([f"config must be a JSON object, got {type(d).__name__}"])
    unknown = [k for k in d if k not in FIELD_NAMES]
    known = {k: v for k, v in d.items() if k in FIELD_NAMES}
    if base_dir is not None:
        for name in PATH_FIELDS:
            v = known.get(name)
            if isinstance(v, str) and not Path(v).is_absolute():
                known[name] = str(Path(base_dir) / v)
    cfg = ExperimentConfig(**known)
    problems = [f"{k}: unknown key" for k in unknown] + _problems(cfg)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such config file: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"{path}: invalid JSON ({exc})"]) from None
    return from_dict(raw, base_dir=path.parent)


def with_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Copy of ``cfg`` with fields replaced; ``dropout=f`` sets ``retain_hidden=1-f``.

    ``None`` values are ignored so unset CLI flags leave the config alone.
    """
    changes = {}
    unknown = []
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "dropout":
            changes["retain_hidden"] = 1.0 - value if _is_real(value) else value
        elif key in FIELD_NAMES:
            changes[key] = list(value) if key == "hidden_sizes" and isinstance(value, tuple) else value
        else:
            unknown.append(f"{key}: unknown key")
    if unknown:
        raise ConfigError(unknown)
    return validate(dataclasses.replace(cfg, **changes))


def resolves(name: str) -> bool:
    return name in FIELD_NAMES or name in ALIASES
