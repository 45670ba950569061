"""Command-line entry point: ``deepstack {train,eval,sweep,gradcheck,resize}``.

Exit codes: 0 success, 1 invalid configuration, 2 data or file-format
problem, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import harness
from .config import ExperimentConfig, load_config, with_overrides
from .data import Dataset, downsample_rows, load_csv, load_mnist, normalize_255, write_csv
from .deep import predict
from .diagnostics import GRADCHECK_TOLERANCE, check_autoencoder_gradient, check_network_gradient
from .autoencoder import SparsityConfig
from .exceptions import (
    ConfigError,
    DeepStackError,
    NumericError,
    ParameterError,
    SelectionError,
    ShapeError,
    UnsupportedCombinationError,
)
from .experiment import load_data, run_experiment, thread_limit
from .nn import RegularizerSpec, init_network
from .optim import History
from .persistence import load_model, save_model

log = logging.getLogger("deepstack")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (NumericError, FloatingPointError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ConfigError, ParameterError, UnsupportedCombinationError, SelectionError)):
        return EXIT_CONFIG
    return EXIT_DATA


def _config_with_flags(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return with_overrides(cfg, seed=args.seed, epochs_finetune=getattr(args, "epochs_finetune", None),
                          out=getattr(args, "out", None), threads=args.threads)


def _curve_path(model_path: Path, tag: str) -> Path:
    return model_path.with_name(f"{model_path.stem}.{tag}.csv")


def cmd_train(args) -> int:
    cfg = _config_with_flags(args)
    data = load_data(cfg)
    result = run_experiment(cfg, data)
    est = result.estimator
    if cfg.out is not None:
        out = Path(cfg.out)
        save_model(out, est.net_, cfg.model_kind, list(est.classes_))
        report = est.pretrain_report_
        if report is not None:
            for i, curve in enumerate(report.curves, start=1):
                harness.emit_curves(History(list(range(1, len(curve) + 1)), list(curve)),
                                    _curve_path(out, f"pretrain{i}"))
        for i, hist in enumerate(est.histories_, start=1):
            tag = "finetune" if len(est.histories_) == 1 else f"stage{i}"
            harness.emit_curves(hist, _curve_path(out, tag))
    print(f"train_error={result.train_error!r}")
    print(f"test_error={result.test_error!r}")
    return EXIT_OK


def _eval_dataset(args) -> Dataset:
    if args.config is not None:
        cfg = with_overrides(load_config(args.config), threads=args.threads)
        return load_data(cfg).test
    if args.images is not None:
        if args.labels is None:
            raise ConfigError(["--labels: required with --images"])
        ds = load_mnist(args.images, args.labels)
        return Dataset(downsample_rows(ds.X), ds.y, ds.Y) if args.resize else ds
    if args.csv is not None:
        raw = load_csv(args.csv, args.has_header)
        X = normalize_255(raw.pixels)
        if args.resize:
            X = downsample_rows(X)
        n_classes = int(raw.labels.max()) + 1 if raw.labels.size else 0
        return Dataset.from_arrays(X, raw.labels, n_classes=n_classes)
    raise ConfigError(["data: give --config, --images/--labels or --csv"])


def cmd_eval(args) -> int:
    saved = load_model(args.model)
    ds = _eval_dataset(args)
    n_in = saved.net.layers[0].n_in
    if ds.X.shape[1] != n_in:
        raise ShapeError(f"model expects {n_in} inputs but the data has {ds.X.shape[1]} columns")
    with thread_limit(args.threads or 1):
        pred = np.asarray(saved.classes)[predict(saved.net, ds.X)]
    error = float(np.mean(pred != ds.y)) if len(ds) else float("nan")
    print(f"test_error={error!r}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = harness.load_sweep(args.sweep_config)
    spec = harness.SweepSpec(with_overrides(spec.defaults, threads=args.threads), spec.axes,
                             spec.epochs_pretrain,
                             args.epochs_finetune if args.epochs_finetune is not None else spec.epochs_finetune,
                             args.seed if args.seed is not None else spec.seed)
    data = load_data(spec.base_config())
    results = harness.run_sweep(spec, data)
    harness.persist_results(results, args.out_results)
    for r in results:
        print(f"{r.parameter_name}={r.value!r} test_error={r.test_error!r} status={r.status}")
    try:
        bests = harness.select_best(results)
    except SelectionError as exc:
        print(f"selection failed: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for name, value in bests.items():
        print(f"best {name}={value!r}")
    return EXIT_OK


def gradcheck_config(cfg: ExperimentConfig, seed: Optional[int] = None) -> List[tuple]:
    """Backprop vs finite differences on a shrunken copy of the configured model.

    Hidden layers are capped at 3 units and inputs at 4 so the check stays
    tiny; activations, loss and penalties come from the config. Returns
    ``(label, max_relative_error)`` pairs.
    """
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    hidden = [min(h, 3) for h in cfg.hidden_sizes]
    sizes = [4, *hidden, 3]
    net = init_network(sizes, sigma=1.0, rng=rng, hidden_activation=cfg.hidden_activation,
                       output_activation=cfg.output_activation)
    for layer in net.layers:
        layer.bias[:] = rng.normal(0.0, 0.5, layer.bias.shape)
        # keep L1 and relu away from their kinks
        w = layer.weights
        w[...] = np.where(np.abs(w) < 0.1, np.copysign(0.1, w), w)
    X = rng.random((5, sizes[0]))
    if cfg.output_activation == "softmax":
        Y = np.eye(sizes[-1])[rng.integers(0, sizes[-1], 5)]
    else:
        Y = rng.random((5, sizes[-1]))
    reg = RegularizerSpec(cfg.l2, cfg.l1)
    checks = [("network", check_network_gradient(net, X, Y, cfg.loss, reg))]
    if cfg.model_kind in ("sae", "sdae"):
        ae = init_network([4, min(cfg.hidden_sizes[0], 3), 4], sigma=1.0, rng=rng,
                          hidden_activation="sigmoid", output_activation="sigmoid")
        weight = cfg.sparsity_weight if cfg.sparsity_weight > 0 else 1.0
        sparsity = SparsityConfig(cfg.sparsity_target, weight)
        checks.append(("autoencoder", check_autoencoder_gradient(ae, X, X, sparsity, RegularizerSpec(cfg.l2, 0.0))))
    return checks


def cmd_gradcheck(args) -> int:
    cfg = load_config(args.config)
    checks = gradcheck_config(cfg, args.seed)
    worst = max(err for _, err in checks)
    for label, err in checks:
        print(f"{label}_max_relative_error={err!r}")
    print(f"max_relative_error={worst!r}")
    passed = worst <= GRADCHECK_TOLERANCE
    print(f"gradcheck={'pass' if passed else 'fail'} (tolerance {GRADCHECK_TOLERANCE:g})")
    return EXIT_OK if passed else EXIT_NUMERIC


def resize_csv(in_path, out_path, has_header: bool = False) -> int:
    """Halve image sides, rounding averaged pixels to the nearest integer."""
    raw = load_csv(in_path, has_header)
    if raw.pixels.size == 0:
        write_csv(out_path, raw.labels, raw.pixels, header=has_header)
        return 0
    small = downsample_rows(raw.pixels.astype(np.float64))
    # 2x2 means are multiples of 0.25, so round-half-up is exact
    rounded = np.floor(small + 0.5).astype(np.int64)
    write_csv(out_path, raw.labels, rounded, header=has_header)
    return len(raw.labels)


def cmd_resize(args) -> int:
    n = resize_csv(args.in_csv, args.out_csv, args.has_header)
    print(f"resized_rows={n}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepstack", description="Layer-wise pre-trained deep classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_epochs=True):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="BLAS threads (1 = bit-reproducible)")
        if with_epochs:
            p.add_argument("--epochs-finetune", type=int, default=None, dest="epochs_finetune")

    p = sub.add_parser("train", help="pre-train, fine-tune and evaluate one model")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="model file to write")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="error rate of a saved model")
    p.add_argument("model")
    p.add_argument("--config", default=None, help="use this config's test set")
    p.add_argument("--images", default=None)
    p.add_argument("--labels", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--has-header", action="store_true", dest="has_header")
    p.add_argument("--resize", action="store_true")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="one-at-a-time hyperparameter sweep")
    p.add_argument("sweep_config")
    p.add_argument("out_results")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="backprop vs finite differences on a tiny model")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("resize", help="halve CSV image sides with bilinear downsampling")
    p.add_argument("in_csv")
    p.add_argument("out_csv")
    p.add_argument("--has-header", action="store_true", dest="has_header")
    p.set_defaults(func=cmd_resize)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DeepStackError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)

if __name__ == "__main__":
    sys.exit(main())
