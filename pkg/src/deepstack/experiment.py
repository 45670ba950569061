"""One experiment: load data as configured, fit a classifier, measure errors."""
from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ExperimentConfig, check_data_paths
from .data import Dataset, LabelledPixels, downsample_rows, load_csv, load_mnist, normalize_255, train_test_split
from .estimators import DeepClassifier
from .exceptions import ConfigError, ShapeError


@dataclass
class DataBundle:
    train: Dataset
    test: Dataset


def _pixels_to_dataset(raw: LabelledPixels, resize: bool, n_classes: int) -> Dataset:
    X = normalize_255(raw.pixels)
    if resize:
        X = downsample_rows(X)
    return Dataset.from_arrays(X, raw.labels, n_classes=n_classes)


def _head(ds: Dataset, n: Optional[int]) -> Dataset:
    if n is None or n >= len(ds):
        return ds
    return ds.subset(np.arange(n))


def load_data(cfg: ExperimentConfig) -> DataBundle:
    """Train/test datasets as described by the data fields of ``cfg``.

    With a separate test source, ``n_train`` draws a seeded random subset of
    the training file and ``n_test`` keeps the head of the test file.
    Without one, a single file is shuffled (``split_seed``) and cut.
    """
    check_data_paths(cfg)
    if cfg.data_format == "idx":
        full = load_mnist(cfg.train_images, cfg.train_labels)
        if cfg.resize:
            full = Dataset(downsample_rows(full.X), full.y, full.Y)
        test = None
        if cfg.test_images is not None:
            test = load_mnist(cfg.test_images, cfg.test_labels)
            if cfg.resize:
                test = Dataset(downsample_rows(test.X), test.y, test.Y)
    else:
        raw_train = load_csv(cfg.train_csv, cfg.csv_has_header)
        raw_test = load_csv(cfg.test_csv, cfg.csv_has_header) if cfg.test_csv is not None else None
        labels = [raw_train.labels] + ([raw_test.labels] if raw_test is not None else [])
        n_classes = max(int(np.max(lab)) + 1 for lab in labels if lab.size)
        full = _pixels_to_dataset(raw_train, cfg.resize, n_classes)
        test = _pixels_to_dataset(raw_test, cfg.resize, n_classes) if raw_test is not None else None

    if test is not None:
        train = full
        if cfg.n_train is not None and cfg.n_train < len(full):
            train, _ = train_test_split(full, cfg.n_train, 0, cfg.split_seed)
        test = _head(test, cfg.n_test)
    else:
        m = len(full)
        if cfg.n_train is None and cfg.n_test is None:
            raise ConfigError(["n_train/n_test: give at least one when there is no separate test set"])
        n_train = cfg.n_train if cfg.n_train is not None else m - cfg.n_test
        n_test = cfg.n_test if cfg.n_test is not None else m - n_train
        train, test = train_test_split(full, n_train, n_test, cfg.split_seed)
    if train.X.shape[1] != test.X.shape[1]:
        raise ShapeError(f"train rows have {train.X.shape[1]} pixels but test rows have {test.X.shape[1]}")
    return DataBundle(train, test)


def build_estimator(cfg: ExperimentConfig) -> DeepClassifier:
    return DeepClassifier(**cfg.estimator_params())


@contextmanager
def thread_limit(n: int):
    """Cap BLAS threads; one thread makes every run bit-reproducible."""
    with threadpool_limits(limits=n):
        yield


@dataclass
class ExperimentResult:
    estimator: DeepClassifier
    test_error: float
    train_error: float
    seconds: float


def classification_error(est: DeepClassifier, ds: Dataset) -> float:
    if len(ds) == 0:
        return float("nan")
    return float(np.mean(est.predict(ds.X) != ds.y))


def run_experiment(cfg: ExperimentConfig, data: DataBundle) -> ExperimentResult:
    start = time.perf_counter()
    est = build_estimator(cfg)
    with thread_limit(cfg.threads):
        est.fit(data.train.X, data.train.y)
        test_error = classification_error(est, data.test)
        train_error = classification_error(est, data.train)
    return ExperimentResult(est, test_error, train_error, time.perf_counter() - start)
