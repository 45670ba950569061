"""Model files: JSON with every weight stored for a bit-exact roundtrip.

Python writes floats with the shortest repr that parses back to the same
double, so ``json`` alone gives exact persistence.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import List, NamedTuple, Optional

import numpy as np

from .exceptions import FormatError, NumericError
from .nn import LayerParams, NetworkParams

FORMAT_VERSION = 1


class SavedModel(NamedTuple):
    net: NetworkParams
    model_kind: str
    classes: List[int]


def model_to_dict(net: NetworkParams, model_kind: str, classes: Optional[List[int]] = None) -> dict:
    for p in net.parameters():
        if not np.all(np.isfinite(p)):
            raise NumericError("refusing to save a model with non-finite parameters")
    n = len(net.layers)
    return {
        "format_version": FORMAT_VERSION,
        "model_kind": model_kind,
        "layer_sizes": net.sizes,
        "activations": [net.activation_of(i) for i in range(n)],
        "classes": [int(c) for c in classes] if classes is not None else list(range(net.layers[-1].n_out)),
        "layers": [{"weights": layer.weights.tolist(), "bias": layer.bias.tolist()} for layer in net.layers],
    }


def save_model(path, net: NetworkParams, model_kind: str, classes: Optional[List[int]] = None) -> None:
    doc = model_to_dict(net, model_kind, classes)
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(doc, f)
    except OSError as exc:
        raise OSError(f"cannot write model file {path}: {exc}") from exc


def model_from_dict(doc: dict, source: str = "model") -> SavedModel:
    if not isinstance(doc, dict):
        raise FormatError(f"{source}: expected a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatError(f"{source}: unsupported format_version {version!r}, expected {FORMAT_VERSION}")
    missing = [k for k in ("model_kind", "layer_sizes", "activations", "layers") if k not in doc]
    if missing:
        raise FormatError(f"{source}: missing keys {missing}")
    try:
        layers = [LayerParams(np.array(layer["weights"], dtype=np.float64), np.array(layer["bias"], dtype=np.float64))
                  for layer in doc["layers"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{source}: malformed layer entry ({exc})") from None
    acts = doc["activations"]
    if len(acts) != len(layers) or not layers:
        raise FormatError(f"{source}: {len(acts)} activations for {len(layers)} layers")
    hidden = acts[0] if len(acts) > 1 else "sigmoid"
    if any(a != hidden for a in acts[:-1]):
        raise FormatError(f"{source}: hidden layers must share one activation, got {acts[:-1]}")
    for i, layer in enumerate(layers):
        if layer.weights.ndim != 2 or layer.bias.shape != (layer.weights.shape[0],):
            raise FormatError(f"{source}: layer {i} has weights {layer.weights.shape} and bias {layer.bias.shape}")
    try:
        net = NetworkParams(layers, hidden, acts[-1])
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None
    if list(doc["layer_sizes"]) != net.sizes:
        raise FormatError(f"{source}: layer_sizes {doc['layer_sizes']} disagree with weights {net.sizes}")
    classes = doc.get("classes", list(range(net.layers[-1].n_out)))
    if len(classes) != net.layers[-1].n_out:
        raise FormatError(f"{source}: {len(classes)} classes for {net.layers[-1].n_out} outputs")
    return SavedModel(net, doc["model_kind"], [int(c) for c in classes])


def load_model(path) -> SavedModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such model file: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc, str(path))
