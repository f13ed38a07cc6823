"""Versioned JSON model files for ensembles and the linear baseline.

Arrays are stored flat in row-major order with explicit shapes; floats keep
full precision (shortest round-trip decimal), so a save/load cycle
reproduces every prediction bit-for-bit.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from . import nn
from .baseline import LinearModel
from .data import FeatureSchema, NormStats
from .ensemble import EnsembleModel
from .errors import ModelFormatError
from .hypernet import HyperMemberParams, TrainConfig

MODEL_FORMAT_VERSION = 1


def _array_block(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.ascontiguousarray(a).reshape(-1).tolist()}


def _read_array(block: dict, context: str) -> np.ndarray:
    try:
        shape = tuple(block["shape"])
        data = block["data"]
    except (KeyError, TypeError):
        raise ModelFormatError(f"{context}: malformed array block") from None
    a = np.asarray(data, dtype=np.float64)
    if a.size != int(np.prod(shape)):
        raise ModelFormatError(f"{context}: {a.size} values for shape {shape}")
    return a.reshape(shape)


def _net_to_dict(net: nn.NetParams) -> dict:
    return {"layers": [{"w": _array_block(w), "b": _array_block(b)}
                       for w, b in zip(net.weights, net.biases)]}


def _net_from_dict(d: dict, arch: nn.NetworkArch, context: str) -> nn.NetParams:
    layers = d.get("layers")
    dims = arch.layer_dims()
    if not isinstance(layers, list) or len(layers) != len(dims):
        raise ModelFormatError(f"{context}: expected {len(dims)} layers")
    weights, biases = [], []
    for i, (layer, (fan_in, fan_out)) in enumerate(zip(layers, dims)):
        w = _read_array(layer["w"], f"{context} layer {i} weight")
        b = _read_array(layer["b"], f"{context} layer {i} bias")
        if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
            raise ModelFormatError(f"{context} layer {i}: shape mismatch with architecture")
        weights.append(w)
        biases.append(b)
    return nn.NetParams(weights, biases)


def model_to_dict(model) -> dict:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "schema": model.schema.to_json_dict(),
        "schema_fingerprint": model.schema.fingerprint(),
        "norm_stats": model.norm_stats.to_json_dict(),
    }
    if isinstance(model, EnsembleModel):
        doc["kind"] = "ensemble"
        doc["train_config"] = dataclasses.asdict(model.train_config)
        doc["member_seeds"] = list(model.member_seeds)
        doc["arch"] = dataclasses.asdict(model.members[0].arch)
        doc["members"] = [_net_to_dict(m.net) for m in model.members]
    elif isinstance(model, LinearModel):
        doc["kind"] = "linear"
        doc["weights"] = model.weights.tolist()
        doc["bias"] = float(model.bias)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return doc


def model_from_dict(doc: dict):
    if not isinstance(doc, dict):
        raise ModelFormatError("model file is not a JSON object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format version {version!r} (expected {MODEL_FORMAT_VERSION})")
    try:
        schema = FeatureSchema.from_json_dict(doc["schema"])
        stats = NormStats.from_json_dict(doc["norm_stats"])
        kind = doc["kind"]
    except KeyError as exc:
        raise ModelFormatError(f"model file missing field {exc}") from None

    fingerprint = doc.get("schema_fingerprint")
    if fingerprint != schema.fingerprint():
        raise ModelFormatError(
            f"schema fingerprint {fingerprint!r} does not match embedded schema "
            f"({schema.fingerprint()!r})")

    if kind == "ensemble":
        try:
            cfg = TrainConfig(**doc["train_config"])
            arch = nn.NetworkArch(**doc["arch"])
            seeds = [int(s) for s in doc["member_seeds"]]
            member_docs = doc["members"]
        except (KeyError, TypeError) as exc:
            raise ModelFormatError(f"malformed ensemble block: {exc}") from None
        if len(member_docs) != len(seeds):
            raise ModelFormatError("member count does not match seed count")
        members = [
            HyperMemberParams(net=_net_from_dict(md, arch, f"member {i}"), arch=arch,
                              schema_fingerprint=schema.fingerprint())
            for i, md in enumerate(member_docs)
        ]
        return EnsembleModel(members=members, member_seeds=seeds, train_config=cfg,
                             schema=schema, norm_stats=stats)
    if kind == "linear":
        try:
            weights = np.asarray(doc["weights"], dtype=np.float64)
            bias = float(doc["bias"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"malformed linear block: {exc}") from None
        if weights.shape != (schema.n_features,):
            raise ModelFormatError("linear weight length does not match schema")
        return LinearModel(weights=weights, bias=bias, schema=schema, norm_stats=stats)
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    """Write an ensemble or linear model as a single JSON document."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path):
    """Load a model file, validating version, fingerprint and shapes."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(doc)
