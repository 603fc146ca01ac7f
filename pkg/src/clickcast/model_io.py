"""Versioned text serialization for trained models.

Models are stored as JSON documents: self-describing nested records with a
format marker and version, the trained structure (splits, coefficient
arrays, ensemble members), and an optional echo of the learner recipe that
produced the model.  Floats are written in Python's shortest round-trip
decimal form, so ``load(save(m))`` reproduces every coefficient bit for
bit and predicts identically to ``m``.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any, Optional

import numpy as np

from .ensembles import AdditiveModel, BaggedModel, LearnerSpec, TrainedModel
from .errors import DataError, ParseError
from .linear import LinearModel
from .trees import InternalNode, LeafNode

__all__ = [
    "MODEL_FORMAT",
    "MODEL_VERSION",
    "atomic_write_text",
    "decode_model",
    "encode_model",
    "load_model",
    "load_model_document",
    "save_model",
]

MODEL_FORMAT = "clickcast-model"
MODEL_VERSION = 1


def atomic_write_text(path, text: str) -> None:
    """Write a file all-or-nothing: temp file in place, then rename over."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _float(value) -> float:
    return float(value)


def encode_model(model: TrainedModel) -> dict:
    """Turn a trained model into a JSON-ready nested record."""
    if isinstance(model, LinearModel):
        return {
            "type": "linear",
            "coefficients": [_float(c) for c in model.coefficients],
            "intercept": _float(model.intercept),
            "ridge_epsilon": _float(model.ridge_epsilon),
        }
    if isinstance(model, LeafNode):
        if isinstance(model.model, LinearModel):
            leaf_model: Any = encode_model(model.model)
        else:
            leaf_model = {"type": "constant", "value": _float(model.model)}
        return {
            "type": "leaf",
            "model": leaf_model,
            "n_training": int(model.n_training),
            "training_sd": _float(model.training_sd),
        }
    if isinstance(model, InternalNode):
        return {
            "type": "split",
            "feature": int(model.feature),
            "threshold": _float(model.threshold),
            "n_training": int(model.n_training),
            "left": encode_model(model.left),
            "right": encode_model(model.right),
        }
    if isinstance(model, BaggedModel):
        return {
            "type": "bagged",
            "rounds": int(model.rounds),
            "seed": int(model.seed),
            "members": [encode_model(m) for m in model.members],
        }
    if isinstance(model, AdditiveModel):
        return {
            "type": "additive",
            "initial_prediction": _float(model.initial_prediction),
            "subsample_fraction": _float(model.subsample_fraction),
            "seed": int(model.seed),
            "stages": [
                {"model": encode_model(stage), "shrinkage": _float(beta)}
                for stage, beta in model.stages
            ],
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def _need(record: dict, key: str, kinds, context: str):
    if key not in record:
        raise DataError(f"{context}: missing field {key!r}")
    value = record[key]
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise DataError(f"{context}: field {key!r} has the wrong type")
    return value


def decode_model(record: Any) -> TrainedModel:
    """Rebuild a trained model from its nested record."""
    if not isinstance(record, dict):
        raise DataError("model record must be an object")
    kind = record.get("type")
    context = f"model record of type {kind!r}"
    if kind == "linear":
        coefficients = _need(record, "coefficients", list, context)
        if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in coefficients):
            raise DataError(f"{context}: coefficients must be numbers")
        return LinearModel(
            coefficients=np.asarray(coefficients, dtype=np.float64),
            intercept=float(_need(record, "intercept", (int, float), context)),
            ridge_epsilon=float(_need(record, "ridge_epsilon", (int, float), context)),
        )
    if kind == "constant":
        raise DataError("constant records appear only inside leaves")
    if kind == "leaf":
        inner = _need(record, "model", dict, context)
        if inner.get("type") == "constant":
            leaf_model: Any = float(_need(inner, "value", (int, float), "constant leaf"))
        else:
            leaf_model = decode_model(inner)
            if not isinstance(leaf_model, LinearModel):
                raise DataError(f"{context}: leaf model must be linear or constant")
        return LeafNode(
            model=leaf_model,
            n_training=int(_need(record, "n_training", int, context)),
            training_sd=float(_need(record, "training_sd", (int, float), context)),
        )
    if kind == "split":
        left = decode_model(_need(record, "left", dict, context))
        right = decode_model(_need(record, "right", dict, context))
        if isinstance(left, (BaggedModel, AdditiveModel, LinearModel)) or isinstance(
            right, (BaggedModel, AdditiveModel, LinearModel)
        ):
            raise DataError(f"{context}: children must be tree nodes")
        return InternalNode(
            feature=int(_need(record, "feature", int, context)),
            threshold=float(_need(record, "threshold", (int, float), context)),
            left=left,
            right=right,
            n_training=int(_need(record, "n_training", int, context)),
            model=None,
        )
    if kind == "bagged":
        members = _need(record, "members", list, context)
        return BaggedModel(
            members=tuple(decode_model(m) for m in members),
            rounds=int(_need(record, "rounds", int, context)),
            seed=int(_need(record, "seed", int, context)),
        )
    if kind == "additive":
        stages = _need(record, "stages", list, context)
        decoded = []
        for stage in stages:
            if not isinstance(stage, dict):
                raise DataError(f"{context}: stages must be objects")
            decoded.append(
                (
                    decode_model(_need(stage, "model", dict, "additive stage")),
                    float(_need(stage, "shrinkage", (int, float), "additive stage")),
                )
            )
        return AdditiveModel(
            initial_prediction=float(
                _need(record, "initial_prediction", (int, float), context)
            ),
            stages=tuple(decoded),
            subsample_fraction=float(
                _need(record, "subsample_fraction", (int, float), context)
            ),
            seed=int(_need(record, "seed", int, context)),
        )
    raise DataError(f"unknown model record type {kind!r}")


def save_model(
    model: TrainedModel,
    path,
    learner: Optional[LearnerSpec] = None,
    extra: Optional[dict] = None,
) -> None:
    """Write a model document; ``learner`` echoes the recipe that built it."""
    document: dict = {"format": MODEL_FORMAT, "version": MODEL_VERSION}
    if learner is not None:
        document["learner"] = learner.to_config()
    if extra:
        document.update(extra)
    document["model"] = encode_model(model)
    text = json.dumps(document, indent=1, allow_nan=False)
    atomic_write_text(path, text + "\n")


def load_model_document(path) -> dict:
    """Read and structurally check a model document; returns the raw dict."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a valid model file: {exc}") from exc
    if not isinstance(document, dict):
        raise DataError(f"{path}: model document must be an object")
    if document.get("format") != MODEL_FORMAT:
        raise DataError(f"{path}: not a {MODEL_FORMAT} document")
    if document.get("version") != MODEL_VERSION:
        raise DataError(f"{path}: unsupported version {document.get('version')!r}")
    if "model" not in document:
        raise DataError(f"{path}: missing model record")
    return document


def load_model(path) -> TrainedModel:
    """Load the trained model from a model document."""
    return decode_model(load_model_document(path)["model"])
