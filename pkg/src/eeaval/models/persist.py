"""Versioned JSON dump of a trained model (spec + learned parameters).

Floats are written with Python's shortest round-trip repr, so a reload
reproduces predictions bit-exactly. NaN (unused tree thresholds) is
encoded as ``null``.
"""
import json
import math

import numpy as np

from .. import errors
from .trees import TreeEnsemble
from .zoo import ModelSpec, TrainedModel

FORMAT_VERSION = 1


def _encode(obj):
    if isinstance(obj, TreeEnsemble):
        return {"__ensemble__": {k: _encode(v) for k, v in obj.to_state().items()}}
    if isinstance(obj, np.ndarray):
        kind = "float" if obj.dtype.kind == "f" else "int"
        data = [None if (kind == "float" and math.isnan(v)) else v for v in obj.tolist()]
        return {"__array__": kind, "dtype": obj.dtype.str, "data": data}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ensemble__" in obj:
            return TreeEnsemble.from_state({k: _decode(v) for k, v in obj["__ensemble__"].items()})
        if "__array__" in obj:
            data = [float("nan") if v is None else v for v in obj["data"]]
            return np.array(data, dtype=np.dtype(obj["dtype"]))
        return {k: _decode(v) for k, v in obj.items()}
    return obj


def dumps_model(model: TrainedModel) -> str:
    doc = {
        "format_version": FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "feature_schema": list(model.feature_schema),
        "parameters": _encode(model.parameters),
    }
    return json.dumps(doc, sort_keys=True, allow_nan=False)


def loads_model(text: str) -> TrainedModel:
    doc = json.loads(text)
    if doc.get("format_version") != FORMAT_VERSION:
        raise errors.SchemaMismatch(f"unsupported model format version {doc.get('format_version')!r}")
    return TrainedModel(ModelSpec.from_dict(doc["spec"]), _decode(doc["parameters"]),
                        tuple(doc["feature_schema"]))


def save_model(model: TrainedModel, path) -> None:
    from ..io import atomic_write_text
    atomic_write_text(path, dumps_model(model))


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
