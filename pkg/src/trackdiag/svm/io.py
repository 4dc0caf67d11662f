"""Text serialization of trained multiclass models.

Layout: a versioned header line followed by one JSON document::

    trackdiag-model 1
    {"kernel": {...}, "c": 10.0, "scaling": {...}, "classes": [...],
     "pairs": [{"class_pair": [0, 1], "bias": ..., "dual_coefs": [...],
                "support_vectors": [[...], ...], "info": {...}}, ...],
     "training_meta": {...}}

Floats are written with ``repr`` precision, so decision values survive a
round trip exactly.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from trackdiag.errors import ParseError
from trackdiag.svm.kernels import KernelSpec
from trackdiag.svm.multiclass import FeatureScaling, MulticlassSvmModel
from trackdiag.svm.smo import BinarySvmModel

MAGIC = "trackdiag-model"
VERSION = 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_model(model: MulticlassSvmModel) -> str:
    doc = {
        "kernel": model.kernel.as_dict(),
        "c": model.c,
        "scaling": model.scaling.as_dict(),
        "classes": [int(c) for c in model.classes],
        "pairs": [
            {
                "class_pair": list(m.class_pair),
                "bias": m.bias,
                "dual_coefs": m.dual_coefs.tolist(),
                "support_vectors": m.support_vectors.tolist(),
                "info": _jsonable(m.info),
            }
            for m in model.binary_models
        ],
        "training_meta": _jsonable(model.training_meta),
    }
    return f"{MAGIC} {VERSION}\n" + json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def loads_model(text: str, path=None) -> MulticlassSvmModel:
    head, _, body = text.partition("\n")
    parts = head.split()
    if len(parts) != 2 or parts[0] != MAGIC:
        raise ParseError(f"not a model file (expected '{MAGIC} {VERSION}' header)", 1, path)
    if parts[1] != str(VERSION):
        raise ParseError(f"unsupported model version {parts[1]}", 1, path)
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ParseError(f"corrupt model body: {exc.msg} at offset {exc.pos}", 2, path) from None
    try:
        kernel = KernelSpec.from_dict(doc["kernel"])
        models = tuple(
            BinarySvmModel(
                support_vectors=np.asarray(p["support_vectors"], dtype=np.float64),
                dual_coefs=np.asarray(p["dual_coefs"], dtype=np.float64),
                bias=p["bias"],
                kernel=kernel,
                c=doc["c"],
                class_pair=tuple(p["class_pair"]),
                info=p.get("info", {}),
            )
            for p in doc["pairs"]
        )
        return MulticlassSvmModel(
            models,
            classes=tuple(doc["classes"]),
            scaling=FeatureScaling.from_dict(doc["scaling"]),
            training_meta=doc.get("training_meta", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid model content: {exc}", 2, path) from None


def save_model(model: MulticlassSvmModel, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> MulticlassSvmModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read(), path=str(path))


def model_fingerprint(model: MulticlassSvmModel) -> str:
    return hashlib.sha256(dumps_model(model).encode("utf-8")).hexdigest()[:16]
