"""Self-describing JSON documents for fitted models.

Floats are written with ``repr`` precision by the json module, so a
save/load round trip reproduces every array bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import KfrnnModel, KnnModel
from .classifier import FgacModel
from .connectives import TripletSpec
from .relations import SimilarityConfig, Table
from .solver import Loss

FORMAT = "fgac-model"
VERSION = 1


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _table(t: Table) -> dict:
    return {"numeric": t.numeric.tolist(), "nominal": t.nominal.tolist(),
            "shape": [len(t), t.numeric.shape[1], t.nominal.shape[1]]}


def _untable(d: dict) -> Table:
    n, p, q = d["shape"]
    return Table(np.array(d["numeric"], dtype=float).reshape(n, p),
                 np.array(d["nominal"], dtype=np.int64).reshape(n, q))


def model_to_dict(model) -> dict:
    if not isinstance(model, (FgacModel, KnnModel, KfrnnModel)):
        raise TypeError(f"cannot serialise {type(model).__name__}")
    doc = {"format": FORMAT, "version": VERSION, "preprocessing": model.preprocessing,
           "classes": list(model.classes), "class_labels": model.class_labels.tolist(),
           "training": _table(model.training), "similarity": model.similarity.to_dict()}
    if isinstance(model, FgacModel):
        doc.update(family="fgac", triplet=model.triplet.to_dict(),
                   loss={"kind": model.loss.kind, "p": model.loss.p}, nn=model.nn,
                   binary_path=model.binary_path, beta=model.beta.tolist(),
                   memberships=model.memberships.tolist(), stats=model.stats)
    elif isinstance(model, KnnModel):
        doc.update(family="knn", k=model.k)
    else:
        doc.update(family="kfrnn", scheme=model.scheme, truncation=model.truncation,
                   triplet=model.triplet.to_dict())
    return _plain(doc)


def model_from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise ValueError("not a model document")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported model document version {doc.get('version')}")
    training = _untable(doc["training"])
    y = np.array(doc["class_labels"], dtype=np.int64)
    classes = tuple(doc["classes"])
    sim = SimilarityConfig.from_dict(doc["similarity"])
    family = doc["family"]
    if family == "fgac":
        k = len(classes)
        return FgacModel(sim, TripletSpec.from_dict(doc["triplet"]), Loss(**doc["loss"]), float(doc["nn"]),
                         bool(doc["binary_path"]), training, y, classes,
                         np.array(doc["beta"], dtype=float),
                         np.array(doc["memberships"], dtype=float).reshape(k, len(y)),
                         doc.get("preprocessing"), doc.get("stats", {}))
    if family == "knn":
        return KnnModel(int(doc["k"]), training, y, classes, sim, doc.get("preprocessing"))
    if family == "kfrnn":
        return KfrnnModel(training, y, classes, sim, doc["scheme"], doc["truncation"],
                          TripletSpec.from_dict(doc["triplet"]), doc.get("preprocessing"))
    raise ValueError(f"unknown model family {family!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path} is not a valid model document: {exc}") from exc
    return model_from_dict(doc)
