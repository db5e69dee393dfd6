"""Nearest-neighbour baselines: majority-vote kNN and OWA fuzzy-rough NN (kFRNN)."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .connectives import LUKASIEWICZ, TripletSpec, apply_i, apply_t, make_owa_weights, owa_rows
from .relations import SimilarityConfig, Table, cross_relation, pairwise_distance

TRUNCATION_GRID = (None, 1, 3, 5, 10, 15, 20, 25, 30, 40, 50)
KNN_GRID = (1, 3, 5, 7, 10, 15, 20, 25, 30, 40, 50)


@dataclass(frozen=True)
class KnnModel:
    k: int
    training: Table
    class_labels: np.ndarray
    classes: tuple
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    preprocessing: Optional[dict] = None

    def __post_init__(self):
        if not 1 <= self.k <= len(self.class_labels):
            raise ValueError(f"k must lie in [1, {len(self.class_labels)}]")


def knn_fit(table: Table, class_labels, k: int, similarity: SimilarityConfig = SimilarityConfig(),
            classes=None, preprocessing=None) -> KnnModel:
    y = np.asarray(class_labels, dtype=np.int64)
    classes = tuple(range(int(y.max()) + 1)) if classes is None else tuple(classes)
    return KnnModel(k, table, y, classes, similarity, preprocessing)


def knn_predict(model: KnnModel, queries: Table, distances: Optional[np.ndarray] = None) -> np.ndarray:
    """Majority class of the ``k`` nearest training instances.

    Distance ties at the cut-off go to the lower training index; vote ties to
    the lowest class id.
    """
    d = pairwise_distance(queries, model.training, model.similarity) if distances is None else distances
    nb = np.argsort(d, axis=1, kind="stable")[:, :model.k]
    votes = np.zeros((len(d), len(model.classes)), dtype=np.int64)
    np.add.at(votes, (np.repeat(np.arange(len(d)), model.k), model.class_labels[nb].ravel()), 1)
    return np.argmax(votes, axis=1)


@dataclass(frozen=True)
class KfrnnModel:
    training: Table
    class_labels: np.ndarray
    classes: tuple
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    scheme: str = "additive"
    truncation: Optional[int] = None
    triplet: TripletSpec = LUKASIEWICZ
    preprocessing: Optional[dict] = None


def kfrnn_fit(table: Table, class_labels, similarity: SimilarityConfig = SimilarityConfig(),
              scheme: str = "additive", truncation: Optional[int] = None,
              triplet: TripletSpec = LUKASIEWICZ, classes=None, preprocessing=None) -> KfrnnModel:
    y = np.asarray(class_labels, dtype=np.int64)
    classes = tuple(range(int(y.max()) + 1)) if classes is None else tuple(classes)
    return KfrnnModel(table, y, classes, similarity, scheme, truncation, triplet, preprocessing)


def _kfrnn_weights(model: KfrnnModel, n: int):
    if model.scheme == "strict":
        return (make_owa_weights("strict_min", n, "lower"), make_owa_weights("strict_max", n, "upper"))
    k = None if model.truncation is None else min(model.truncation, n)
    lower = make_owa_weights(model.scheme, n, "lower", k)
    return lower, lower.complement()


def kfrnn_degrees(model: KfrnnModel, queries: Table, relation: Optional[np.ndarray] = None,
                  exclude: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-class degree ``(OWA-lower + OWA-upper) / 2`` of the crisp class sets.

    ``exclude[i]`` names a training index left out of query ``i``'s reference
    set (a query that is itself a training instance); ``-1`` keeps all.
    """
    r = cross_relation(queries, model.training, model.similarity).degrees if relation is None else relation
    n = r.shape[1]
    spec = model.triplet
    out = np.empty((len(r), len(model.classes)))
    if exclude is not None and (np.asarray(exclude) >= 0).any():
        for i, (row, ex) in enumerate(zip(r, exclude)):
            keep = np.arange(n) != ex
            sub = KfrnnModel(model.training.take(keep), model.class_labels[keep], model.classes,
                             model.similarity, model.scheme, model.truncation, spec)
            out[i] = kfrnn_degrees(sub, None, relation=row[keep][None, :])[0]
        return out
    w_lower, w_upper = _kfrnn_weights(model, n)
    for k in range(len(model.classes)):
        member = (model.class_labels == k).astype(float)[None, :]
        lower = owa_rows(w_lower.values, apply_i(spec, r, member))
        upper = owa_rows(w_upper.values, apply_t(spec, r, member))
        out[:, k] = 0.5 * (lower + upper)
    return out


def kfrnn_predict(model: KfrnnModel, queries: Table, relation: Optional[np.ndarray] = None):
    """``(class ids, degree matrix)``; arg-max with lowest-id ties."""
    deg = kfrnn_degrees(model, queries, relation)
    return np.argmax(deg, axis=1), deg
