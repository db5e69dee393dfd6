"""Shared builders for the test-suite: random tables, small problems, fitted fixtures."""
from functools import lru_cache

import numpy as np

from fgac.classifier import FitConfig, fit
from fgac.connectives import LUKASIEWICZ
from fgac.data import load_csv, preprocess
from fgac.relations import SimilarityConfig, Table
from fgac.solver import Loss

DATASETS = ("iris", "wisconsin", "heart", "haberman", "bupa", "breast", "saheart")


def random_table(rng, n, p_num=3, p_nom=0, n_cats=3, integer=False):
    """Unit-range numeric columns (optionally on a coarse grid) plus nominal codes."""
    num = rng.random((n, p_num))
    if integer:
        num = np.round(num * 4) / 4
    nom = rng.integers(0, n_cats, (n, p_nom))
    return Table(num, nom)


def euclid_relation(points, gamma):
    """Independent reference: max(1 - gamma * ||u - v|| / sqrt(p), 0) on numeric points."""
    p = points.shape[1]
    d = np.sqrt(((points[:, None, :] - points[None, :, :]) ** 2).sum(-1)) / np.sqrt(p)
    return np.maximum(1.0 - gamma * d, 0.0)


@lru_cache(maxsize=None)
def dataset(name):
    return load_csv(name)


@lru_cache(maxsize=None)
def prepared(name):
    """(dataset, preprocessor, full table) for a bundled dataset."""
    data = dataset(name)
    pre = preprocess(data)
    return data, pre, pre.transform(data.frame)


@lru_cache(maxsize=None)
def fitted(name, gamma=1.0, loss="mse", binary_path=False, exponent=1.0, kind="euclidean"):
    from fgac.connectives import TripletSpec
    data, pre, table = prepared(name)
    sim = SimilarityConfig(gamma=gamma, kind=kind, q_count=pre.q_count)
    spec = LUKASIEWICZ if exponent == 1.0 else TripletSpec(exponent)
    cfg = FitConfig(sim, spec, Loss.parse(loss), 1.0, binary_path)
    return fit(table, data.target, cfg, classes=data.classes, preprocessing=pre.to_dict())


def random_queries(rng, model, count, spread=0.15):
    """Mix of jittered training instances and uniform points in the scaled cube."""
    tr = model.training
    half = count // 2
    pick = rng.integers(0, len(tr), half)
    near = tr.numeric[pick] + rng.normal(0, spread, (half, tr.numeric.shape[1]))
    far = rng.uniform(-0.1, 1.1, (count - half, tr.numeric.shape[1]))
    num = np.vstack([near, far])
    if tr.nominal.shape[1]:
        hi = tr.nominal.max(axis=0) + 1
        nom = np.vstack([tr.nominal[pick], rng.integers(0, hi, (count - half, len(hi)))])
    else:
        nom = np.zeros((count, 0), dtype=np.int64)
    return Table(num, nom)
