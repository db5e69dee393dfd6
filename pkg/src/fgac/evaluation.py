"""Cross-validated evaluation, grid search and the nn approximation study."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .baselines import KNN_GRID, TRUNCATION_GRID, kfrnn_fit, kfrnn_predict, knn_fit, knn_predict
from .classifier import FitConfig, OwaPredictionConfig, fit, predict_class
from .connectives import LUKASIEWICZ, TripletSpec
from .data import Dataset, oversample, preprocess
from .relations import RelationMatrix, SimilarityConfig, pairwise_distance, similarity_from_distance
from .solver import Loss, assemble_multiclass, solve

log = logging.getLogger(__name__)

GAMMA_GRID = (0.5, 0.7, 0.8, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0)
FAMILIES = ("fgac", "knn", "kfrnn")


def balanced_accuracy(truth, predicted, classes: Optional[Sequence[int]] = None) -> float:
    """Unweighted mean of per-class recalls over ``classes`` (default: classes in ``truth``)."""
    t = np.asarray(truth)
    p = np.asarray(predicted)
    if t.shape != p.shape:
        raise ValueError("truth and predictions differ in length")
    if not len(t):
        raise ValueError("empty truth vector")
    labels = np.unique(t) if classes is None else np.asarray(classes)
    recalls = []
    for c in labels:
        mask = t == c
        if not mask.any():
            raise ValueError(f"class {c} does not occur in the truth vector")
        recalls.append(np.mean(p[mask] == c))
    return float(np.mean(recalls))


@dataclass
class EvalConfig:
    family: str = "fgac"
    folds: int = 5
    seed: int = 0
    grid: Optional[tuple] = None
    metric: str = "balanced_accuracy"
    oversample: bool = True
    nn: float = 1.0
    nested: bool = False
    loss: Loss = Loss("mse")
    similarity: str = "euclidean"
    triplet: TripletSpec = LUKASIEWICZ
    owa: Optional[OwaPredictionConfig] = None
    gamma: float = 1.0  # fixed gamma for kfrnn

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if self.folds < 2:
            raise ValueError("need at least two folds")
        if self.metric != "balanced_accuracy":
            raise ValueError("only balanced_accuracy is supported")
        if self.grid is None:
            self.grid = {"fgac": GAMMA_GRID, "knn": KNN_GRID, "kfrnn": TRUNCATION_GRID}[self.family]
        self.grid = tuple(self.grid)
        if not self.grid:
            raise ValueError("empty hyperparameter grid")


@dataclass
class CVResult:
    family: str
    grid: tuple
    scores: np.ndarray  # candidates x folds (inner scores in nested mode are not kept)
    best: object
    fold_scores: np.ndarray
    chosen: list
    nested: bool
    folds: int
    seconds: float = 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    def candidate_means(self):
        return {str(g): float(m) for g, m in zip(self.grid, self.scores.mean(axis=1))} if self.scores.size else {}

    def to_dict(self) -> dict:
        return {"family": self.family, "grid": [str(g) for g in self.grid], "best": str(self.best),
                "mean": self.mean, "fold_scores": self.fold_scores.tolist(),
                "chosen": [str(c) for c in self.chosen], "nested": self.nested, "folds": self.folds,
                "candidate_means": self.candidate_means(), "seconds": self.seconds}


def fold_seed(seed: int, *key: int) -> np.random.SeedSequence:
    """Counter-based sub-seed: the same (seed, key) always gives the same stream."""
    return np.random.SeedSequence(seed, spawn_key=tuple(key))


def _folds(y, n_folds, seed):
    smallest = min(c for c in np.bincount(y) if c > 0)
    if n_folds > smallest:
        log.warning("reducing folds from %d to %d (smallest class size)", n_folds, smallest)
        n_folds = smallest
    if n_folds < 2:
        raise ValueError("a class has fewer than two instances; cannot cross-validate")
    rs = int(fold_seed(seed, 0).generate_state(1)[0])
    skf = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=rs)
    return list(skf.split(np.zeros(len(y)), y)), n_folds


class _Split:
    """Preprocessed and (optionally) oversampled training/test portions of one split."""

    def __init__(self, data: Dataset, train, test, cfg: EvalConfig, rng_key):
        pre = preprocess(data, train)
        y_tr = data.target[train]
        if cfg.oversample:
            rows = oversample(y_tr, fold_seed(cfg.seed, *rng_key))
        else:
            rows = np.arange(len(train))
        tr_table = pre.transform(data.frame.iloc[train])
        self.train = tr_table.take(rows)
        self.y_train = y_tr[rows]
        self.test = pre.transform(data.frame.iloc[test])
        self.y_test = data.target[test]
        self.n_classes = len(data.classes)
        self.sim = SimilarityConfig(kind=cfg.similarity, q_count=pre.q_count)
        self._d_train = self._d_test = None

    def distances(self):
        if self._d_train is None:
            self._d_train = pairwise_distance(self.train, self.train, self.sim)
            self._d_test = pairwise_distance(self.test, self.train, self.sim)
        return self._d_train, self._d_test


def _score_candidates(split: _Split, cfg: EvalConfig) -> list:
    """Balanced accuracy on the split's test part for every grid value."""
    classes = tuple(range(split.n_classes))
    d_tr, d_te = split.distances()
    scores = []
    for g in cfg.grid:
        if cfg.family == "fgac":
            sim = SimilarityConfig(gamma=float(g), kind=cfg.similarity, q_count=split.sim.q_count)
            rel = RelationMatrix(similarity_from_distance(d_tr, sim.gamma))
            model = fit(split.train, split.y_train, FitConfig(sim, cfg.triplet, cfg.loss, cfg.nn),
                        classes=classes, relation=rel)
            r_te = similarity_from_distance(d_te, sim.gamma)
            pred, _ = predict_class(model, None, cfg.owa, relations=(r_te, r_te))
        elif cfg.family == "knn":
            k = min(int(g), len(split.y_train))
            model = knn_fit(split.train, split.y_train, k, split.sim, classes)
            pred = knn_predict(model, split.test, distances=d_te)
        else:
            sim = SimilarityConfig(gamma=cfg.gamma, kind=cfg.similarity, q_count=split.sim.q_count)
            model = kfrnn_fit(split.train, split.y_train, sim, "additive", g, cfg.triplet, classes)
            pred, _ = kfrnn_predict(model, split.test, relation=similarity_from_distance(d_te, cfg.gamma))
        scores.append(balanced_accuracy(split.y_test, pred))
    return scores


def cross_validate(data: Dataset, cfg: EvalConfig) -> CVResult:
    """Stratified k-fold evaluation with grid search.

    Default mode scores every candidate on every fold and reports the per-fold
    scores of the candidate with the best mean (first in grid order on ties).
    ``nested`` instead picks the candidate per outer fold by an inner
    cross-validation on that fold's training part.  Scaling statistics and
    oversampling come from training portions only.
    """
    start = time.perf_counter()
    y = data.target
    if len(np.unique(y)) < 2:
        raise ValueError("need at least two classes")
    splits, n_folds = _folds(y, cfg.folds, cfg.seed)
    if not cfg.nested:
        table = np.array([_score_candidates(_Split(data, tr, te, cfg, (1, f)), cfg)
                          for f, (tr, te) in enumerate(splits)]).T
        best = int(np.argmax(table.mean(axis=1)))
        return CVResult(cfg.family, cfg.grid, table, cfg.grid[best], table[best],
                        [cfg.grid[best]] * n_folds, False, n_folds, time.perf_counter() - start)

    outer_scores, chosen = [], []
    for f, (tr, te) in enumerate(splits):
        inner_y = y[tr]
        inner, n_inner = _folds(inner_y, cfg.folds, int(fold_seed(cfg.seed, 2, f).generate_state(1)[0]))
        table = np.array([_score_candidates(_Split(data, tr[itr], tr[ite], cfg, (3, f, i)), cfg)
                          for i, (itr, ite) in enumerate(inner)]).T
        best = cfg.grid[int(np.argmax(table.mean(axis=1)))]
        chosen.append(best)
        one = EvalConfig(**{**cfg.__dict__, "grid": (best,)})
        outer_scores.append(_score_candidates(_Split(data, tr, te, one, (1, f)), one)[0])
    values, counts = np.unique(np.array([str(c) for c in chosen]), return_counts=True)
    most = values[np.argmax(counts)]
    best = next(c for c in chosen if str(c) == most)
    return CVResult(cfg.family, cfg.grid, np.zeros((0, 0)), best, np.array(outer_scores), chosen,
                    True, n_folds, time.perf_counter() - start)


# -- approximation study -------------------------------------------------------

@dataclass
class ApproxRow:
    similarity: str
    loss: str
    gamma: float
    nn: float
    difference: float
    seconds: float
    time_ratio: float
    objective: float
    constraints: int


def approx_study(data: Dataset, gammas: Sequence[float], nns: Sequence[float],
                 losses: Sequence[str] = ("mse",), similarities: Sequence[str] = ("euclidean",),
                 triplet: TripletSpec = LUKASIEWICZ, repeats: int = 1) -> list:
    """Mean absolute difference and time ratio of nn-reduced approximations versus nn=1.

    The whole dataset is scaled once; each configuration solves the
    multi-class problem.  Reported times are the fastest of ``repeats``
    assemble-and-solve runs.
    """
    nns = sorted(set(float(v) for v in nns), reverse=True)
    if nns[0] != 1.0:
        raise ValueError("the nn list must include 1")
    pre = preprocess(data)
    table = pre.transform(data.frame)
    rows = []
    for sim_kind in similarities:
        base = SimilarityConfig(kind=sim_kind, q_count=pre.q_count)
        dist = pairwise_distance(table, table, base)
        for loss_name in losses:
            loss = Loss.parse(loss_name)
            for g in gammas:
                r = similarity_from_distance(dist, float(g))
                ref = ref_time = None
                for nn in nns:
                    best_t = np.inf
                    for _ in range(max(1, repeats)):
                        t0 = time.perf_counter()
                        problem = assemble_multiclass(data.target, r, triplet, loss, nn)
                        sol = solve(problem)
                        best_t = min(best_t, time.perf_counter() - t0)
                    beta = triplet.phi_inv(sol.alpha)
                    if ref is None:
                        ref, ref_time = beta, best_t
                    rows.append(ApproxRow(sim_kind, str(loss), float(g), nn,
                                          float(np.mean(np.abs(beta - ref))), best_t,
                                          best_t / ref_time if ref_time > 0 else 1.0,
                                          sol.objective, int(sol.solver_stats.get("constraints", 0))))
    return rows
