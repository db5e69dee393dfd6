"""Fuzzy granular approximation classifier.

Training solves one granular approximation problem and stores, for every class
``k``, the fitted memberships ``A_k(u)`` of all training instances.  A query
``q`` then gets an interval per class::

    lower_k(q) = max_{u in k}  T(R(q, u), A_k(u))
    upper_k(q) = min_{u not in k} I(R(u, q), A_k(u)) = N(max_{u not in k} T(R(u, q), N(A_k(u))))

and the predicted degree is the N-invariant average of the two bounds.  The
upper bound is evaluated in its second form, which is also the strength of the
strongest argument against the class, so bounds and explanations agree
exactly.  OWA-softened bounds replace the max/min by OWA operators over the
whole training set.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .connectives import (LUKASIEWICZ, OwaWeights, TripletSpec, apply_avg, apply_n, apply_t,
                          make_owa_weights, owa_rows)
from .relations import RelationMatrix, SimilarityConfig, Table, cross_relation, relation_matrix
from .solver import Loss, assemble_binary, assemble_multiclass, solve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitConfig:
    """Training configuration.

    ``binary_path`` selects the dedicated two-class formulation (needed for a
    quantile loss with ``p != 0.5``); otherwise every problem, including the
    two-class one, goes through the multi-class formulation.
    """

    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    triplet: TripletSpec = LUKASIEWICZ
    loss: Loss = Loss("mse")
    nn: float = 1.0
    binary_path: bool = False


@dataclass(frozen=True)
class OwaPredictionConfig:
    """OWA weights for softened bounds.

    ``scheme`` names the lower weights ``W_L`` (``strict`` means min/max);
    ``W_U`` is always the complement (reverse) of ``W_L``.  ``truncation``
    keeps only the ``k`` most influential positions and is clipped to the
    training size.
    """

    scheme: str = "additive"
    truncation: Optional[int] = None
    enabled: bool = True

    @classmethod
    def parse(cls, text: str) -> "OwaPredictionConfig":
        """``scheme`` or ``scheme:k``."""
        scheme, _, k = text.partition(":")
        return cls(scheme, int(k) if k and k != "all" else None)

    def weights(self, n: int):
        """``(W_L, W_U)`` for a training set of size ``n``."""
        scheme = "strict_min" if self.scheme == "strict" else self.scheme
        k = None if self.truncation is None else min(self.truncation, n)
        w_lower = make_owa_weights(scheme, n, "lower", k)
        return w_lower, w_lower.complement()

    def to_dict(self):
        return {"scheme": self.scheme, "truncation": self.truncation, "enabled": self.enabled}


@dataclass(frozen=True)
class FgacModel:
    similarity: SimilarityConfig
    triplet: TripletSpec
    loss: Loss
    nn: float
    binary_path: bool
    training: Table
    class_labels: np.ndarray
    classes: tuple
    beta: np.ndarray
    memberships: np.ndarray
    preprocessing: Optional[dict] = None
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def __len__(self):
        return len(self.beta)


@dataclass
class PredictionBounds:
    lower: np.ndarray
    upper: np.ndarray
    lower_witness: np.ndarray
    upper_witness: np.ndarray


@dataclass
class Argument:
    instance: int
    observed_class: int
    similarity: float
    beta: float
    strength: float


@dataclass
class ExplanationReport:
    query: int
    target_class: int
    degrees: list
    decision: int
    lower: float
    upper: float
    arguments_for: list
    arguments_against: list
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "query": self.query, "class": self.target_class, "degrees": self.degrees,
            "decision": self.decision, "lower": self.lower, "upper": self.upper,
            "arguments_for": [vars(a) for a in self.arguments_for],
            "arguments_against": [vars(a) for a in self.arguments_against],
            "note": self.note,
        }

    def to_text(self, class_names=None) -> str:
        name = (lambda k: str(class_names[k])) if class_names is not None else str
        lines = [f"query {self.query}: decision {name(self.decision)}",
                 f"class {name(self.target_class)}: degree {self.degrees[self.target_class]:.4f} "
                 f"in [{self.lower:.4f}, {self.upper:.4f}]",
                 "arguments for:"]
        for a in self.arguments_for:
            lines.append(f"  #{a.instance} (class {name(a.observed_class)}, similarity {a.similarity:.3f}, "
                         f"beta {a.beta:.3f}) strength {a.strength:.4f}")
        lines.append("arguments against:")
        for a in self.arguments_against:
            lines.append(f"  #{a.instance} (class {name(a.observed_class)}, similarity {a.similarity:.3f}, "
                         f"beta {a.beta:.3f}) strength {a.strength:.4f}")
        if self.note:
            lines.append(f"note: {self.note}")
        return "\n".join(lines)


# -- training -------------------------------------------------------------------

def class_memberships(r: np.ndarray, y: np.ndarray, beta: np.ndarray, spec: TripletSpec,
                      n_classes: int) -> np.ndarray:
    """``A_k(u) = beta_u`` on class ``k`` and ``max_{v in k} T(R(u, v), beta_v)`` elsewhere."""
    out = np.empty((n_classes, len(beta)))
    for k in range(n_classes):
        in_k = y == k
        out[k] = apply_t(spec, r[:, in_k], beta[in_k][None, :]).max(axis=1, initial=0.0)
        out[k, in_k] = beta[in_k]
    return out


def fit(table: Table, class_labels, config: FitConfig = FitConfig(), classes=None,
        preprocessing: Optional[dict] = None, relation: Optional[RelationMatrix] = None) -> FgacModel:
    """Fit the classifier on a preprocessed table with class ids ``0..K-1``.

    ``relation`` may pass a precomputed training relation (it must come from
    ``config.similarity``); cross-validation reuses one distance matrix this way.
    """
    y = np.asarray(class_labels, dtype=np.int64)
    if len(y) != len(table):
        raise ValueError("labels and table are not aligned")
    if len(y) < 2:
        raise ValueError("need at least two training instances")
    present = np.unique(y)
    if len(present) < 2:
        raise ValueError("need at least two classes in the training data")
    n_classes = int(y.max()) + 1 if classes is None else len(classes)
    if y.min() < 0 or y.max() >= n_classes:
        raise ValueError("class ids must lie in 0..K-1")
    if not config.similarity.symmetric:
        raise ValueError("the classifier needs a symmetric similarity relation")
    spec = config.triplet
    if spec.exponent < 1.0:
        # 1 - gamma*d is Lukasiewicz-transitive, which implies T_{L,phi}-transitivity
        # only for c >= 1; the fitted memberships may then not be granular
        log.warning("phi exponent %g < 1: the similarity relation is not guaranteed to be "
                    "transitive for this triplet", spec.exponent)
    rel = relation if relation is not None else relation_matrix(table, config.similarity)
    r = rel.degrees

    if config.binary_path:
        if n_classes != 2:
            raise ValueError("the binary path needs exactly two classes")
        problem = assemble_binary(y, r, spec, config.loss, config.nn)
        sol = solve(problem)
        pos = spec.phi_inv(np.clip(sol.alpha, 0.0, 1.0))
        memberships = np.vstack([apply_n(spec, pos), pos])
        beta = memberships[y, np.arange(len(y))]
    else:
        if config.loss.kind == "quantile" and config.loss.p != 0.5:
            raise ValueError("quantile losses with p != 0.5 need binary_path=True")
        problem = assemble_multiclass(y, r, spec, config.loss, config.nn)
        sol = solve(problem)
        beta = spec.phi_inv(np.clip(sol.alpha, 0.0, 1.0))
        memberships = class_memberships(r, y, beta, spec, n_classes)

    classes = tuple(range(n_classes)) if classes is None else tuple(classes)
    stats = dict(sol.solver_stats, objective=sol.objective, feasibility_residual=sol.feasibility_residual)
    return FgacModel(config.similarity, spec, config.loss, config.nn, config.binary_path,
                     table, y, classes, beta, memberships, preprocessing, stats)


# -- prediction -----------------------------------------------------------------

def query_relations(model, queries: Table):
    """``(R(q, u), R(u, q))`` as query-by-training arrays."""
    r_qu = cross_relation(queries, model.training, model.similarity).degrees
    if model.similarity.symmetric:
        return r_qu, r_qu
    return r_qu, cross_relation(model.training, queries, model.similarity).degrees.T


def _check_class(model, k):
    if not 0 <= k < model.n_classes:
        raise IndexError(f"class id {k} out of range 0..{model.n_classes - 1}")


def against_strengths(model, r_uq: np.ndarray, k: int) -> np.ndarray:
    """``T(R(u, q), N(A_k(u)))`` for every query and training instance."""
    a = model.memberships[k]
    return apply_t(model.triplet, r_uq, apply_n(model.triplet, a)[None, :])


def membership_bounds(model: FgacModel, r_qu: np.ndarray, r_uq: np.ndarray, k: int,
                      scan: str = "restricted") -> PredictionBounds:
    """Strict bounds for class ``k`` on a batch of queries.

    ``scan="restricted"`` maximises the lower bound over class ``k`` only and
    minimises the upper bound over the other classes only; ``scan="full"``
    uses every training instance for both.  Witnesses are the lowest-index
    training instances attaining the extrema.
    """
    _check_class(model, k)
    r_qu = np.atleast_2d(r_qu)
    r_uq = np.atleast_2d(r_uq)
    a = model.memberships[k]
    if scan == "restricted":
        pro = np.flatnonzero(model.class_labels == k)
        con = np.flatnonzero(model.class_labels != k)
    elif scan == "full":
        pro = con = np.arange(len(a))
    else:
        raise ValueError("scan must be 'restricted' or 'full'")
    spec = model.triplet
    v_for = apply_t(spec, r_qu[:, pro], a[pro][None, :])
    i_for = np.argmax(v_for, axis=1)
    lower = v_for[np.arange(len(v_for)), i_for]
    v_against = apply_t(spec, r_uq[:, con], apply_n(spec, a[con])[None, :])
    i_against = np.argmax(v_against, axis=1)
    upper = apply_n(spec, v_against[np.arange(len(v_against)), i_against])
    return PredictionBounds(lower, np.asarray(upper, float), pro[i_for], con[i_against])


def owa_bounds(model: FgacModel, r_qu: np.ndarray, r_uq: np.ndarray, k: int,
               owa: OwaPredictionConfig):
    """OWA-softened ``(lower, upper)`` over the whole training set."""
    _check_class(model, k)
    w_lower, w_upper = owa.weights(len(model))
    spec = model.triplet
    a = model.memberships[k]
    v_for = apply_t(spec, np.atleast_2d(r_qu), a[None, :])
    v_upper = apply_n(spec, apply_t(spec, np.atleast_2d(r_uq), apply_n(spec, a)[None, :]))
    return owa_rows(w_upper.values, v_for), owa_rows(w_lower.values, v_upper)


def predict_degrees(model: FgacModel, queries: Table, owa: Optional[OwaPredictionConfig] = None,
                    relations=None) -> np.ndarray:
    """Query-by-class matrix of predicted degrees."""
    r_qu, r_uq = relations if relations is not None else query_relations(model, queries)
    out = np.empty((len(r_qu), model.n_classes))
    use_owa = owa is not None and owa.enabled
    for k in range(model.n_classes):
        if use_owa:
            lo, up = owa_bounds(model, r_qu, r_uq, k, owa)
        else:
            b = membership_bounds(model, r_qu, r_uq, k)
            lo, up = b.lower, b.upper
        out[:, k] = apply_avg(model.triplet, lo, up)
    return out


def predict_degree(model: FgacModel, queries: Table, k: int,
                   owa: Optional[OwaPredictionConfig] = None) -> np.ndarray:
    _check_class(model, k)
    return predict_degrees(model, queries, owa)[:, k]


def decide(model: FgacModel, degrees: np.ndarray) -> np.ndarray:
    """Class decision from a query-by-class degree matrix.

    Binary-path models predict class 1 iff its degree exceeds the threshold
    ``phi^{-1}(0.5)``; otherwise the arg-max class wins, lowest id on ties.
    """
    if model.binary_path:
        return (degrees[:, 1] > model.triplet.threshold).astype(np.int64)
    return np.argmax(degrees, axis=1)


def predict_class(model: FgacModel, queries: Table, owa: Optional[OwaPredictionConfig] = None,
                  relations=None):
    """``(class ids, degree matrix)`` for a batch of queries."""
    deg = predict_degrees(model, queries, owa, relations)
    return decide(model, deg), deg


# -- explanation ----------------------------------------------------------------

def explain(model: FgacModel, query: Table, k: int, top_n: int = 5, query_id: int = 0) -> ExplanationReport:
    """Ranked training instances supporting and opposing class ``k`` for one query.

    The supporting arguments come from class ``k`` with strength
    ``T(R(q, u), A_k(u))``; the opposing ones from the other classes with
    strength ``T(R(u, q), N(A_k(u)))``.  These are exactly the values whose
    extrema define the strict bounds.
    """
    _check_class(model, k)
    if len(query) != 1:
        raise ValueError("explain takes a single query row")
    note = ""
    if top_n < 1:
        raise ValueError("top_n must be positive")
    if top_n > len(model):
        note = f"top_n={top_n} clipped to the training size {len(model)}"
        top_n = len(model)
    r_qu, r_uq = query_relations(model, query)
    decision, deg = predict_class(model, query, relations=(r_qu, r_uq))
    bounds = membership_bounds(model, r_qu, r_uq, k)
    spec = model.triplet
    a = model.memberships[k]
    y = model.class_labels

    pro = np.flatnonzero(y == k)
    s_for = apply_t(spec, r_qu[0, pro], a[pro])
    con = np.flatnonzero(y != k)
    s_against = apply_t(spec, r_uq[0, con], apply_n(spec, a[con]))

    def ranked(ids, strengths, sims):
        order = np.argsort(-strengths, kind="stable")[:top_n]
        return [Argument(int(ids[i]), int(y[ids[i]]), float(sims[ids[i]]), float(model.beta[ids[i]]),
                         float(strengths[i])) for i in order]

    return ExplanationReport(
        query=query_id, target_class=k, degrees=[float(d) for d in deg[0]], decision=int(decision[0]),
        lower=float(bounds.lower[0]), upper=float(bounds.upper[0]),
        arguments_for=ranked(pro, s_for, r_qu[0]),
        arguments_against=ranked(con, s_against, r_uq[0]),
        note=note,
    )
