"""Fuzzy similarity and dominance relations between instances.

Instances are given as a :class:`Table`: a float matrix of numeric attributes
plus an integer matrix of nominal category codes.  Numeric differences are
divided by the attribute range; a nominal attribute contributes 0 when the
categories agree and 1 otherwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .connectives import LUKASIEWICZ, TripletSpec, apply_t

log = logging.getLogger(__name__)

KINDS = ("supremum", "euclidean", "dominance")


@dataclass
class Table:
    """Preprocessed instance table."""

    numeric: np.ndarray
    nominal: np.ndarray = None

    def __post_init__(self):
        self.numeric = np.asarray(self.numeric, dtype=float)
        if self.numeric.ndim == 1:
            self.numeric = self.numeric[:, None]
        if self.nominal is None:
            self.nominal = np.zeros((len(self.numeric), 0), dtype=np.int64)
        self.nominal = np.asarray(self.nominal, dtype=np.int64)
        if self.nominal.ndim == 1:
            self.nominal = self.nominal[:, None]
        if len(self.nominal) != len(self.numeric):
            raise ValueError("numeric and nominal parts have different row counts")

    def __len__(self):
        return len(self.numeric)

    @property
    def schema(self):
        return (self.numeric.shape[1], self.nominal.shape[1])

    def take(self, idx) -> "Table":
        idx = np.asarray(idx)
        return Table(self.numeric[idx], self.nominal[idx])


@dataclass
class SimilarityConfig:
    """Parameters of the relation.

    ``q_count`` is the attribute count used in the ``1/sqrt(|Q|)`` averaging of
    the Euclidean distance; ``None`` means "numeric plus nominal columns".
    ``ranges`` holds per-numeric-attribute ranges; ``None`` means the data is
    already scaled to unit range.
    """

    gamma: float = 1.0
    kind: str = "euclidean"
    ranges: Optional[np.ndarray] = None
    q_count: Optional[int] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kind not in KINDS:
            raise ValueError(f"unknown similarity kind {self.kind!r}")
        if self.ranges is not None:
            self.ranges = np.asarray(self.ranges, dtype=float)
            if (self.ranges < 0).any():
                raise ValueError("attribute ranges must be non-negative")

    @property
    def symmetric(self) -> bool:
        return self.kind != "dominance"

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "kind": self.kind,
            "ranges": None if self.ranges is None else self.ranges.tolist(),
            "q_count": self.q_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimilarityConfig":
        return cls(gamma=float(d["gamma"]), kind=d["kind"], ranges=d.get("ranges"),
                   q_count=d.get("q_count"))


@dataclass
class RelationMatrix:
    degrees: np.ndarray
    properties: frozenset = field(default_factory=frozenset)

    @property
    def shape(self):
        return self.degrees.shape

    def __getitem__(self, item):
        return self.degrees[item]

    @property
    def T(self) -> "RelationMatrix":
        props = self.properties - {"reflexive"} if self.degrees.shape[0] != self.degrees.shape[1] else self.properties
        return RelationMatrix(self.degrees.T, props)


class ConstantAttributeError(ValueError):
    """An attribute with zero range cannot define a similarity."""


# -- single-attribute relations ----------------------------------------------

def attribute_similarity(config: SimilarityConfig, a, b, range_):
    """``max(1 - gamma * |a - b| / range, 0)``."""
    if not range_ > 0:
        raise ConstantAttributeError("constant attribute (zero range)")
    return np.maximum(1.0 - config.gamma * np.abs(np.asarray(a, float) - b) / range_, 0.0)


def attribute_dominance(config: SimilarityConfig, a, b, range_):
    """``max(min(1 - gamma * (b - a) / range, 1), 0)``; degree to which a dominates b."""
    if not range_ > 0:
        raise ConstantAttributeError("constant attribute (zero range)")
    d = (np.asarray(b, float) - a) / range_
    return np.maximum(np.minimum(1.0 - config.gamma * d, 1.0), 0.0)


# -- whole-table relations ---------------------------------------------------

def _scaled(table: Table, config: SimilarityConfig) -> np.ndarray:
    x = table.numeric
    if config.ranges is None:
        return x
    r = config.ranges
    if len(r) != x.shape[1]:
        raise ValueError("ranges do not match the numeric attribute count")
    keep = r > 0
    if not keep.all():
        log.warning("ignoring %d constant attribute(s)", int((~keep).sum()))
    return x[:, keep] / r[keep]


def q_count(table: Table, config: SimilarityConfig) -> int:
    if config.q_count is not None:
        return config.q_count
    n_num = table.numeric.shape[1] if config.ranges is None else int((config.ranges > 0).sum())
    return n_num + table.nominal.shape[1]


def pairwise_distance(queries: Table, refs: Table, config: SimilarityConfig) -> np.ndarray:
    """Gamma-free distance matrix such that ``R = max(1 - gamma * D, 0)``.

    For the euclidean kind the distance is already divided by ``sqrt(|Q|)``.
    For the dominance kind the entry is the largest scaled amount by which a
    reference exceeds the query (clipped below at 0).
    """
    if queries.schema != refs.schema:
        raise ValueError(f"schema mismatch: {queries.schema} vs {refs.schema}")
    a = _scaled(queries, config)
    b = _scaled(refs, config)
    diff = a[:, None, :] - b[None, :, :]
    nom = queries.nominal[:, None, :] != refs.nominal[None, :, :]
    if config.kind == "supremum":
        d = np.zeros((len(a), len(b)))
        if diff.shape[2]:
            d = np.abs(diff).max(axis=2)
        if nom.shape[2]:
            d = np.maximum(d, nom.any(axis=2).astype(float))
        return d
    if config.kind == "euclidean":
        sq = np.einsum("ijk,ijk->ij", diff, diff) + nom.sum(axis=2)
        q = q_count(queries, config)
        return np.sqrt(sq) / np.sqrt(q) if q > 0 else np.zeros_like(sq)
    # dominance: R(u, v) uses v - u per attribute; nominal attributes ignored
    if nom.shape[2]:
        raise ValueError("dominance relation is defined for numeric attributes only")
    if diff.shape[2] == 0:
        return np.zeros((len(a), len(b)))
    return np.maximum((-diff).max(axis=2), 0.0)


def similarity_from_distance(dist: np.ndarray, gamma: float) -> np.ndarray:
    return np.maximum(1.0 - gamma * dist, 0.0)


def _properties(config: SimilarityConfig) -> frozenset:
    if config.symmetric:
        return frozenset({"reflexive", "symmetric", "t_transitive"})
    return frozenset({"reflexive", "t_transitive"})


def relation_matrix(data: Table, config: SimilarityConfig) -> RelationMatrix:
    """Relation of a table with itself."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    # a - b and b - a are exact negations, so the result is exactly symmetric
    # with a unit diagonal and bit-identical to cross_relation(data, data)
    deg = similarity_from_distance(pairwise_distance(data, data, config), config.gamma)
    return RelationMatrix(deg, _properties(config))


def cross_relation(queries: Table, refs: Table, config: SimilarityConfig) -> RelationMatrix:
    """``R(q, r)`` for every query row and reference row."""
    deg = similarity_from_distance(pairwise_distance(queries, refs, config), config.gamma)
    return RelationMatrix(deg, frozenset())


@dataclass
class TransitivityReport:
    reflexive: list
    symmetric: list
    transitive: list

    @property
    def ok(self) -> bool:
        return not (self.reflexive or self.symmetric or self.transitive)

    def __bool__(self):
        return not self.ok


def verify_t_equivalence(matrix, spec: TripletSpec = LUKASIEWICZ, tol: float = 1e-9,
                         limit: int = 100) -> TransitivityReport:
    """Brute-force check of reflexivity, symmetry and T-transitivity.

    Returns at most ``limit`` offending indices per property; the report is
    falsy when nothing is violated.
    """
    r = matrix.degrees if isinstance(matrix, RelationMatrix) else np.asarray(matrix, float)
    n = r.shape[0]
    if r.shape != (n, n):
        raise ValueError("relation must be square")
    refl = [int(i) for i in np.flatnonzero(np.abs(np.diag(r) - 1.0) > tol)[:limit]]
    sym = [tuple(map(int, p)) for p in np.argwhere(np.triu(np.abs(r - r.T) > tol, 1))[:limit]]
    trans = []
    for v in range(n):
        # T(R(u, v), R(v, w)) <= R(u, w) for all u, w
        lhs = apply_t(spec, r[:, v][:, None], r[v, :][None, :])
        bad = np.argwhere(lhs > r + tol)
        for u, w in bad[: limit - len(trans)]:
            trans.append((int(u), v, int(w)))
        if len(trans) >= limit:
            break
    return TransitivityReport(refl, sym, trans)
