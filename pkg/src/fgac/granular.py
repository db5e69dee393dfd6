"""Granules, granular representability and fuzzy rough approximations."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .connectives import OwaWeights, TripletSpec, apply_i, apply_t, owa_rows
from .relations import RelationMatrix


def _deg(matrix) -> np.ndarray:
    return matrix.degrees if isinstance(matrix, RelationMatrix) else np.asarray(matrix, float)


@dataclass
class Granule:
    center: int
    weight: float
    direction: str
    membership: np.ndarray


def granule(matrix, spec: TripletSpec, u: int, lam: float, direction: str = "forward") -> Granule:
    """Fuzzy granule centred at instance ``u`` with weight ``lam``.

    forward: ``v -> T(R(v, u), lam)``; inverse: ``v -> T(R(u, v), lam)``.
    """
    r = _deg(matrix)
    if not 0 <= u < r.shape[0]:
        raise IndexError(f"instance index {u} out of range")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("granule weight must lie in [0, 1]")
    if direction == "forward":
        col = r[:, u]
    elif direction == "inverse":
        col = r[u, :]
    else:
        raise ValueError("direction must be 'forward' or 'inverse'")
    return Granule(u, lam, direction, apply_t(spec, col, np.full_like(col, lam)))


def gr_violations(membership, matrix, spec: TripletSpec, tol: float = 1e-9) -> np.ndarray:
    """Pairs ``(u, v)`` with ``T(R(v, u), A(u)) > A(v) + tol``."""
    a = np.asarray(membership, float)
    r = _deg(matrix)
    if r.shape != (len(a), len(a)):
        raise ValueError("relation and fuzzy set are not aligned")
    # lhs[v, u] = T(R(v, u), A(u))
    lhs = apply_t(spec, r, a[None, :])
    bad = np.argwhere(lhs > a[:, None] + tol)
    return bad[:, ::-1]


def is_granularly_representable(membership, matrix, spec: TripletSpec, tol: float = 1e-9) -> list:
    """List of violated ``(u, v)`` pairs; empty iff the set is granularly representable."""
    return [tuple(map(int, p)) for p in gr_violations(membership, matrix, spec, tol)]


def lower_approximation(membership, matrix, spec: TripletSpec,
                        weights: Optional[OwaWeights] = None) -> np.ndarray:
    """``lower(A)(u) = min_v I(R(v, u), A(v))``, or OWA with lower weights."""
    a = np.asarray(membership, float)
    r = _deg(matrix)
    # vals[u, v] = I(R(v, u), A(v))
    vals = apply_i(spec, r.T, a[None, :])
    if weights is None:
        return vals.min(axis=1)
    if len(weights) != len(a):
        raise ValueError("OWA weight length does not match the universe size")
    return owa_rows(weights.values, vals)


def upper_approximation(membership, matrix, spec: TripletSpec,
                        weights: Optional[OwaWeights] = None) -> np.ndarray:
    """``upper(A)(u) = max_v T(R(u, v), A(v))``, or OWA with upper weights."""
    a = np.asarray(membership, float)
    r = _deg(matrix)
    vals = apply_t(spec, r, a[None, :])
    if weights is None:
        return vals.max(axis=1)
    if len(weights) != len(a):
        raise ValueError("OWA weight length does not match the universe size")
    return owa_rows(weights.values, vals)
