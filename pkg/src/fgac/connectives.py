"""Łukasiewicz-family fuzzy connectives, the averaging operator and OWA.

Every operator works on scalars or numpy arrays and returns the same shape.
A :class:`TripletSpec` bundles the residual triplet ``(T, I, N)`` generated by
the Łukasiewicz t-norm conjugated with an isomorphism ``phi``.  Only the power
family ``phi(x) = x**c`` is provided; ``c = 1`` is the plain Łukasiewicz triplet.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

EPS = np.finfo(float).eps

# phi-space results this close to 0 are rounding noise; phi_inv with c > 1
# would blow them up (sqrt(1e-16) = 1e-8), so they are snapped to 0.
_SNAP = 4 * EPS


class DomainError(ValueError):
    """Raised when a degree lies outside [0, 1]."""


def _check_degree(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if arr.size and (np.isnan(arr).any() or arr.min() < 0.0 or arr.max() > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


@dataclass(frozen=True)
class TripletSpec:
    """Residual triplet ``(T_{L,phi}, I_{L,phi}, N_{L,phi})``.

    Parameters
    ----------
    exponent : float
        ``c`` in ``phi(x) = x**c``.  ``1.0`` gives the identity isomorphism.
    """

    exponent: float = 1.0
    base: str = "lukasiewicz"

    def __post_init__(self):
        if self.base != "lukasiewicz":
            raise ValueError("only the Lukasiewicz base t-norm is supported")
        if not (np.isfinite(self.exponent) and self.exponent > 0):
            raise ValueError("isomorphism exponent must be a positive finite number")

    @property
    def is_identity(self) -> bool:
        return self.exponent == 1.0

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.is_identity else np.power(x, self.exponent)

    def phi_inv(self, y):
        y = np.asarray(y, dtype=float)
        return y if self.is_identity else np.power(y, 1.0 / self.exponent)

    @property
    def threshold(self) -> float:
        """Defuzzification threshold ``phi_N^{-1}(0.5)``."""
        return float(self.phi_inv(0.5))

    def to_dict(self) -> dict:
        return {"base": self.base, "exponent": self.exponent}

    @classmethod
    def from_dict(cls, d: dict) -> "TripletSpec":
        return cls(exponent=float(d.get("exponent", 1.0)), base=d.get("base", "lukasiewicz"))


LUKASIEWICZ = TripletSpec()


# -- raw Łukasiewicz operators on phi-space values (no domain checks) --------

def t_luk(a, b):
    # (max - 1) is exact for max >= 0.5, and T(x, 1) == x exactly
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    return np.maximum(0.0, (hi - 1.0) + lo)


def i_luk(a, b):
    return np.minimum(1.0, (1.0 - a) + b)


def n_luk(a):
    return 1.0 - a


def _snap(t):
    return np.where(t < _SNAP, 0.0, t)


# -- public operators --------------------------------------------------------

def t_norm(spec: TripletSpec, x, y):
    """``phi^{-1}(max(0, phi(x) + phi(y) - 1))``."""
    x = _check_degree(x, "x")
    y = _check_degree(y, "y")
    return _out(apply_t(spec, x, y))


def implicator(spec: TripletSpec, x, y):
    """Residual implicator ``phi^{-1}(min(1, 1 - phi(x) + phi(y)))``."""
    x = _check_degree(x, "x")
    y = _check_degree(y, "y")
    return _out(apply_i(spec, x, y))


def negator(spec: TripletSpec, x):
    """Induced negator ``N(x) = I(x, 0)``; involutive."""
    x = _check_degree(x, "x")
    return _out(apply_n(spec, x))


def averaging(spec: TripletSpec, x, y):
    """N-invariant averaging ``phi^{-1}((phi(x) + phi(y)) / 2)``."""
    x = _check_degree(x, "x")
    y = _check_degree(y, "y")
    return _out(apply_avg(spec, x, y))


# Unchecked array versions used on hot paths.  Inputs must already be in [0, 1].

def apply_t(spec: TripletSpec, x, y):
    if spec.is_identity:
        return t_luk(x, y)
    return spec.phi_inv(_snap(t_luk(spec.phi(x), spec.phi(y))))


def apply_i(spec: TripletSpec, x, y):
    if spec.is_identity:
        return i_luk(x, y)
    return spec.phi_inv(_snap(i_luk(spec.phi(x), spec.phi(y))))


def apply_n(spec: TripletSpec, x):
    if spec.is_identity:
        return n_luk(x)
    return spec.phi_inv(_snap(n_luk(spec.phi(x))))


def apply_avg(spec: TripletSpec, x, y):
    if spec.is_identity:
        return 0.5 * (x + y)
    return spec.phi_inv(0.5 * (spec.phi(x) + spec.phi(y)))


# -- reference t-norms (not usable by the classifier) -------------------------

def reference_t_norm(name: str, x, y):
    """Evaluate one of the common t-norms by name, for comparison only.

    The classifier's LP/QP reductions need a t-norm isomorphic to Łukasiewicz,
    so these are not wired into any model.
    """
    x = _check_degree(x, "x")
    y = _check_degree(y, "y")
    if name == "minimum":
        r = np.minimum(x, y)
    elif name == "product":
        r = x * y
    elif name == "lukasiewicz":
        r = t_luk(x, y)
    elif name == "drastic":
        r = np.where(np.maximum(x, y) == 1.0, np.minimum(x, y), 0.0)
    elif name == "nilpotent_minimum":
        r = np.where(x + y > 1.0, np.minimum(x, y), 0.0)
    else:
        raise ValueError(f"unknown t-norm {name!r}")
    return _out(r)


def reference_implicator(name: str, x, y):
    """R-implicator of :func:`reference_t_norm` ``name``."""
    x = _check_degree(x, "x")
    y = _check_degree(y, "y")
    le = x <= y
    if name == "minimum":
        r = np.where(le, 1.0, y)
    elif name == "product":
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(le, 1.0, y / np.where(x == 0, 1.0, x))
    elif name == "lukasiewicz":
        r = i_luk(x, y)
    elif name == "drastic":
        r = np.where(x == 1.0, y, 1.0)
    elif name == "nilpotent_minimum":
        r = np.where(le, 1.0, np.maximum(1.0 - x, y))
    else:
        raise ValueError(f"unknown t-norm {name!r}")
    return _out(r)


# -- OWA ----------------------------------------------------------------------

OWA_SCHEMES = ("strict_min", "strict_max", "additive", "exponential", "inverse_additive")


@dataclass(frozen=True)
class OwaWeights:
    """OWA weight vector applied to values sorted in descending order."""

    values: np.ndarray
    scheme: str
    direction: str  # "lower" replaces min, "upper" replaces max
    truncation: Optional[int] = None

    def __len__(self):
        return len(self.values)

    def complement(self) -> "OwaWeights":
        other = {"lower": "upper", "upper": "lower"}[self.direction]
        scheme = {"strict_min": "strict_max", "strict_max": "strict_min"}.get(self.scheme, self.scheme)
        return OwaWeights(self.values[::-1].copy(), scheme, other, self.truncation)


def _lower_profile(scheme: str, n: int) -> np.ndarray:
    i = np.arange(1, n + 1, dtype=float)
    if scheme == "strict_min":
        w = np.zeros(n)
        w[-1] = 1.0
    elif scheme == "additive":
        w = 2.0 * i / (n * (n + 1.0))
    elif scheme == "exponential":
        # 2^(i-1) / (2^n - 1) rewritten so large n does not overflow
        w = np.exp2(i - 1 - n) / (1.0 - np.exp2(-float(n)))
    elif scheme == "inverse_additive":
        d_n = np.sum(1.0 / i)
        w = 1.0 / ((n - i + 1.0) * d_n)
    else:
        raise ValueError(f"unknown OWA scheme {scheme!r}")
    return w


def make_owa_weights(scheme: str, n: int, direction: str = "lower",
                     truncation: Optional[int] = None) -> OwaWeights:
    """Build an OWA weight vector of length ``n``.

    ``truncation=k`` keeps only the k most influential positions non-zero
    (last k for lower weights, first k for upper weights); those positions carry
    the scheme's weights for length k.
    """
    if direction not in ("lower", "upper"):
        raise ValueError("direction must be 'lower' or 'upper'")
    if n < 1:
        raise ValueError("OWA weights need n >= 1")
    if scheme not in OWA_SCHEMES:
        raise ValueError(f"unknown OWA scheme {scheme!r}")
    if (scheme == "strict_min" and direction == "upper") or (scheme == "strict_max" and direction == "lower"):
        raise ValueError(f"scheme {scheme!r} cannot be used as {direction} weights")
    if truncation is not None and not (1 <= truncation <= n):
        raise ValueError(f"truncation must be in [1, {n}], got {truncation}")

    base = "strict_min" if scheme == "strict_max" else scheme
    k = n if truncation is None else truncation
    w = np.zeros(n)
    w[n - k:] = _lower_profile(base, k)
    if direction == "upper":
        w = w[::-1].copy()
    return OwaWeights(w, scheme, direction, truncation)


def owa(weights: OwaWeights, values) -> float:
    """``sum_i w_i v_(i)`` with ``v_(i)`` the i-th largest value."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or len(v) != len(weights):
        raise ValueError(f"expected {len(weights)} values, got shape {v.shape}")
    return float(owa_rows(weights.values, v[None, :])[0])


def owa_rows(w: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Row-wise OWA of a 2-D array with a raw weight vector."""
    ordered = -np.sort(-values, axis=1, kind="stable")
    return ordered @ w
