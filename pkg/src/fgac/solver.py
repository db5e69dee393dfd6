"""Granular approximation problems and their LP/QP solution.

In phi-space the granular representability constraints of the Łukasiewicz
family become linear and involve two variables each:

* binary problems: ``alpha_u - alpha_v + 1 >= R_phi(u, v)``
* multi-class problems: ``alpha_u + alpha_v <= 1 + M_phi(u, v)`` for pairs of
  instances from different observed classes, with ``M_phi = 1 - R_phi``.

Both are solved by :func:`project`, a dual active-set method (Goldfarb-Idnani)
for ``min 1/2 ||x - t||^2`` over such constraints plus the unit box.  The MSE
problems are projections directly.  Linear objectives ``c.x`` are handled by
exact regularization: for small enough ``eps`` the projection of ``t - c/eps``
is the LP optimum closest to ``t``, which is also the tie-break we want among
non-unique LP optima.  Optimality is certified with an NNLS dual check; if the
certificate fails for every ``eps`` tried, HiGHS is used instead.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import qr_delete, solve_triangular
from scipy.linalg.blas import dtpsv
from scipy.optimize import linprog, nnls
from scipy.sparse import csr_matrix

from .connectives import TripletSpec
from .relations import RelationMatrix

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Loss:
    """Loss on phi-scaled memberships: ``mae``, ``quantile`` (with ``p``) or ``mse``."""

    kind: str = "mse"
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in ("mae", "quantile", "mse"):
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.kind == "mae" and self.p != 0.5:
            object.__setattr__(self, "p", 0.5)
        if not 0.0 < self.p < 1.0:
            raise ValueError("quantile level p must lie in (0, 1)")

    @property
    def linear(self) -> bool:
        return self.kind != "mse"

    @classmethod
    def parse(cls, text: str) -> "Loss":
        """``mae``, ``mse`` or ``quantile:p``."""
        if text.startswith("quantile"):
            _, _, p = text.partition(":")
            return cls("quantile", float(p) if p else 0.5)
        return cls(text)

    def __str__(self):
        return f"quantile:{self.p:g}" if self.kind == "quantile" else self.kind

    def value(self, target, approx) -> float:
        t = np.asarray(target, float)
        a = np.asarray(approx, float)
        if self.kind == "mse":
            return float(np.sum((a - t) ** 2))
        if self.kind == "mae":
            return float(np.sum(np.abs(t - a)))
        d = t - a
        return float(np.sum(np.where(d > 0, self.p * d, (self.p - 1.0) * d)))


@dataclass
class ApproximationProblem:
    """Constraint system and loss for one granular approximation.

    ``pairs``/``rhs`` hold the retained constraints: for ``binary_difference``
    ``rhs = R_phi(u, v)`` in ``alpha_u - alpha_v + 1 >= rhs``; for
    ``multiclass_pairsum`` ``rhs = M_phi(u, v)`` in ``alpha_u + alpha_v <= 1 + rhs``.
    """

    n: int
    constraint_kind: str
    pairs: np.ndarray
    rhs: np.ndarray
    loss: Loss
    target: np.ndarray
    nn: float = 1.0
    neighbors: Optional[np.ndarray] = None

    @property
    def retained_pairs(self):
        return [tuple(map(int, p)) for p in self.pairs]

    def rows(self):
        """Constraints as ``(idx, coef, b)`` with ``coef . x[idx] <= b``."""
        u, v = self.pairs[:, 0], self.pairs[:, 1]
        if self.constraint_kind == "binary_difference":
            coef = np.tile([1.0, -1.0], (len(u), 1))
            b = 1.0 - self.rhs
        else:
            coef = np.ones((len(u), 2))
            b = 1.0 + self.rhs
        return np.stack([u, v], axis=1), coef, b

    def residual(self, alpha) -> float:
        """Largest violation of the retained and box constraints."""
        a = np.asarray(alpha, float)
        idx, coef, b = self.rows()
        viol = [0.0, float(np.max(a - 1.0, initial=0.0)), float(np.max(-a, initial=0.0))]
        if len(b):
            viol.append(float(np.max(coef[:, 0] * a[idx[:, 0]] + coef[:, 1] * a[idx[:, 1]] - b)))
        return max(viol)

    def objective(self, alpha) -> float:
        return self.loss.value(self.target, alpha)

    def dump(self) -> str:
        """Plain-text dump: header lines then one ``u v rhs`` line per constraint."""
        lines = [f"# kind {self.constraint_kind}", f"# loss {self.loss}", f"# n {self.n}",
                 f"# constraints {len(self.rhs)}", f"# nn {self.nn:g}",
                 "# target " + " ".join(repr(float(t)) for t in self.target)]
        lines += [f"{u} {v} {r!r}" for (u, v), r in zip(self.pairs.tolist(), self.rhs.tolist())]
        return "\n".join(lines) + "\n"


@dataclass
class Solution:
    alpha: np.ndarray
    objective: float
    feasibility_residual: float
    solver_stats: dict = field(default_factory=dict)


# -- assembly -----------------------------------------------------------------

def neighbor_count(nn: float, n: int) -> int:
    if not nn > 0:
        raise ValueError("nn must be positive")
    if nn > 1:
        raise ValueError("nn must not exceed 1")
    m = int(np.floor(nn * n + 0.5))
    if m < 1:
        log.warning("nn=%g keeps no neighbours of %d instances; using 1", nn, n)
        m = 1
    return m


def nearest_neighbors(r: np.ndarray, m: int) -> np.ndarray:
    """Indices of the ``m`` largest entries per row, ties by ascending index."""
    return np.argsort(-r, axis=1, kind="stable")[:, :m]


def _relation_phi(matrix, spec: TripletSpec) -> np.ndarray:
    r = matrix.degrees if isinstance(matrix, RelationMatrix) else np.asarray(matrix, float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError("training relation must be square")
    return spec.phi(r)


def _retained(r: np.ndarray, nn: float):
    n = len(r)
    m = neighbor_count(nn, n)
    if m >= n:
        nb = np.tile(np.arange(n), (n, 1))
    else:
        nb = nearest_neighbors(r, m)
    rows = np.repeat(np.arange(n), nb.shape[1])
    return rows, nb.ravel(), nb


def assemble_binary(labels, matrix, spec: TripletSpec, loss: Loss, nn: float = 1.0) -> ApproximationProblem:
    """Binary problem over all (or the nn-nearest) ordered pairs."""
    y = np.asarray(labels)
    if not np.isin(y, (0, 1)).all():
        raise ValueError("binary labels must be 0/1")
    r = _relation_phi(matrix, spec)
    if len(y) != len(r):
        raise ValueError("labels and relation are not aligned")
    u, v, nb = _retained(r, nn)
    return ApproximationProblem(len(y), "binary_difference", np.stack([u, v], 1), r[u, v].copy(),
                                loss, y.astype(float), nn, nb)


def assemble_multiclass(class_labels, matrix, spec: TripletSpec, loss: Loss, nn: float = 1.0) -> ApproximationProblem:
    """Multi-class problem: constraints only between different observed classes."""
    y = np.asarray(class_labels)
    if loss.kind == "quantile" and loss.p != 0.5:
        raise ValueError("the multi-class problem supports mae and mse only")
    r = _relation_phi(matrix, spec)
    if len(y) != len(r):
        raise ValueError("labels and relation are not aligned")
    u, v, nb = _retained(r, nn)
    keep = y[u] != y[v]
    u, v = u[keep], v[keep]
    if len(np.unique(y)) < 2:
        log.warning("single-class data: the multi-class problem has no constraints")
    return ApproximationProblem(len(y), "multiclass_pairsum", np.stack([u, v], 1), 1.0 - r[u, v],
                                loss, np.ones(len(y)), nn, nb)


# -- dual active-set projection ---------------------------------------------

def _prune(idx, coef, b):
    """Drop constraints implied by the unit box and merge duplicates."""
    # largest value of coef.x over the box; a row that cannot exceed b is vacuous
    hi = np.where(coef > 0, coef, 0.0).sum(axis=1)
    keep = (hi > b) & (idx[:, 0] != idx[:, 1])
    idx, coef, b = idx[keep], coef[keep], b[keep]
    if not len(b):
        return idx, coef, b
    sym = coef[:, 0] == coef[:, 1]
    key_idx = idx.copy()
    key_idx[sym] = np.sort(idx[sym], axis=1)
    key = np.concatenate([key_idx, coef], axis=1)
    order = np.lexsort((b,) + tuple(key.T[::-1]))
    key, b_sorted = key[order], b[order]
    first = np.ones(len(b_sorted), dtype=bool)
    first[1:] = (key[1:] != key[:-1]).any(axis=1)
    key = key[first]
    return key[:, :2].astype(np.int64), key[:, 2:], b_sorted[first]


def _packed_gather(cap):
    """Flat indices into a ``cap x cap`` buffer for each packed lower-triangle slot."""
    rows = np.repeat(np.arange(cap), np.arange(1, cap + 1))
    starts = np.repeat(np.arange(cap) * (np.arange(cap) + 1) // 2, np.arange(1, cap + 1))
    return rows * cap + (np.arange(len(rows)) - starts)


def _factor_drop(dense, packed, gather, k, j):
    """Remove row/column ``j`` from a lower Cholesky factor of order ``k``.

    The factor is held twice: ``dense`` (rows of ``L`` in a square buffer)
    and ``packed`` (the same rows back to back, for the BLAS solves).  Rows
    above ``j`` are untouched.  With ``R = L^T``, deleting column ``j`` leaves
    ``R[j:, j+1:]`` upper Hessenberg; a Givens QR (compiled in scipy's
    ``qr_delete``) restores the triangle.  ``gather`` maps packed slots to
    flat positions of ``dense`` so the repack is a single take.
    """
    m = k - 1 - j
    if m:
        H = np.asfortranarray(dense[j:k, j:k].T)
        _, R = qr_delete(np.eye(m + 1, order="F"), H, 0, 1, which="col",
                         overwrite_qr=True, check_finite=False)
        # column signs of L are free: L L^T is unchanged
        R = R[:m]
        dense[j:k - 1, :j] = dense[j + 1:k, :j]
        dense[j:k - 1, j:k - 1] = R.T
    dense[k - 1, :k] = 0.0
    lo, hi = j * (j + 1) // 2, (k - 1) * k // 2
    np.take(dense.ravel(), gather[lo:hi], out=packed[lo:hi])


def _row_arrays(n, idx, coef, b, box):
    """Append the box rows ``x_j <= hi`` and ``-x_j <= -lo``."""
    lo, hi = box
    ar = np.repeat(np.arange(n), 2).reshape(n, 2)
    all_idx = np.concatenate([idx.reshape(-1, 2), ar, ar]).astype(np.int64)
    all_coef = np.concatenate([coef.reshape(-1, 2), np.tile([1.0, 0.0], (n, 1)),
                               np.tile([-1.0, 0.0], (n, 1))])
    all_b = np.concatenate([b, np.full(n, hi), np.full(n, -lo)])
    return all_idx, all_coef, all_b


def project(target, idx, coef, b, box=(0.0, 1.0), tol=1e-12, max_iter=None, return_state=False):
    """Euclidean projection of ``target`` onto ``{x: coef.x[idx] <= b, lo <= x <= hi}``.

    Each row of ``idx``/``coef`` describes a constraint touching at most two
    variables, so active normals are stored as index/coefficient pairs rather
    than dense columns.  The most violated constraint enters at every step.

    The Cholesky factor ``L`` of the active Gram matrix is kept row-wise in
    packed storage, which is ``L^T`` in BLAS upper packed format: adding a
    constraint appends one row without moving the rest.  A dense copy of the
    rows serves the (rarer) deletions.
    """
    t = np.asarray(target, float)
    n = len(t)
    all_idx, all_coef, all_b = _row_arrays(n, idx, coef, b, box)
    i0, i1 = all_idx[:, 0].copy(), all_idx[:, 1].copy()
    c0, c1 = all_coef[:, 0].copy(), all_coef[:, 1].copy()
    total = len(all_b)

    # independent normals in R^n: at most n active constraints
    cap = n + 1
    packed = np.zeros(cap * (cap + 1) // 2)
    act = np.zeros(cap, dtype=np.int64)
    nidx = np.zeros((cap, 2), dtype=np.int64)  # active normals, interleaved
    ncoef = np.zeros((cap, 2))
    lam_buf = np.zeros(cap)
    dense = np.zeros((cap, cap))
    gather = _packed_gather(cap)
    k = 0

    x = t.copy()
    viol_tol = tol * max(1.0, float(np.max(np.abs(t), initial=0.0)))
    max_iter = max_iter or 50 * (n + 10) + 2 * total
    iters = drops = 0
    s = np.empty(total)
    tmp = np.empty(total)
    w = np.zeros(n)
    empty = np.zeros(0)

    while True:
        # slack = b - c0 x[i0] - c1 x[i1], without temporaries
        np.take(x, i0, out=s)
        np.multiply(s, c0, out=s)
        np.take(x, i1, out=tmp)
        np.multiply(tmp, c1, out=tmp)
        np.add(s, tmp, out=s)
        np.subtract(all_b, s, out=s)
        if k:
            s[act[:k]] = np.inf
        p = int(np.argmin(s))
        if s[p] >= -viol_tol:
            break

        p0, p1 = int(i0[p]), int(i1[p])
        q0, q1 = float(c0[p]), float(c1[p])
        ap2 = q0 * q0 + q1 * q1
        lam_p = 0.0
        while True:
            iters += 1
            if iters > max_iter:
                raise SolverError(f"active-set iteration limit reached ({max_iter})")
            if k:
                # g = N^T a_p and z = N r with sparse columns
                nk, ck = nidx[:k], ncoef[:k]
                w[p0] += q0
                w[p1] += q1
                wk = w[nk]
                wk *= ck
                g = wk[:, 0] + wk[:, 1]
                w[p0] = w[p1] = 0.0
                y = dtpsv(k, packed, g, trans=1)
                r = dtpsv(k, packed, y)
                z = np.bincount(nk.ravel(), (ck * r[:, None]).ravel(), n)
            else:
                y = r = empty
                z = np.zeros(n)
            z[p0] -= q0
            z[p1] -= q1
            q = -(q0 * z[p0] + q1 * z[p1])
            sp = float(all_b[p]) - q0 * x[p0] - q1 * x[p1]
            t2 = -sp / q if q > 1e-11 * ap2 else math.inf
            t1, j = math.inf, -1
            if k:
                lam = lam_buf[:k]
                ratios = np.full(k, math.inf)
                np.divide(lam, r, out=ratios, where=r > 1e-13)
                j = int(np.argmin(ratios))
                t1 = float(ratios[j])
            step = min(t1, t2)
            if not math.isfinite(step):
                raise SolverError("constraint system is infeasible")
            if t2 < math.inf:
                x += step * z
            if k:
                lam -= step * r
            lam_p += step
            if t2 <= t1:
                if k == cap:
                    raise SolverError("active set exceeds the variable count")
                d2 = ap2 - float(y @ y)
                off = k * (k + 1) // 2
                dense[k, :k] = y
                dense[k, k] = math.sqrt(max(d2, q, 1e-300))
                packed[off:off + k + 1] = dense[k, :k + 1]
                lam_buf[k] = lam_p
                act[k] = p
                nidx[k] = p0, p1
                ncoef[k] = q0, q1
                k += 1
                break
            # drop constraint j and keep pushing p
            drops += 1
            _factor_drop(dense, packed, gather, k, j)
            k -= 1
            for v in (act, nidx, ncoef, lam_buf):
                v[j:k] = v[j + 1:k + 1]

    active = act[:k].tolist()
    L = dense[:k, :k].copy()
    state = {"iterations": iters, "drops": drops, "active": active,
             "L": L, "lam": lam_buf[:k].copy(), "rows": (all_idx, all_coef, all_b)}
    if return_state:
        return x, state
    return x


def _active_matrix(n, state):
    idx, coef, _ = state["rows"]
    act = np.asarray(state["active"], dtype=np.int64)
    N = np.zeros((n, len(act)))
    cols = np.arange(len(act))
    np.add.at(N, (idx[act, 0], cols), coef[act, 0])
    np.add.at(N, (idx[act, 1], cols), coef[act, 1])
    return N


def _polish(t, state):
    """Re-solve the KKT system of the final active set around target ``t``."""
    if not state["active"]:
        return t.copy(), np.zeros(0)
    N = _active_matrix(len(t), state)
    L = np.linalg.cholesky(N.T @ N)
    bw = state["rows"][2][state["active"]]

    def gram_solve(v):
        y = solve_triangular(L, v, lower=True, check_finite=False)
        return solve_triangular(L, y, lower=True, trans=1, check_finite=False)

    nu = gram_solve(N.T @ t - bw)
    x = t - N @ nu
    # one step of iterative refinement on the active equations
    dnu = gram_solve(N.T @ x - bw)
    return x - N @ dnu, nu + dnu


def _max_violation(x, rows):
    idx, coef, b = rows
    return float(np.max(coef[:, 0] * x[idx[:, 0]] + coef[:, 1] * x[idx[:, 1]] - b, initial=0.0))


def _linear_cost(problem: ApproximationProblem):
    """Linear part ``c`` of the LP objective (constant dropped)."""
    t = problem.target
    if problem.constraint_kind == "multiclass_pairsum":
        return -np.ones(problem.n)
    if not np.isin(t, (0.0, 1.0)).all():
        raise ValueError("the LP reduction needs crisp (0/1) targets")
    p = problem.loss.p
    return np.where(t == 1.0, -p, 1.0 - p)


def _lp_certificate(c, x, rows, tol=1e-9):
    """NNLS check that ``-c`` lies in the cone of constraints tight at ``x``."""
    idx, coef, b = rows
    slack = b - coef[:, 0] * x[idx[:, 0]] - coef[:, 1] * x[idx[:, 1]]
    tight = np.flatnonzero(slack <= 1e-9)
    if not len(tight):
        return bool(np.all(np.abs(c) <= tol)), float(np.linalg.norm(c))
    n = len(x)
    A = np.zeros((n, len(tight)))
    cols = np.arange(len(tight))
    np.add.at(A, (idx[tight, 0], cols), coef[tight, 0])
    np.add.at(A, (idx[tight, 1], cols), coef[tight, 1])
    _, res = nnls(A, -c, maxiter=50 * len(tight) + 100)
    return res <= tol * max(1.0, float(np.linalg.norm(c))), float(res)


def _prepared(problem: ApproximationProblem):
    idx, coef, b = problem.rows()
    return _prune(idx.astype(np.int64), coef, b)


def solve_qp(problem: ApproximationProblem) -> Solution:
    """Minimise the (phi-scaled) squared error: a projection of the target."""
    if problem.loss.kind != "mse":
        raise ValueError("solve_qp needs the mse loss")
    start = time.perf_counter()
    idx, coef, b = _prepared(problem)
    t = problem.target.astype(float)
    x, state = project(t, idx, coef, b, return_state=True)
    xp, _ = _polish(t, state)
    if _max_violation(xp, state["rows"]) <= _max_violation(x, state["rows"]) + 1e-15:
        x = xp
    x = np.clip(x, 0.0, 1.0)
    stats = {"method": "active_set", "iterations": state["iterations"], "drops": state["drops"],
             "active": len(state["active"]), "constraints": len(b),
             "seconds": time.perf_counter() - start}
    return _finish(problem, x, stats)


def solve_lp(problem: ApproximationProblem, eps_schedule=(1e-3, 1e-6, 1e-9)) -> Solution:
    """Minimise a quantile/MAE loss; among optima return the one closest to the target."""
    if not problem.loss.linear:
        raise ValueError("solve_lp needs the mae or quantile loss")
    start = time.perf_counter()
    idx, coef, b = _prepared(problem)
    t = problem.target.astype(float)
    c = _linear_cost(problem)
    attempts = 0
    for eps in eps_schedule:
        attempts += 1
        try:
            x, state = project(t - c / eps, idx, coef, b, return_state=True)
        except SolverError as exc:
            log.debug("regularized projection failed at eps=%g: %s", eps, exc)
            continue
        rows = state["rows"]
        xp, _ = _polish(t, state)
        if np.max(np.abs(xp - x)) <= 1e-7 and _max_violation(xp, rows) <= FEAS_TOL:
            x = xp
        x = np.clip(x, 0.0, 1.0)
        ok, res = _lp_certificate(c, x, rows)
        if ok and _max_violation(x, rows) <= FEAS_TOL:
            stats = {"method": "active_set_regularized", "eps": eps, "attempts": attempts,
                     "iterations": state["iterations"], "drops": state["drops"],
                     "active": len(state["active"]), "constraints": len(b),
                     "seconds": time.perf_counter() - start}
            return _finish(problem, x, stats)
        log.debug("LP certificate failed at eps=%g (residual %.3g)", eps, res)
    x = _highs(problem.n, idx, coef, b, c)
    stats = {"method": "highs", "attempts": attempts, "constraints": len(b),
             "seconds": time.perf_counter() - start}
    log.warning("LP solved by the HiGHS fallback; tie-breaking toward the target is not applied")
    return _finish(problem, x, stats)


def _highs(n, idx, coef, b, c):
    m = len(b)
    rows = np.repeat(np.arange(m), 2)
    A = csr_matrix((coef.ravel(), (rows, idx.ravel())), shape=(m, n))
    res = linprog(c, A_ub=A if m else None, b_ub=b if m else None, bounds=[(0.0, 1.0)] * n,
                  method="highs", options={"primal_feasibility_tolerance": 1e-10,
                                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}")
    return np.clip(res.x, 0.0, 1.0)


def _finish(problem, x, stats) -> Solution:
    resid = problem.residual(x)
    if resid > FEAS_TOL:
        raise SolverError(f"solution violates constraints by {resid:.3g}")
    return Solution(x, problem.objective(x), resid, stats)


def solve(problem: ApproximationProblem) -> Solution:
    return solve_lp(problem) if problem.loss.linear else solve_qp(problem)
