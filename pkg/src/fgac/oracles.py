"""Slow, independent reference solvers for small approximation problems.

* :func:`vertex_enumeration` finds the LP optimum by visiting every basic
  feasible point of the constraint polytope (practical for n <= 6).
* :func:`dykstra_projection` computes the QP optimum (a Euclidean projection)
  by Dykstra's alternating projections onto half-spaces.

Neither shares code with the active-set solver beyond the problem's own
constraint rows.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .solver import ApproximationProblem, Solution


def _dense_system(problem: ApproximationProblem):
    n = problem.n
    idx, coef, b = problem.rows()
    A = np.zeros((len(b), n))
    rows = np.arange(len(b))
    np.add.at(A, (rows, idx[:, 0]), coef[:, 0])
    np.add.at(A, (rows, idx[:, 1]), coef[:, 1])
    # rows that cannot bind inside the unit box do not change the polytope
    keep = np.clip(A, 0.0, None).sum(axis=1) > b
    A, b = A[keep], b[keep]
    if len(b):
        A, inv = np.unique(A, axis=0, return_inverse=True)
        b = np.array([b[inv.ravel() == g].min() for g in range(len(A))])
    A = np.vstack([A.reshape(-1, n), np.eye(n), -np.eye(n)])
    b = np.concatenate([b, np.ones(n), np.zeros(n)])
    return A, b


def vertex_enumeration(problem: ApproximationProblem, feas_tol: float = 1e-9, chunk: int = 20000):
    """Best vertex for a linear loss; returns ``(objective, alpha)``."""
    if not problem.loss.linear:
        raise ValueError("vertex enumeration is for linear losses")
    A, b = _dense_system(problem)
    n = problem.n
    best_val, best_x = np.inf, None
    combos = itertools.combinations(range(len(b)), n)
    while True:
        block = np.array(list(itertools.islice(combos, chunk)))
        if not len(block):
            break
        As, bs = A[block], b[block]
        ok = np.abs(np.linalg.det(As)) > 1e-12
        if not ok.any():
            continue
        xs = np.linalg.solve(As[ok], bs[ok][..., None])[..., 0]
        feas = (xs @ A.T - b <= feas_tol).all(axis=1)
        for x in xs[feas]:
            val = problem.objective(x)
            if val < best_val - 1e-12:
                best_val, best_x = val, x
    return best_val, best_x


def dykstra_projection(problem: ApproximationProblem, tol: float = 1e-13, max_cycles: int = 200000):
    """Projection of the target onto the feasible set; returns ``(objective, alpha)``."""
    if problem.loss.kind != "mse":
        raise ValueError("the projection oracle is for the squared loss")
    A, b = _dense_system(problem)
    rows = [(np.flatnonzero(a), a[np.flatnonzero(a)], bi, float(a @ a)) for a, bi in zip(A, b)]
    x = [float(v) for v in problem.target]
    incr = [[0.0] * len(r[0]) for r in rows]
    for _ in range(max_cycles):
        change = 0.0
        for r, (nz, a, bi, aa) in enumerate(rows):
            inc = incr[r]
            y = [x[j] + inc[k] for k, j in enumerate(nz)]
            s = sum(a[k] * y[k] for k in range(len(nz))) - bi
            lam = s / aa if s > 0 else 0.0
            for k, j in enumerate(nz):
                new = y[k] - lam * a[k]
                inc[k] = y[k] - new
                change = max(change, abs(new - x[j]))
                x[j] = new
        if change < tol:
            break
    xa = np.array(x)
    return problem.objective(xa), xa


@dataclass
class VerificationReport:
    feasibility_residual: float
    objective: float
    oracle_objective: float
    gap: float

    @property
    def ok(self) -> bool:
        return self.feasibility_residual <= 1e-9 and self.gap <= 1e-6


ORACLES = ("vertex_enumeration", "long_projection")
MAX_VERTEX_SIZE = 8


def verify_solution(problem: ApproximationProblem, solution: Solution, oracle: str = "auto") -> VerificationReport:
    """Compare a solution against a reference optimum.

    Parameters
    ----------
    oracle : {"auto", "vertex_enumeration", "long_projection"}
        ``auto`` picks vertex enumeration for linear losses and Dykstra's
        projection for the squared loss.
    """
    if oracle == "auto":
        oracle = ORACLES[0] if problem.loss.linear else ORACLES[1]
    if oracle not in ORACLES:
        raise ValueError(f"unknown oracle {oracle!r}; choose from {ORACLES}")
    if oracle == "vertex_enumeration":
        if problem.n > MAX_VERTEX_SIZE:
            raise ValueError(f"vertex enumeration is limited to {MAX_VERTEX_SIZE} variables")
        ref = vertex_enumeration(problem)[0]
    else:
        ref = dykstra_projection(problem)[0]
    obj = problem.objective(solution.alpha)
    return VerificationReport(problem.residual(solution.alpha), obj, ref, abs(obj - ref))
