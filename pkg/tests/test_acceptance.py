"""Acceptance gate: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``; the status lines are printed
even when output capture is on.
"""
import time
from contextlib import contextmanager

import numpy as np
import pytest

from fgac.baselines import kfrnn_degrees, kfrnn_fit, knn_fit, knn_predict
from fgac.classifier import (OwaPredictionConfig, explain, membership_bounds, owa_bounds,
                             predict_class, predict_degrees, query_relations)
from fgac.connectives import (LUKASIEWICZ, TripletSpec, apply_i, apply_n, averaging, implicator,
                              negator, t_norm)
from fgac.evaluation import EvalConfig, approx_study, cross_validate
from fgac.granular import is_granularly_representable, lower_approximation, upper_approximation
from fgac.oracles import verify_solution
from fgac.persistence import load_model, save_model
from fgac.relations import SimilarityConfig, relation_matrix, verify_t_equivalence
from fgac.solver import Loss, assemble_binary, assemble_multiclass, solve, solve_lp, solve_qp
from support import DATASETS, dataset, fitted, prepared, random_queries, random_table

TOL = 1e-12


@pytest.fixture
def criterion(capsys):
    @contextmanager
    def run(number, title):
        notes = []
        ok = False
        try:
            yield notes
            ok = True
        finally:
            detail = f" ({'; '.join(notes)})" if notes else ""
            with capsys.disabled():
                print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {title}{detail}")
    return run


def binary_model(name):
    return fitted(name, 1.0, "mse", len(dataset(name).classes) == 2)


# -- 1 -------------------------------------------------------------------------

def algebra_failures(spec):
    g = np.linspace(0.0, 1.0, 21)
    x, y, z = (a.ravel() for a in np.meshgrid(g, g, g, indexing="ij"))
    T = lambda a, b: t_norm(spec, a, b)
    I = lambda a, b: implicator(spec, a, b)
    N = lambda a: negator(spec, a)
    close = lambda a, b: np.max(np.abs(a - b)) <= TOL
    checks = {
        "residuation": np.array_equal(T(x, y) <= z + TOL, x <= I(y, z) + TOL),
        "t below arguments": np.all(T(x, y) <= np.minimum(x, y) + TOL),
        "implicator above consequent": np.all(I(x, y) >= y - TOL),
        "modus ponens": np.all(T(x, I(x, y)) <= y + TOL),
        "ordering": np.array_equal(x <= y, np.abs(I(x, y) - 1) <= TOL),
        "chained implicator": np.all(T(x, I(y, z)) <= I(I(x, y), z) + TOL),
        "exportation": close(I(T(x, y), z), I(x, I(y, z))),
        "negated implicator bound": np.all(T(x, N(y)) <= N(I(x, y)) + TOL),
        "negated t-norm": close(N(T(x, y)), I(x, N(y))),
        "contraposition": close(I(N(x), N(y)), I(y, x)),
        "t with negation": close(T(x, N(y)), N(I(x, y))),
        "strong max-definability": close(I(I(x, y), y), np.maximum(x, y)),
        "divisibility": close(T(x, I(x, y)), np.minimum(x, y)),
        "involution": close(N(N(g)), g),
        "averaging N-invariance": close(averaging(spec, x, y), N(averaging(spec, N(x), N(y)))),
    }
    return [name for name, ok in checks.items() if not ok]


def test_criterion_1_algebra(criterion):
    with criterion(1, "connective algebra on the 21-point grid") as notes:
        start = time.perf_counter()
        for c in (1.0, 0.5, 2.0):
            assert algebra_failures(TripletSpec(c)) == [], f"c={c}"
        elapsed = time.perf_counter() - start
        notes.append(f"{elapsed:.2f}s")
        assert elapsed < 10


# -- 2 -------------------------------------------------------------------------

def brute_force_ok(r, tol=1e-9):
    n = len(r)
    if np.any(np.abs(np.diag(r) - 1) > tol) or np.any(np.abs(r - r.T) > tol):
        return False
    for v in range(n):
        # max(R(u,v) + R(v,w) - 1, 0) <= R(u,w) for all u, w
        if np.any(np.maximum(r[:, v:v + 1] + r[v:v + 1, :] - 1, 0) > r + tol):
            return False
    return True


def test_criterion_2_relations(criterion):
    with criterion(2, "relation matrices are T-equivalences on 50 random fixtures") as notes:
        start = time.perf_counter()
        rng = np.random.default_rng(2024)
        for i in range(50):
            n = int(rng.integers(1, 31))
            t = random_table(rng, n, int(rng.integers(1, 4)), int(rng.integers(1, 3)), integer=i % 3 == 0)
            cfg = SimilarityConfig(gamma=float(rng.uniform(0.2, 8)), kind=["euclidean", "supremum"][i % 2])
            r = relation_matrix(t, cfg).degrees
            assert brute_force_ok(r), f"fixture {i}"
            assert verify_t_equivalence(r, tol=1e-9).ok, f"fixture {i}"
        elapsed = time.perf_counter() - start
        notes.append(f"{elapsed:.2f}s")
        assert elapsed < 30


# -- 3 -------------------------------------------------------------------------

def test_criterion_3_solver(criterion):
    from test_solver import random_problem
    r2 = np.array([[1.0, 0.8], [0.8, 1.0]])
    with criterion(3, "solver against oracles on 50 instances (n <= 6) and hand fixtures") as notes:
        worst_gap = worst_res = 0.0
        for seed in range(50):
            n = int(np.random.default_rng(seed + 1000).integers(2, 7))
            problem = random_problem(seed, n=n)
            rep = verify_solution(problem, solve(problem))
            worst_gap, worst_res = max(worst_gap, rep.gap), max(worst_res, rep.feasibility_residual)
            assert rep.gap <= 1e-6 and rep.feasibility_residual <= 1e-9, f"seed {seed}"
        notes.append(f"max gap {worst_gap:.1e}, max residual {worst_res:.1e}")
        mae = solve_lp(assemble_binary([1, 0], r2, LUKASIEWICZ, Loss("mae")))
        assert mae.objective == pytest.approx(0.8, abs=1e-12)
        mse = solve_qp(assemble_binary([1, 0], r2, LUKASIEWICZ, Loss("mse")))
        np.testing.assert_allclose(mse.alpha, [0.6, 0.4], atol=1e-12)
        multi = solve_qp(assemble_multiclass([0, 1], r2, LUKASIEWICZ, Loss("mse")))
        np.testing.assert_allclose(multi.alpha, [0.6, 0.6], atol=1e-12)


# -- 4 -------------------------------------------------------------------------

def test_criterion_4_granularity(criterion):
    with criterion(4, "fitted memberships are granular fixed points on all datasets") as notes:
        worst = 0.0
        for name in DATASETS:
            for model in {id(m): m for m in (fitted(name), binary_model(name))}.values():
                r = relation_matrix(model.training, model.similarity).degrees
                for k in range(model.n_classes):
                    a = model.memberships[k]
                    assert is_granularly_representable(a, r, model.triplet, tol=1e-9) == [], name
                    gap = float(np.max(np.abs(lower_approximation(a, r, model.triplet) - a)))
                    worst = max(worst, gap)
                    assert gap <= 1e-9, name
        notes.append(f"max fixed-point gap {worst:.1e}")


# -- 5 and 9 -------------------------------------------------------------------

QUERIES_PER_DATASET = 1500


@pytest.fixture(scope="module")
def suite5():
    """(model, queries, relations) for every dataset, binary-path where two-class."""
    out = []
    for i, name in enumerate(DATASETS):
        model = binary_model(name)
        q = random_queries(np.random.default_rng(500 + i), model, QUERIES_PER_DATASET)
        out.append((name, model, q, query_relations(model, q)))
    return out


def test_criterion_5_bound_laws(criterion, suite5):
    with criterion(5, "bound order, duality and scan equivalence over random queries") as notes:
        pairs = 0
        owa = OwaPredictionConfig("additive")
        for name, m, q, (r_qu, r_uq) in suite5:
            pairs += len(q)
            bounds = []
            for k in range(m.n_classes):
                b = membership_bounds(m, r_qu, r_uq, k)
                full = membership_bounds(m, r_qu, r_uq, k, "full")
                assert np.all(b.lower <= b.upper + TOL), name
                np.testing.assert_array_equal(b.lower, full.lower, err_msg=name)
                np.testing.assert_array_equal(b.upper, full.upper, err_msg=name)
                con = m.class_labels != k
                direct = apply_i(m.triplet, r_uq[:, con], m.memberships[k, con][None, :]).min(axis=1)
                np.testing.assert_allclose(b.upper, direct, atol=TOL, rtol=0, err_msg=name)
                bounds.append(b)
            if m.binary_path:
                neg, pos = bounds
                np.testing.assert_allclose(neg.lower, apply_n(m.triplet, pos.upper), atol=TOL, rtol=0)
                np.testing.assert_allclose(neg.upper, apply_n(m.triplet, pos.lower), atol=TOL, rtol=0)
                lo1, up1 = owa_bounds(m, r_qu, r_uq, 1, owa)
                lo0, up0 = owa_bounds(m, r_qu, r_uq, 0, owa)
                np.testing.assert_allclose(lo0, apply_n(m.triplet, up1), atol=TOL, rtol=0)
                np.testing.assert_allclose(up0, apply_n(m.triplet, lo1), atol=TOL, rtol=0)
        notes.append(f"{pairs} pairs")
        assert pairs >= 10 ** 4


def test_criterion_9_explanations(criterion, suite5):
    with criterion(9, "explanation strengths reproduce the bounds exactly") as notes:
        checked = 0
        for name, m, q, _ in suite5:
            pred, _ = predict_class(m, q)
            for i in range(len(q)):
                k = int(pred[i])
                rep = explain(m, q.take([i]), k, top_n=1, query_id=i)
                assert rep.arguments_for[0].strength == rep.lower, (name, i)
                assert apply_n(m.triplet, rep.arguments_against[0].strength) == rep.upper, (name, i)
                checked += 1
        notes.append(f"{checked} predictions")


# -- 6 -------------------------------------------------------------------------

NN_GRID = (1.0, 0.5, 0.2, 0.1, 0.05, 0.02)


def test_criterion_6_approximation(criterion):
    with criterion(6, "nn approximation: monotone difference, nn=0.02 time < 25% of nn=1") as notes:
        failures = []
        for name in ("haberman", "bupa"):
            rows = approx_study(dataset(name), [1.0], NN_GRID, repeats=3)
            diff = {r.nn: r.difference for r in rows}
            ratio = {r.nn: r.time_ratio for r in rows}[0.02]
            notes.append(f"{name} ratio {ratio:.3f}, diffs "
                         + "/".join(f"{diff[v]:.4f}" for v in sorted(diff)))
            seq = [diff[v] for v in sorted(diff)]
            if any(b > a + TOL for a, b in zip(seq, seq[1:])):
                failures.append(f"{name} not monotone")
            if not ratio < 0.25:
                failures.append(f"{name} ratio {ratio:.3f}")
        assert not failures, failures


# -- 7 -------------------------------------------------------------------------

@pytest.mark.parametrize("name,floor", [("iris", 0.93), ("wisconsin", 0.93), ("heart", 0.77)])
def test_criterion_7_accuracy(criterion, name, floor):
    with criterion(7, f"{name} balanced accuracy >= {floor} in < 5 min") as notes:
        res = cross_validate(dataset(name), EvalConfig(family="fgac", folds=5, seed=0))
        notes.append(f"{res.mean:.4f}, gamma {res.best}, {res.seconds:.0f}s")
        assert res.mean >= floor and res.seconds < 300


# -- 8 -------------------------------------------------------------------------

def test_criterion_8_baselines(criterion):
    with criterion(8, "kNN self-prediction and strict kFRNN extrema") as notes:
        for name in DATASETS:
            data, pre, table = prepared(name)
            # numeric and nominal parts together identify duplicates
            key = np.hstack([table.numeric, table.nominal.astype(float)])
            _, first = np.unique(key, axis=0, return_index=True)
            keep = np.sort(first)
            t, y = table.take(keep), data.target[keep]
            model = knn_fit(t, y, 1, SimilarityConfig(q_count=pre.q_count))
            assert np.array_equal(knn_predict(model, t), y), name
        for name in ("iris", "heart", "breast"):
            data, pre, table = prepared(name)
            sim = SimilarityConfig(gamma=1.0, q_count=pre.q_count)
            r = relation_matrix(table, sim).degrees
            deg = kfrnn_degrees(kfrnn_fit(table, data.target, sim, "strict"), table)
            for k in range(len(data.classes)):
                crisp = (data.target == k).astype(float)
                expected = 0.5 * (lower_approximation(crisp, r, LUKASIEWICZ)
                                  + upper_approximation(crisp, r, LUKASIEWICZ))
                assert np.array_equal(deg[:, k], expected), name
        notes.append(f"{len(DATASETS)} datasets deduplicated")


# -- 10 ------------------------------------------------------------------------

def test_criterion_10_persistence(criterion, tmp_path):
    with criterion(10, "save/load/predict bit-identical on 1000 queries"):
        for name in ("iris", "heart"):
            model = binary_model(name)
            q = random_queries(np.random.default_rng(10), model, 1000)
            path = tmp_path / f"{name}.json"
            save_model(model, path)
            back = load_model(path)
            assert np.array_equal(predict_degrees(back, q), predict_degrees(model, q))
            owa = OwaPredictionConfig("additive", 5)
            assert np.array_equal(predict_degrees(back, q, owa), predict_degrees(model, q, owa))
            assert np.array_equal(predict_class(back, q)[0], predict_class(model, q)[0])
