import numpy as np
import pytest

from causalpc.metrics import (counterfactual_metrics, descendant_sets,
                              graph_metrics, interventional_metrics, mae,
                              mmd, shd_elementwise)


class TestMae:
    def test_identical_zero(self):
        X = np.ones((3, 3))
        assert mae(X, X) == 0.0

    def test_scalar_example(self):
        assert mae([[1.0]], [[3.0]]) == 2.0

    def test_uniform_diffs(self):
        assert mae(np.zeros((2, 2)), np.ones((2, 2))) == 1.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mae(np.zeros((2, 2)), np.zeros((3, 2)))

    def test_symmetry_and_triangle(self, rng):
        for _ in range(20):
            A, B, C = (rng.normal(size=(4, 3)) for _ in range(3))
            assert mae(A, B) == pytest.approx(mae(B, A))
            assert mae(A, C) <= mae(A, B) + mae(B, C) + 1e-12


class TestMmd:
    def test_identical_sets_zero(self, rng):
        X = rng.normal(size=(40, 3))
        assert abs(mmd(X, X)) < 1e-12

    def test_identical_singletons(self):
        assert mmd(np.array([[0.0]]), np.array([[0.0]]), bandwidths=[1.0]) == 0.0

    def test_worked_singleton_example(self):
        # squared distance 2 with unit bandwidth: 1 - 2e^{-1} + 1
        x = np.array([[0.0, 0.0]])
        y = np.array([[1.0, 1.0]])
        expect = 2.0 - 2.0 * np.exp(-1.0)
        assert mmd(x, y, bandwidths=[1.0]) == pytest.approx(expect, abs=1e-6)

    def test_separates_shifted_gaussians(self):
        hits = 0
        for seed in range(20):
            r = np.random.default_rng(seed)
            a = r.normal(0, 1, size=(200, 1))
            b = r.normal(3, 1, size=(200, 1))
            c = r.normal(0, 1, size=(200, 1))
            if mmd(a, b) > mmd(a, c):
                hits += 1
        assert hits == 20

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mmd(np.zeros((0, 1)), np.zeros((0, 1)))


class TestDescendants:
    def test_chain_closure(self):
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 2] = 1
        des = descendant_sets(A)
        assert des[0] == [1, 2]
        assert des[1] == [2]
        assert des[2] == []


class TestInterventionalMetrics:
    def _chain_adj(self):
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 2] = 1
        return A

    def test_exact_match_zero(self, rng):
        A = self._chain_adj()
        X = rng.normal(size=(50, 3))
        m, s = interventional_metrics({0: X}, {0: X.copy()}, A)
        assert m == 0.0 and s == 0.0

    def test_single_descendant_mean_shift(self):
        A = np.zeros((2, 2))
        A[0, 1] = 1
        Xt = np.zeros((10, 2))
        Xe = np.zeros((10, 2))
        Xt[:, 1] = 1.0
        Xe[:, 1] = 2.0
        m, s = interventional_metrics({0: Xt}, {0: Xe}, A)
        assert m == pytest.approx(1.0)
        assert s == pytest.approx(0.0)

    def test_leaf_only_interventions_error(self):
        A = self._chain_adj()
        with pytest.raises(ValueError):
            interventional_metrics({2: np.zeros((5, 3))}, {2: np.zeros((5, 3))}, A)


class TestCounterfactualMetrics:
    def test_perfect_zero(self, rng):
        A = np.zeros((2, 2))
        A[0, 1] = 1
        X = rng.normal(size=(20, 2))
        m, s = counterfactual_metrics({0: X}, {0: X.copy()}, A)
        assert m == 0.0 and s == 0.0

    def test_constant_error_contribution(self):
        A = np.zeros((2, 2))
        A[0, 1] = 1
        Xt = np.zeros((15, 2))
        Xe = np.zeros((15, 2))
        Xe[:, 1] = 2.0
        m, s = counterfactual_metrics({0: Xt}, {0: Xe}, A)
        assert m == pytest.approx(2.0)
        assert s == pytest.approx(0.0)

    def test_descendant_count_normalizes(self):
        # same per-row norm, twice the descendants: contribution halves
        A1 = np.zeros((2, 2)); A1[0, 1] = 1
        A2 = np.zeros((3, 3)); A2[0, 1] = A2[0, 2] = 1
        Xt1, Xe1 = np.zeros((5, 2)), np.zeros((5, 2)); Xe1[:, 1] = 2.0
        Xt2, Xe2 = np.zeros((5, 3)), np.zeros((5, 3))
        Xe2[:, 1] = Xe2[:, 2] = 2.0 / np.sqrt(2)
        m1, _ = counterfactual_metrics({0: Xt1}, {0: Xe1}, A1)
        m2, _ = counterfactual_metrics({0: Xt2}, {0: Xe2}, A2)
        assert m2 == pytest.approx(m1 / 2)

    def test_pairing_mismatch_rejected(self):
        A = np.zeros((2, 2)); A[0, 1] = 1
        with pytest.raises(ValueError):
            counterfactual_metrics({0: np.zeros((5, 2))}, {0: np.zeros((4, 2))}, A)


def brute_force_shd(A_true, A_est):
    """Independent oracle: minimal add/remove/reverse operations, found by
    breadth-first search over the 4 states of each unordered pair (moves never
    couple distinct pairs, so the total is the sum of pairwise distances)."""
    states = [(0, 0), (1, 0), (0, 1), (1, 1)]

    def neighbors(st):
        a, b = st
        out = []
        if a == 0: out.append((1, b))       # add i->j
        if b == 0: out.append((a, 1))       # add j->i
        if a == 1: out.append((0, b))       # remove i->j
        if b == 1: out.append((a, 0))       # remove j->i
        if a == 1: out.append((0, 1))       # reverse i->j
        if b == 1: out.append((1, 0))       # reverse j->i
        return out

    dist = {}
    for s0 in states:
        frontier = [s0]
        d = {s0: 0}
        while frontier:
            nxt = []
            for st in frontier:
                for nb in neighbors(st):
                    if nb not in d:
                        d[nb] = d[st] + 1
                        nxt.append(nb)
            frontier = nxt
        dist[s0] = d

    n = A_true.shape[0]
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            est = (int(A_est[i, j]), int(A_est[j, i]))
            true = (int(A_true[i, j]), int(A_true[j, i]))
            total += dist[est][true]
    return total


class TestGraphMetrics:
    def test_perfect_recovery(self):
        A = np.zeros((3, 3))
        A[0, 1] = A[1, 2] = 1
        gm = graph_metrics(A, A)
        assert gm.shd == 0 and gm.f1 == 1.0 and gm.fdr == 0.0 and gm.tpr == 1.0

    def test_spec_worked_example(self):
        # truth 1->2->3; estimate {1->2, 3->2}
        A = np.zeros((3, 3)); A[0, 1] = A[1, 2] = 1
        E = np.zeros((3, 3)); E[0, 1] = E[2, 1] = 1
        gm = graph_metrics(A, E)
        assert gm.confusion["tp"] == 1
        assert gm.confusion["r"] == 1
        assert gm.confusion["fn"] == 1
        assert gm.shd == 1
        assert gm.f1 == pytest.approx(2 / (2 + 1 + 1))

    def test_empty_estimate(self):
        A = np.zeros((3, 3)); A[0, 1] = A[1, 2] = 1
        gm = graph_metrics(A, np.zeros((3, 3)))
        assert gm.tpr == 0.0 and gm.nnz == 0 and gm.shd == 2

    def test_invariants(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 5))
            A = (rng.random((n, n)) < 0.4).astype(int)
            E = (rng.random((n, n)) < 0.4).astype(int)
            np.fill_diagonal(A, 0)
            np.fill_diagonal(E, 0)
            gm = graph_metrics(A, E)
            c = gm.confusion
            assert gm.shd == c["r"] + c["m"] + c["fp"]
            assert gm.nnz == c["tp"] + c["r"] + c["fp"]
            assert c["fn"] == c["r"] + c["m"]
            assert 0.0 <= gm.f1 <= 1.0

    def test_shd_equals_edit_distance(self, rng):
        for _ in range(500):
            n = int(rng.integers(2, 5))
            A = (rng.random((n, n)) < 0.4).astype(int)
            E = (rng.random((n, n)) < 0.4).astype(int)
            np.fill_diagonal(A, 0)
            np.fill_diagonal(E, 0)
            assert graph_metrics(A, E).shd == brute_force_shd(A, E)

    def test_elementwise_counts_reversal_twice(self):
        A = np.zeros((2, 2)); A[0, 1] = 1
        E = np.zeros((2, 2)); E[1, 0] = 1
        assert graph_metrics(A, E).shd == 1
        assert shd_elementwise(A, E) == 2

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            graph_metrics(np.full((2, 2), 0.5), np.zeros((2, 2)))
