import numpy as np
import pytest

import causalpc.dynamics as dyn
from causalpc.dynamics import (AdamW, SGD, NegativeSampling, TrainConfig,
                               gain_grads, run_inference, train, value_grads,
                               value_step, weight_grads)
from causalpc.graph import (EnergyTarget, ScalarLinear, build_graph, energy,
                            init_state, predict, set_value)
from conftest import random_dag_graph, randomize_values


def chain(w=1.0):
    return build_graph([1, 1], {(0, 1): ScalarLinear(w)})


def fd_value_grad(g, s, j, b, d, target=None, eps=1e-6):
    x0 = s.values[j][b, d]
    s.values[j][b, d] = x0 + eps
    predict(g, s)
    fp = energy(g, s, target)
    s.values[j][b, d] = x0 - eps
    predict(g, s)
    fm = energy(g, s, target)
    s.values[j][b, d] = x0
    predict(g, s)
    return (fp - fm) / (2 * eps) * s.batch  # per-row gradient


class TestValueStep:
    def test_child_error_pulls_parent(self):
        g = chain()
        s = init_state(g)
        set_value(s, 0, [0.0], clamp=False)
        set_value(s, 1, [1.0])
        predict(g, s)
        gamma = 0.1
        value_step(g, s, gamma)
        assert s.values[0] == pytest.approx(gamma)

    def test_error_clamped_child_contributes_nothing(self):
        g = chain()
        s = init_state(g)
        set_value(s, 0, [0.0], clamp=False)
        set_value(s, 1, [1.0])
        s.error_clamped[1] = True
        predict(g, s)
        value_step(g, s, 0.1)
        assert s.values[0] == pytest.approx(0.0)

    def test_isolated_root_prior_pull(self):
        g = build_graph([1, 1], {(0, 1): ScalarLinear(1.0)})
        s = init_state(g)
        set_value(s, 0, [2.0], clamp=False)
        set_value(s, 1, [0.0])
        s.error_clamped[1] = True  # isolate from the child term
        predict(g, s)
        value_step(g, s, 0.1)
        assert s.values[0] == pytest.approx(2.0 - 0.1 * 2.0)

    def test_direction_is_half_negative_gradient(self, rng):
        for seed in range(10):
            g = random_dag_graph(np.random.default_rng(seed))
            s = randomize_values(init_state(g, 2), rng)
            predict(g, s)
            grads = value_grads(g, s)
            before = [v.copy() for v in s.values]
            value_step(g, s, 1.0)
            for j in range(g.n):
                np.testing.assert_allclose(
                    s.values[j] - before[j], -0.5 * grads[j], atol=1e-12)


class TestGradients:
    def test_value_grads_match_fd(self, rng):
        for seed in range(15):
            r = np.random.default_rng(seed)
            g = random_dag_graph(r)
            s = randomize_values(init_state(g, 2), rng)
            target = EnergyTarget(int(r.integers(0, g.n)), float(r.uniform(0, 2))) \
                if r.random() < 0.5 else None
            predict(g, s)
            vg = value_grads(g, s, target)
            for j in range(g.n):
                for b in range(2):
                    for d in range(g.dims[j]):
                        num = fd_value_grad(g, s, j, b, d, target)
                        assert abs(num - vg[j][b, d]) < 1e-5 * max(1.0, abs(num))

    def test_weight_grad_example(self):
        # e_1 = 1, f(x_0) = 2, unit gain scalar edge: dF/dw = -2*e*f = -4
        g = chain(w=0.0)
        s = init_state(g)
        set_value(s, 0, [2.0])
        set_value(s, 1, [1.0])
        predict(g, s)
        wg = weight_grads(g, s)
        assert wg[(0, 1)][0][0] == pytest.approx(-4.0)

    def test_zero_error_zero_weight_grad(self):
        g = chain(w=1.0)
        s = init_state(g)
        set_value(s, 0, [1.0])
        set_value(s, 1, [1.0])
        predict(g, s)
        assert weight_grads(g, s)[(0, 1)][0][0] == pytest.approx(0.0)

    def test_gated_out_edge_has_zero_grad(self):
        g = build_graph([1, 1], {(0, 1): ScalarLinear(1.0)},
                        gains_init=np.zeros((2, 2)))
        s = init_state(g)
        set_value(s, 0, [1.0])
        set_value(s, 1, [5.0])
        predict(g, s)
        assert weight_grads(g, s)[(0, 1)][0][0] == pytest.approx(0.0)

    def test_gain_grad_example(self):
        # e_1 = 1, edge output f(x_0) = 3: dF/da = -2 * 1 * 3 = -6
        g = build_graph([1, 1], {(0, 1): ScalarLinear(3.0)},
                        gains_init=np.zeros((2, 2)))
        s = init_state(g)
        set_value(s, 0, [1.0])
        set_value(s, 1, [1.0])
        predict(g, s)
        gg = gain_grads(g, s)
        assert gg[0, 1] == pytest.approx(-6.0)

    def test_orthogonal_error_zero_gain_grad(self):
        from causalpc.graph import DenseLinear
        g = build_graph([2, 2], {(0, 1): DenseLinear(np.eye(2))})
        s = init_state(g)
        set_value(s, 0, [1.0, 0.0])
        set_value(s, 1, [1.0, 1.0])  # e = (0, 1), edge out = (1, 0)
        predict(g, s)
        assert gain_grads(g, s)[0, 1] == pytest.approx(0.0)

    def test_self_gain_zero_at_fixed_point(self):
        g = build_graph([1], {(0, 0): ScalarLinear(1.0)}, allow_self_edges=True)
        s = init_state(g)
        set_value(s, 0, [2.0])  # e = x - a*x = 0 at a = 1
        predict(g, s)
        assert gain_grads(g, s)[0, 0] == pytest.approx(0.0)

    def test_weight_gain_grads_match_fd(self, rng):
        for seed in range(10):
            r = np.random.default_rng(seed + 100)
            g = random_dag_graph(r)
            s = randomize_values(init_state(g, 2), rng)
            predict(g, s)
            eps = 1e-6
            wg = weight_grads(g, s)
            for key, fn in g.trainable_edges():
                for pi, p in enumerate(fn.params()):
                    flat = p.ravel()
                    for idx in range(flat.size):
                        v0 = flat[idx]
                        flat[idx] = v0 + eps
                        predict(g, s)
                        fp = energy(g, s)
                        flat[idx] = v0 - eps
                        predict(g, s)
                        fm = energy(g, s)
                        flat[idx] = v0
                        predict(g, s)
                        num = (fp - fm) / (2 * eps)
                        ana = wg[key][pi].ravel()[idx]
                        assert abs(num - ana) < 1e-5 * max(1.0, abs(num))
            gg = gain_grads(g, s)
            for (i, j) in g.edges:
                a0 = g.gains[i, j]
                g.gains[i, j] = a0 + eps
                predict(g, s)
                fp = energy(g, s)
                g.gains[i, j] = a0 - eps
                predict(g, s)
                fm = energy(g, s)
                g.gains[i, j] = a0
                predict(g, s)
                num = (fp - fm) / (2 * eps)
                assert abs(num - gg[i, j]) < 1e-5 * max(1.0, abs(num))


class TestInference:
    def test_conditional_fixed_point(self):
        g = chain()
        s = init_state(g)
        set_value(s, 1, [1.0])
        s, trace = run_inference(g, s, TrainConfig(T=4000, gamma=0.05))
        assert s.values[0] == pytest.approx(0.5, abs=1e-6)

    def test_intervention_semantics_error_clamp(self):
        g = chain()
        s = init_state(g)
        set_value(s, 1, [1.0])
        s.error_clamped[1] = True
        s, _ = run_inference(g, s, TrainConfig(T=4000, gamma=0.05))
        assert s.values[0] == pytest.approx(0.0, abs=1e-8)

    def test_all_clamped_state_constant(self):
        g = chain()
        s = init_state(g)
        set_value(s, 0, [1.0])
        set_value(s, 1, [3.0])
        s, trace = run_inference(g, s, TrainConfig(T=5, gamma=0.1))
        assert s.values[0] == pytest.approx(1.0)
        assert s.values[1] == pytest.approx(3.0)
        assert len(set(np.round(trace, 12))) == 1

    def test_energy_descent_linear(self, rng):
        for seed in range(8):
            g = random_dag_graph(np.random.default_rng(seed), weight_scale=0.5)
            s = randomize_values(init_state(g, 1), rng)
            s.value_clamped[0] = True
            s, trace = run_inference(g, s, TrainConfig(T=50, gamma=0.01))
            diffs = np.diff(trace)
            assert np.all(diffs <= 1e-12)

    def test_value_clamp_bit_identical(self, rng):
        g = random_dag_graph(np.random.default_rng(3))
        s = randomize_values(init_state(g, 2), rng)
        s.value_clamped[0] = True
        s.value_clamped[g.n - 1] = True
        frozen = [s.values[0].copy(), s.values[g.n - 1].copy()]
        s, _ = run_inference(g, s, TrainConfig(T=20, gamma=0.05))
        np.testing.assert_array_equal(s.values[0], frozen[0])
        np.testing.assert_array_equal(s.values[g.n - 1], frozen[1])


class TestOptimizers:
    def test_sgd_step(self):
        p = np.array([1.0])
        SGD([p], lr=0.1).step([np.array([0.5])])
        assert p[0] == pytest.approx(0.95)

    def test_adamw_first_step_unit_ratio(self):
        p = np.array([1.0])
        AdamW([p], lr=0.1).step([np.array([1.0])])
        assert p[0] == pytest.approx(0.9, abs=1e-7)

    def test_zero_grad_no_motion(self):
        p = np.array([2.0])
        opt = AdamW([p], lr=0.1, weight_decay=0.0)
        opt.step([np.array([0.0])])
        assert p[0] == pytest.approx(2.0)

    def test_decoupled_decay(self):
        p = np.array([1.0])
        opt = AdamW([p], lr=0.1, weight_decay=0.5)
        opt.step([np.array([0.0])])
        assert p[0] == pytest.approx(1.0 - 0.1 * 0.5)

    def test_shape_mismatch_rejected(self):
        p = np.array([1.0, 2.0])
        with pytest.raises(ValueError):
            SGD([p], lr=0.1).step([np.zeros(3)])


class TestTrain:
    def test_recovers_weight(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(800, 1))
        y = 2.0 * x + 0.1 * rng.normal(size=(800, 1))
        data = np.hstack([x, y])
        g = chain(w=0.0)
        cfg = TrainConfig(T=1, gamma=1e-3, alpha=2e-2, weight_decay=0.0,
                          epochs=120, batch_size=128, seed=0)
        train(g, data, {0: 0, 1: 1}, cfg)
        assert g.edges[(0, 1)].w[0] == pytest.approx(2.0, abs=0.05)

    def test_zero_epochs_no_change(self):
        g = chain(w=1.5)
        data = np.random.default_rng(0).normal(size=(10, 2))
        cfg = TrainConfig(epochs=0, batch_size=4)
        train(g, data, {0: 0, 1: 1}, cfg)
        assert g.edges[(0, 1)].w[0] == 1.5

    def test_ipc_matches_standard_at_T1(self):
        data = np.random.default_rng(1).normal(size=(64, 2))
        results = []
        for mode in ("standard", "ipc"):
            g = chain(w=0.3)
            cfg = TrainConfig(T=1, gamma=1e-3, alpha=1e-2, weight_decay=0.0,
                              epochs=5, batch_size=16, mode=mode, seed=5)
            train(g, data, {0: 0, 1: 1}, cfg)
            results.append(g.edges[(0, 1)].w[0])
        assert results[0] == pytest.approx(results[1], abs=1e-14)

    def test_dimension_mismatch_rejected(self):
        from causalpc.graph import DenseLinear, GraphError
        g = build_graph([2, 1], {(0, 1): DenseLinear(np.zeros((1, 2)))})
        data = np.zeros((4, 2))
        with pytest.raises(GraphError):
            train(g, data, {0: 0, 1: 1}, TrainConfig(epochs=1, batch_size=2))

    def test_negative_sampling_validation(self):
        with pytest.raises(ValueError):
            NegativeSampling(p_ns=1.5, k=1.0, label_vertex=0)
        with pytest.raises(ValueError):
            NegativeSampling(p_ns=0.5, k=0.0, label_vertex=0)


class TestDenseFastPath:
    def test_matches_generic_route(self, monkeypatch):
        from causalpc.structlearn import DiscoveryConfig, discover
        rng = np.random.default_rng(2)
        data = rng.normal(size=(120, 3))
        cfg = DiscoveryConfig(epochs=25, batch_size=32, seed=9)
        fast = discover(data, cfg).weighted
        monkeypatch.setattr(dyn, "_uniform_scalar_clamped", lambda *a: False)
        slow = discover(data, cfg).weighted
        np.testing.assert_allclose(fast, slow, atol=1e-12)

    def test_matches_generic_route_with_negatives(self, monkeypatch):
        from causalpc.structlearn import (DiscoveryConfig, PriorConfig,
                                          discover_with_negatives)
        rng = np.random.default_rng(3)
        data = rng.normal(size=(150, 2))
        labels = 1.1 * data[:, 0] + 0.1 * rng.normal(size=150)
        cfg = DiscoveryConfig(epochs=20, batch_size=32, seed=4,
                              priors=PriorConfig(lambda_dag=0.0,
                                                 negative_samples={"p_ns": 0.2, "k": 1.0}))
        fast = discover_with_negatives(data, labels, cfg).weighted
        monkeypatch.setattr(dyn, "_uniform_scalar_clamped", lambda *a: False)
        slow = discover_with_negatives(data, labels, cfg).weighted
        np.testing.assert_allclose(fast, slow, atol=1e-12)
