import numpy as np
import pytest

from metaslice.nets import DuelingNet


def constant_head_net(value, advantages, aggregation="mean"):
    """Net whose heads ignore the input: V(s) = value, Y(s, .) = advantages."""
    net = DuelingNet(input_width=2, hidden=(), aggregation=aggregation, seed=0)
    net.value_w[:] = 0.0
    net.value_b[:] = value
    net.adv_w[:] = 0.0
    net.adv_b[:] = advantages
    return net


class TestForward:
    def test_mean_aggregation(self):
        net = constant_head_net(1.0, (2.0, 4.0), "mean")
        assert net.q_values(np.zeros(2)) == pytest.approx([0.0, 2.0])

    def test_max_aggregation(self):
        net = constant_head_net(1.0, (2.0, 4.0), "max")
        assert net.q_values(np.zeros(2)) == pytest.approx([-1.0, 1.0])

    def test_equal_advantages_cancel(self):
        for c in (-3.0, 0.0, 7.5):
            net = constant_head_net(0.25, (c, c))
            assert net.q_values(np.ones(2)) == pytest.approx([0.25, 0.25])

    def test_width_mismatch(self):
        net = DuelingNet(4, (8,), seed=1)
        with pytest.raises(ValueError):
            net.q_values(np.zeros(3))

    def test_argmax_invariant_across_aggregations(self):
        rng = np.random.default_rng(0)
        for _ in range(10_000):
            v, y = rng.normal(), rng.normal(size=2)
            q_mean = v + y - y.mean()
            q_max = v + y - y.max()
            assert np.argmax(q_mean) == np.argmax(q_max)

    def test_net_level_argmax_invariance(self):
        rng = np.random.default_rng(1)
        mean_net = DuelingNet(5, (8, 8), aggregation="mean", seed=3)
        max_net = DuelingNet(5, (8, 8), aggregation="max", seed=3)
        for _ in range(200):
            x = rng.normal(size=5)
            assert np.argmax(mean_net.q_values(x)) == np.argmax(max_net.q_values(x))

    def test_greedy_action_value_pinned_to_state_value_under_max(self):
        rng = np.random.default_rng(2)
        net = DuelingNet(3, (8,), aggregation="max", seed=4)
        for _ in range(100):
            x = rng.normal(size=3)
            v, y, q = net.forward(x)
            assert q[0, y[0].argmax()] == pytest.approx(v[0], abs=1e-12)


class TestBackward:
    def test_zero_residual_is_stationary(self):
        net = DuelingNet(3, (8,), seed=5)
        state = np.array([0.1, -0.2, 0.5])
        target = float(net.q_values(state)[1])
        before = net.get_flat()
        cost = net.backward_and_update(state, [1], [target], lr=0.1)
        assert cost == 0.0
        assert np.array_equal(net.get_flat(), before)

    def test_single_linear_layer_closed_form(self):
        # heads directly on the input, linear: gradients have a hand form
        net = DuelingNet(3, (), activation="linear", seed=6)
        x = np.array([0.3, -1.2, 0.7])
        action, target = 1, 2.5
        q = float(net.q_values(x)[action])
        _, grads = net.gradients(x, [action], [target])
        resid = 2.0 * (q - target)
        assert grads["value_b"] == pytest.approx([resid])
        assert grads["value_w"] == pytest.approx(np.outer(x, [resid]))
        # mean aggregation: taken action keeps 1 - 1/2, the other loses 1/2
        expect_adv = np.array([-0.5 * resid, 0.5 * resid])
        assert grads["adv_b"] == pytest.approx(expect_adv)
        assert grads["adv_w"] == pytest.approx(np.outer(x, expect_adv))

    def test_cost_decreases_on_fixed_batch(self):
        rng = np.random.default_rng(7)
        net = DuelingNet(4, (16,), seed=8)
        states = rng.normal(size=(32, 4))
        actions = rng.integers(0, 2, 32)
        targets = rng.normal(size=32)
        costs = [net.backward_and_update(states, actions, targets, lr=0.01)
                 for _ in range(100)]
        assert costs[-1] < costs[0]
        assert costs[-1] < 0.6 * costs[0]

    def test_non_finite_target_rejected(self):
        net = DuelingNet(2, (4,), seed=9)
        with pytest.raises(ValueError):
            net.backward_and_update(np.zeros(2), [0], [np.nan], lr=0.1)

    def test_gradient_only_through_taken_action(self):
        net = constant_head_net(0.0, (1.0, -1.0))
        cost, grads = net.gradients(np.zeros(2), [0], [5.0])
        # the cost sees only the taken action's value
        assert cost == pytest.approx((5.0 - net.q_values(np.zeros(2))[0]) ** 2)
        # with two actions, mean centering makes the untaken advantage
        # gradient the exact negative of the taken one
        assert grads["adv_b"][1] == pytest.approx(-grads["adv_b"][0])


class TestFiniteDifference:
    def test_random_small_dueling_nets(self):
        rng = np.random.default_rng(10)
        for trial in range(10):
            net = DuelingNet(2, (8,), seed=100 + trial)
            state = rng.normal(size=2)
            err = net.finite_diff_check(state, int(rng.integers(0, 2)))
            assert err <= 1e-4

    def test_max_aggregation_gradients(self):
        rng = np.random.default_rng(11)
        for trial in range(5):
            net = DuelingNet(3, (6,), aggregation="max", seed=200 + trial)
            err = net.finite_diff_check(rng.normal(size=3), 1)
            assert err <= 1e-4

    def test_linear_activation_is_exact(self):
        rng = np.random.default_rng(12)
        net = DuelingNet(3, (6,), activation="linear", seed=13)
        err = net.finite_diff_check(rng.normal(size=3), 0)
        assert err <= 1e-6

    def test_dead_relu_network(self):
        net = DuelingNet(3, (5,), seed=14)
        net.set_flat(np.zeros(net.num_params))
        state = np.array([1.0, -2.0, 0.5])
        _, grads = net.gradients(state, [0], [1.0])
        for name in ("trunk_w", "trunk_b"):
            for g in grads[name]:
                assert np.array_equal(g, np.zeros_like(g))
        assert np.array_equal(grads["value_w"], np.zeros_like(grads["value_w"]))
        assert np.array_equal(grads["adv_w"], np.zeros_like(grads["adv_w"]))
        assert net.finite_diff_check(state, 0) <= 1e-4

    def test_eps_bounds(self):
        net = DuelingNet(2, (4,), seed=15)
        with pytest.raises(ValueError):
            net.finite_diff_check(np.zeros(2), 0, eps=1e-2)


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        net = DuelingNet(6, (16, 8), seed=16)
        net.backward_and_update(np.random.default_rng(0).normal(size=(4, 6)),
                                [0, 1, 0, 1], [1.0, -1.0, 0.5, 0.0], lr=1e-3)
        path = tmp_path / "ckpt.bin"
        net.save(path)
        loaded = DuelingNet.load(path)
        assert loaded.params_equal(net)
        assert loaded.hidden == (16, 8)
        x = np.linspace(-1, 1, 6)
        assert loaded.q_values(x) == pytest.approx(net.q_values(x), abs=0)

    def test_copy_is_bitwise_and_detached(self):
        net = DuelingNet(3, (8,), seed=17)
        clone = net.copy()
        assert clone.params_equal(net)
        clone.value_b += 1.0
        assert not clone.params_equal(net)
