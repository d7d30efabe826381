import numpy as np
import pytest

from metaslice.agent import StateEncoder
from metaslice.config import ScenarioConfig
from metaslice.nets import DuelingNet
from metaslice.policies import (AlwaysAcceptPolicy, AlwaysRejectPolicy, GreedyPolicy,
                                ValueNetPolicy, make_baseline)
from metaslice.simulation import AdmissionSimulator, SystemState


def state(available, footprint, class_id=1, similarity=0.0):
    return SystemState(np.asarray(available, dtype=float),
                       np.asarray(footprint, dtype=float), class_id, similarity)


class TestGreedy:
    def test_accepts_when_room(self):
        assert GreedyPolicy().decide(state([1200, 1200, 1200], [120, 120, 120])) == 1

    def test_rejects_when_any_type_short(self):
        assert GreedyPolicy().decide(state([80, 200, 200], [120, 120, 120])) == 0

    def test_zero_footprint_always_fits(self):
        assert GreedyPolicy().decide(state([0, 0, 0], [0, 0, 0])) == 1


class TestConstants:
    def test_always_reject(self):
        assert AlwaysRejectPolicy().decide(state([0, 0, 0], [999, 0, 0])) == 0

    def test_always_accept(self):
        assert AlwaysAcceptPolicy().decide(state([0, 0, 0], [999, 0, 0])) == 1

    def test_env_coerces_always_accept_at_capacity(self):
        cfg = ScenarioConfig(sharing_enabled=False, seed=3)
        sim = AdmissionSimulator(cfg)
        coerced = False
        for _ in range(800):
            full = sim.manager.num_running_slices >= 10
            tr = sim.step(AlwaysAcceptPolicy().decide(sim.current_state))
            if full:
                assert tr.action == 0
                coerced = True
        assert coerced
        sim.manager.validate()


class TestValueNetPolicy:
    def test_follows_argmax_with_reject_ties(self):
        cfg = ScenarioConfig()
        net = DuelingNet(cfg.encoding_width, (), seed=0)
        net.value_w[:] = 0; net.adv_w[:] = 0
        policy = ValueNetPolicy(net, StateEncoder(cfg))
        s = state([1200, 1200, 1200], [120, 120, 120], 2, 0.0)
        net.adv_b[:] = (0.1, 0.9)
        assert policy.decide(s) == 1
        net.adv_b[:] = (0.9, 0.1)
        assert policy.decide(s) == 0
        net.adv_b[:] = (0.3, 0.3)
        assert policy.decide(s) == 0

    def test_mit_is_an_environment_flag_not_a_policy(self):
        # identical policy object; only the scenario's sharing flag differs
        policy = GreedyPolicy()
        with_mit = AdmissionSimulator(ScenarioConfig(seed=4))
        without = AdmissionSimulator(ScenarioConfig(seed=4, sharing_enabled=False))
        r_mit = with_mit.run_episode(policy, 3000).report()
        r_plain = without.run_episode(policy, 3000).report()
        assert r_mit.average_reward > r_plain.average_reward


class TestRegistry:
    def test_known_names(self):
        for name in ("greedy", "always_accept", "always_reject"):
            assert make_baseline(name).decide is not None

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown policy"):
            make_baseline("nope")
