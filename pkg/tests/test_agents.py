"""Tests for the three learning algorithms and their shared plumbing.

Scalar update rules (advantages, surrogates, bootstrapped targets, soft
mixing) are pinned by hand arithmetic; the training loops run on a tiny real
environment and must be reproducible to the byte.
"""

import filecmp
import math

import numpy as np
import pytest

from srnoma.agents import (
    A3cAgent,
    ALGORITHMS,
    PpoAgent,
    ReplayBuffer,
    Td3Agent,
    TrainingTrace,
    advantage_and_target,
    build_agent,
    clipped_surrogate,
    kstep_returns,
    random_policy_trace,
    soft_update,
    td3_target,
    train,
)
from srnoma.env import SrEnv
from srnoma.network import SystemConfig
from srnoma.nn import Mlp


def tiny_env(steps=5, **over):
    cfg = SystemConfig(n_bs_antennas=1, n_ris_elements=1, n_pairs=1)
    return SrEnv(cfg, episode_steps=steps, rate_cap=2.0, **over)


# ===========================================================================
# shared plumbing
# ===========================================================================


class TestReplayBuffer:
    def test_fill_and_len(self):
        buf = ReplayBuffer(4, state_dim=2, action_dim=1)
        assert len(buf) == 0
        for k in range(3):
            buf.add([k, k], [k], float(k), [k + 1, k + 1], 0.0)
        assert len(buf) == 3

    def test_circular_overwrite(self):
        buf = ReplayBuffer(2, state_dim=1, action_dim=1)
        for k in range(5):
            buf.add([k], [k], float(k), [k], 0.0)
        assert len(buf) == 2
        stored = set(buf.rewards.tolist())
        assert stored == {3.0, 4.0}, "oldest transitions must be overwritten"

    def test_sample_shapes(self):
        buf = ReplayBuffer(16, state_dim=3, action_dim=2)
        for k in range(10):
            buf.add(np.full(3, k), np.full(2, k), float(k), np.full(3, k), 0.0)
        batch = buf.sample(np.random.default_rng(0), 6)
        assert batch["states"].shape == (6, 3)
        assert batch["actions"].shape == (6, 2)
        assert batch["rewards"].shape == (6,)
        assert batch["dones"].shape == (6,)


class TestTrace:
    def test_append_and_len(self):
        trace = TrainingTrace()
        trace.append(0, 1.5, 0.2, 9)
        trace.append(1, 2.5, 0.3, 10)
        assert len(trace) == 2
        assert trace.mean_rewards == [1.5, 2.5]
        assert not trace.aborted

    def test_csv_layout(self, tmp_path):
        trace = TrainingTrace()
        trace.append(0, 1.0 / 3.0, 0.1, 8)
        path = tmp_path / "trace.csv"
        trace.to_csv(path, config_hash="abc123", seed=7)
        lines = path.read_text().splitlines()
        assert lines[0] == "episode,mean_reward,min_rate,satisfied_count,config_hash,seed"
        fields = lines[1].split(",")
        assert fields[0] == "0" and fields[-2] == "abc123" and fields[-1] == "7"
        assert float(fields[1]) == 1.0 / 3.0

    def test_csv_bytes_are_reproducible(self, tmp_path):
        env = tiny_env()
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        random_policy_trace(env, episodes=3, seed=5).to_csv(a, "h", 5)
        random_policy_trace(env, episodes=3, seed=5).to_csv(b, "h", 5)
        assert filecmp.cmp(a, b, shallow=False), "identical runs must dump identical bytes"


# ===========================================================================
# scalar update rules
# ===========================================================================


class TestUpdateRules:
    def test_one_step_advantage(self):
        adv, target = advantage_and_target(
            rewards=np.array([1.0]), values=np.array([1.0]),
            next_values=np.array([0.96]), dones=np.array([0.0]), discount=0.5,
        )
        np.testing.assert_allclose(target, [1.48])
        np.testing.assert_allclose(adv, [0.48])

    def test_terminal_step_drops_bootstrap(self):
        adv, target = advantage_and_target(
            rewards=np.array([1.0]), values=np.array([3.0]),
            next_values=np.array([100.0]), dones=np.array([1.0]), discount=0.9,
        )
        np.testing.assert_allclose(target, [1.0])
        np.testing.assert_allclose(adv, [-2.0])

    def test_surrogate_clips_optimistic_ratios(self):
        got = clipped_surrogate(np.array([2.0]), np.array([1.0]), clip=0.2)
        np.testing.assert_allclose(got, [1.2])

    def test_surrogate_is_pessimistic_for_negative_advantage(self):
        got = clipped_surrogate(np.array([0.5]), np.array([-1.0]), clip=0.2)
        np.testing.assert_allclose(got, [-0.8])

    def test_surrogate_identity_region(self):
        got = clipped_surrogate(np.array([1.1]), np.array([2.0]), clip=0.2)
        np.testing.assert_allclose(got, [2.2])

    def test_td3_target_scalar(self):
        assert math.isclose(td3_target(1.0, 0.99, 2.0, 3.0, 0.0), 2.98)

    def test_td3_target_takes_min(self):
        assert math.isclose(td3_target(0.0, 1.0, 5.0, 2.0, 0.0), 2.0)

    def test_td3_target_terminal(self):
        assert math.isclose(td3_target(1.0, 0.99, 2.0, 3.0, 1.0), 1.0)

    def test_soft_update_arithmetic(self):
        rng = np.random.default_rng(0)
        target, online = Mlp((1, 1), rng), Mlp((1, 1), rng)
        target.weights[0][...] = 1.0
        online.weights[0][...] = 2.0
        soft_update(target, online, mix=0.0005)
        np.testing.assert_allclose(target.weights[0], [[1.0005]], rtol=1e-12)

    def test_kstep_returns_suffix_sums(self):
        got = kstep_returns(np.array([1.0, 2.0, 3.0]), bootstrap=4.0, discount=1.0)
        np.testing.assert_allclose(got, [10.0, 9.0, 7.0])

    def test_kstep_returns_zero_discount(self):
        got = kstep_returns(np.array([1.0, 2.0]), bootstrap=99.0, discount=0.0)
        np.testing.assert_allclose(got, [1.0, 2.0])

    def test_kstep_returns_single_step(self):
        got = kstep_returns(np.array([1.0]), bootstrap=2.0, discount=0.9)
        np.testing.assert_allclose(got, [2.8])


# ===========================================================================
# PPO agent
# ===========================================================================


class TestPpo:
    def test_ratio_is_one_before_any_update(self):
        agent = PpoAgent(state_dim=2, action_dim=1, hidden=(4,), seed=0)
        states, pres, logps = [], [], []
        rng = np.random.default_rng(0)
        for _ in range(5):
            s = rng.standard_normal(2)
            _, pre, logp = agent.act(s)
            states.append(s)
            pres.append(pre)
            logps.append(logp)
        fresh = agent.policy.log_prob(np.stack(states), np.stack(pres))
        np.testing.assert_allclose(
            np.exp(fresh - np.asarray(logps)), np.ones(5), rtol=1e-12,
            err_msg="policy and its frozen copy must agree before updates",
        )

    def test_critic_regression_arithmetic(self):
        # critic (1 -> 1) all zeros, one sample at s = 0 with target 1:
        # d/db of (v - 1)^2 is -2, so SGD with lr 1/4 moves the bias to 0.5
        agent = PpoAgent(
            state_dim=1, action_dim=1, hidden=(), critic_lr=0.25,
            minibatch=1, update_epochs=1, seed=0,
        )
        for arr in agent.critic.parameters():
            arr[...] = 0.0
        agent.critic_old.load_from(agent.critic)
        states = np.zeros((1, 1))
        pres = np.zeros((1, 1))
        logp_old = agent.policy.log_prob(states, pres)
        agent.update(states, pres, logp_old, np.zeros(1), targets=np.ones(1))
        assert math.isclose(agent.critic.biases[0][0], 0.5, rel_tol=1e-12)

    def test_update_refreshes_frozen_copies(self):
        agent = PpoAgent(state_dim=2, action_dim=1, hidden=(4,), seed=1)
        states = np.random.default_rng(1).standard_normal((8, 2))
        pres = np.random.default_rng(2).standard_normal((8, 1))
        logp_old = agent.policy.log_prob(states, pres)
        agent.update(states, pres, logp_old, np.ones(8), np.ones(8))
        for mine, frozen in zip(agent.policy.parameters(), agent.policy_old.parameters()):
            np.testing.assert_array_equal(mine, frozen)
        for mine, frozen in zip(agent.critic.parameters(), agent.critic_old.parameters()):
            np.testing.assert_array_equal(mine, frozen)

    def test_nonfinite_ratios_are_dropped_and_counted(self):
        agent = PpoAgent(
            state_dim=1, action_dim=1, hidden=(), minibatch=2, update_epochs=1, seed=2
        )
        states = np.zeros((2, 1))
        pres = np.zeros((2, 1))
        logp_old = agent.policy.log_prob(states, pres)
        logp_old[0] = -1e300  # forces an overflowing ratio
        agent.update(states, pres, logp_old, np.zeros(2), np.zeros(2))
        assert agent.dropped_samples == 1
        assert np.all(np.isfinite(agent.policy.log_std))

    def test_positive_advantage_moves_policy_toward_sample(self):
        agent = PpoAgent(
            state_dim=1, action_dim=1, hidden=(), actor_lr=0.01,
            minibatch=4, update_epochs=1, seed=3,
        )
        states = np.zeros((4, 1))
        pres = np.full((4, 1), 0.7)
        logp_old = agent.policy.log_prob(states, pres)
        before = agent.policy.log_prob(states, pres).sum()
        agent.update(states, pres, logp_old, np.ones(4), np.zeros(4))
        after = agent.policy.log_prob(states, pres).sum()
        assert after > before, "rewarded samples must become more likely"

    def test_state_dict_round_trip(self):
        agent = PpoAgent(state_dim=2, action_dim=1, hidden=(4,), seed=4)
        states = np.random.default_rng(3).standard_normal((6, 2))
        pres = np.random.default_rng(4).standard_normal((6, 1))
        agent.update(states, pres, agent.policy.log_prob(states, pres),
                     np.ones(6), np.ones(6))
        clone = PpoAgent(state_dim=2, action_dim=1, hidden=(4,), seed=99)
        clone.load_state_dict(agent.state_dict())
        probe = np.random.default_rng(5).standard_normal((3, 2))
        np.testing.assert_array_equal(
            clone.policy.net.forward(probe), agent.policy.net.forward(probe)
        )
        np.testing.assert_array_equal(
            clone.critic.forward(probe), agent.critic.forward(probe)
        )


# ===========================================================================
# TD3 agent
# ===========================================================================


class TestTd3:
    def make_agent(self, **over):
        base = dict(
            state_dim=2, action_dim=1, hidden=(8,), minibatch=4, buffer_size=32, seed=0
        )
        base.update(over)
        return Td3Agent(**base)

    def fill(self, agent, n):
        rng = np.random.default_rng(10)
        for _ in range(n):
            s = rng.standard_normal(2)
            agent.observe(s, rng.uniform(-1, 1, 1), rng.normal(), rng.standard_normal(2), 0.0)

    def test_greedy_action_is_deterministic_and_bounded(self):
        agent = self.make_agent()
        s = np.array([0.3, -0.8])
        a1 = agent.act(s, explore=False)
        a2 = agent.act(s, explore=False)
        np.testing.assert_array_equal(a1, a2)
        assert np.all(np.abs(a1) <= 1.0)

    def test_exploration_noise_perturbs(self):
        agent = self.make_agent()
        s = np.zeros(2)
        assert not np.array_equal(agent.act(s, explore=True), agent.act(s, explore=False))
        assert np.all(np.abs(agent.act(s, explore=True)) <= 1.0)

    def test_update_waits_for_minibatch(self):
        agent = self.make_agent(minibatch=4)
        self.fill(agent, 3)
        assert agent.update() is False
        assert agent.update_count == 0
        self.fill(agent, 1)
        assert agent.update() is True
        assert agent.update_count == 1

    def test_critic_gradients_vanish_at_the_target(self):
        agent = self.make_agent()
        sa = np.random.default_rng(11).standard_normal((4, 3))
        q = agent.critic1.forward(sa)[:, 0]
        grads = agent._critic_gradients(agent.critic1, sa, q)
        for g in grads:
            np.testing.assert_allclose(g, np.zeros_like(g), atol=1e-15)

    def test_actor_updates_are_delayed(self):
        agent = self.make_agent(policy_delay=2)
        self.fill(agent, 8)
        actor_before = [p.copy() for p in agent.actor.parameters()]
        target_before = [p.copy() for p in agent.actor_target.parameters()]
        agent.update()  # count 1: critics only
        for p, q in zip(agent.actor.parameters(), actor_before):
            np.testing.assert_array_equal(p, q)
        for p, q in zip(agent.actor_target.parameters(), target_before):
            np.testing.assert_array_equal(p, q)
        agent.update()  # count 2: actor and targets move
        moved = any(
            not np.array_equal(p, q)
            for p, q in zip(agent.actor.parameters(), actor_before)
        )
        assert moved, "actor must step on the delayed update"
        target_moved = any(
            not np.array_equal(p, q)
            for p, q in zip(agent.actor_target.parameters(), target_before)
        )
        assert target_moved, "targets must mix on the delayed update"

    def test_critics_move_every_update(self):
        agent = self.make_agent()
        self.fill(agent, 8)
        before = [p.copy() for p in agent.critic1.parameters()]
        agent.update()
        assert any(
            not np.array_equal(p, q) for p, q in zip(agent.critic1.parameters(), before)
        )

    def test_state_dict_round_trip(self):
        agent = self.make_agent()
        self.fill(agent, 8)
        agent.update()
        agent.update()
        clone = self.make_agent(seed=5)
        clone.load_state_dict(agent.state_dict())
        assert clone.update_count == agent.update_count
        probe = np.random.default_rng(12).standard_normal(2)
        np.testing.assert_array_equal(
            clone.act(probe, explore=False), agent.act(probe, explore=False)
        )


# ===========================================================================
# A3C agent
# ===========================================================================


class TestA3c:
    def test_zero_advantage_leaves_only_entropy_pressure(self):
        agent = A3cAgent(state_dim=1, action_dim=1, hidden=(), entropy_coef=0.01, seed=0)
        local_policy = agent.policy.copy()
        local_critic = agent.critic.copy()
        for arr in local_critic.parameters():
            arr[...] = 0.0
        local_critic.biases[-1][...] = 2.0  # V(s) = 2 everywhere
        states = np.zeros((3, 1))
        pres = np.zeros((3, 1))
        returns = np.full(3, 2.0)  # advantages are exactly zero
        actor_grads, log_std_grad, critic_grads = agent.segment_gradients(
            local_policy, local_critic, states, pres, returns
        )
        for g in actor_grads:
            np.testing.assert_allclose(g, np.zeros_like(g), atol=1e-15)
        for g in critic_grads:
            np.testing.assert_allclose(g, np.zeros_like(g), atol=1e-15)
        np.testing.assert_allclose(log_std_grad, [-0.03], rtol=1e-12)

    def test_apply_gradients_steps_globals(self):
        agent = A3cAgent(state_dim=1, action_dim=1, hidden=(), actor_lr=0.1,
                         critic_lr=0.1, seed=1)
        log_std_before = agent.policy.log_std.copy()
        zero_actor = [np.zeros_like(p) for p in agent.policy.net.parameters()]
        zero_critic = [np.zeros_like(p) for p in agent.critic.parameters()]
        agent.apply_gradients(zero_actor, np.array([1.0]), zero_critic)
        np.testing.assert_allclose(agent.policy.log_std, log_std_before - 0.1)

    def test_single_worker_serial_and_threaded_agree(self):
        def run(use_threads):
            env = tiny_env(steps=6)
            agent = A3cAgent(
                env.state_dim, env.action_dim, hidden=(8,), workers=1,
                k_steps=3, seed=7,
            )
            rng = np.random.Generator(np.random.Philox(99))
            agent.run_episode_round([env], [11], [rng], use_threads=use_threads)
            return agent.state_dict()

        serial = run(False)
        threaded = run(True)
        assert set(serial) == set(threaded)
        for key in serial:
            np.testing.assert_array_equal(
                serial[key], threaded[key],
                err_msg=f"{key} differs between serial and threaded execution",
            )

    def test_multi_worker_round_returns_one_stat_per_worker(self):
        env = tiny_env(steps=4)
        agent = A3cAgent(env.state_dim, env.action_dim, hidden=(4,), workers=3,
                         k_steps=2, seed=3)
        envs = [env] + [env.replicate() for _ in range(2)]
        rngs = [np.random.Generator(np.random.Philox(k)) for k in range(3)]
        results = agent.run_episode_round(envs, [1, 2, 3], rngs)
        assert len(results) == 3
        assert all(r.steps == 4 for r in results)

    def test_state_dict_round_trip(self):
        agent = A3cAgent(state_dim=2, action_dim=1, hidden=(4,), seed=4)
        clone = A3cAgent(state_dim=2, action_dim=1, hidden=(4,), seed=50)
        clone.load_state_dict(agent.state_dict())
        probe = np.random.default_rng(0).standard_normal((3, 2))
        np.testing.assert_array_equal(
            clone.policy.net.forward(probe), agent.policy.net.forward(probe)
        )


# ===========================================================================
# unified training entry
# ===========================================================================


class TestTrain:
    def test_build_agent_rejects_unknown_algorithm(self):
        with pytest.raises(ValueError):
            build_agent("dqn", 4, 2, None, seed=0)

    def test_build_agent_filters_foreign_hypers(self):
        agent = build_agent(
            "ppo", 4, 2, {"clip": 0.1, "buffer_size": 999, "hidden": [8, 8]}, seed=0
        )
        assert agent.clip == 0.1
        assert agent.policy.net.sizes == (4, 8, 8, 2)

    @pytest.mark.parametrize("algo", ALGORITHMS)
    def test_short_run_completes(self, algo):
        env = tiny_env(steps=5)
        hyper = {"hidden": (8,), "minibatch": 4, "workers": 2, "k_steps": 3}
        agent, trace = train(algo, env, episodes=2, seed=0, hyper=hyper)
        assert len(trace) == 2
        assert not trace.aborted
        assert all(np.isfinite(r) for r in trace.mean_rewards)

    def test_zero_episodes_gives_empty_trace(self):
        env = tiny_env(steps=3)
        agent, trace = train("ppo", env, episodes=0, seed=0, hyper={"hidden": (4,)})
        assert len(trace) == 0 and not trace.aborted

    def test_checkpoints_are_written(self, tmp_path):
        env = tiny_env(steps=3)
        train(
            "td3", env, episodes=2, seed=0,
            hyper={"hidden": (4,), "minibatch": 2},
            checkpoint_dir=tmp_path, checkpoint_every=1,
        )
        assert (tmp_path / "ckpt_td3_final.npz").exists()
        assert (tmp_path / "ckpt_td3_ep000001.npz").exists()
        assert (tmp_path / "ckpt_td3_ep000002.npz").exists()

    @pytest.mark.parametrize("algo", ALGORITHMS)
    def test_repeat_runs_are_bit_identical(self, algo, tmp_path):
        hyper = {"hidden": (8,), "minibatch": 4, "workers": 1, "k_steps": 3}
        paths = []
        for tag in ("first", "second"):
            env = tiny_env(steps=5)
            _, trace = train(algo, env, episodes=3, seed=11, hyper=hyper)
            path = tmp_path / f"{algo}_{tag}.csv"
            trace.to_csv(path, config_hash="fixed", seed=11)
            paths.append(path)
        assert filecmp.cmp(*paths, shallow=False), (
            f"{algo} training must be reproducible to the byte"
        )


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
