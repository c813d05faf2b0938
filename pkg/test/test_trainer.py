#!/usr/bin/env python3
"""
Unit Tests for the Self-Healing Agent and Training Loop
=======================================================

Tests for the agent/trainer module.

Usage:
    python -m test.test_trainer
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from agent.dqn import DQNConfig, make_networks
from agent.replay import Transition
from agent.trainer import (EnvironmentFault, SelfHealingAgent, TrainingEnvironment,
                           run_training_episode, train)
from harness.scenarios import load_scenario
from netsim.knowledge import QoSIntents
from netsim.topology import load_topology
from netsim.traffic import default_flow_roster

QUIET = QoSIntents(u_thr=1.0, l_thr=1.0)
ALWAYS_VIOLATED = QoSIntents(u_thr=1.0, l_thr=1e-9)


def small_env(intents, scenarios=("TC1",), duration=0.3):
    graph = load_topology("small")
    return TrainingEnvironment(graph, default_flow_roster(graph),
                               [load_scenario(tc) for tc in scenarios],
                               intents=intents, duration=duration, seed=3)


class TestTrainingEnvironment(unittest.TestCase):
    """Test cases for the episode factory."""

    def test_needs_scenarios(self):
        graph = load_topology("small")
        with self.assertRaises(ValueError):
            TrainingEnvironment(graph, default_flow_roster(graph), [])

    def test_eta(self):
        self.assertEqual(small_env(QUIET).eta, 20)

    def test_episode_seeds(self):
        env = small_env(QUIET)
        self.assertEqual(env.episode_seed(4), env.episode_seed(4))
        self.assertNotEqual(env.episode_seed(4), env.episode_seed(5))

    def test_scenarios_cycle(self):
        env = small_env(QUIET, scenarios=("TC5", "TC9"))
        self.assertEqual(env.make(0).thermal_params, load_scenario("TC5").thermal)
        self.assertEqual(env.make(1).thermal_params, load_scenario("TC9").thermal)
        self.assertEqual(env.make(2).thermal_params, load_scenario("TC5").thermal)


class TestSelfHealingAgent(unittest.TestCase):
    """Test cases for the threshold-triggered control loop."""

    def make_agent(self, env, learning, **cfg_kwargs):
        cfg = DQNConfig(hidden=(8,), batch_size=8, buffer_capacity=100, **cfg_kwargs)
        net, target, optimizer = make_networks(env.eta, cfg)
        return SelfHealingAgent(net, cfg, target_net=target, optimizer=optimizer,
                                learning=learning, epsilon=0.5)

    def test_sleeps_without_violation(self):
        env = small_env(QUIET)
        agent = self.make_agent(env, learning=True)
        sim = run_training_episode(env, agent, 0)
        self.assertEqual(agent.decisions, 0)
        self.assertEqual(agent.transitions_stored, 0)
        self.assertEqual(len(sim.log), 0)
        self.assertAlmostEqual(sim.t, env.duration)

    def test_learns_while_violated(self):
        env = small_env(ALWAYS_VIOLATED)
        agent = self.make_agent(env, learning=True)
        run_training_episode(env, agent, 0)
        self.assertGreater(agent.decisions, 8)
        self.assertGreaterEqual(agent.transitions_stored, 8)
        self.assertGreaterEqual(agent.grad_steps, 1)
        self.assertEqual(len(agent.losses), agent.grad_steps)
        self.assertFalse(agent.recovered)

    def test_evaluation_mode_stores_nothing(self):
        env = small_env(ALWAYS_VIOLATED)
        agent = self.make_agent(env, learning=False)
        run_training_episode(env, agent, 0)
        self.assertGreater(agent.decisions, 0)
        self.assertEqual(agent.transitions_stored, 0)
        self.assertEqual(agent.grad_steps, 0)
        self.assertGreater(len(agent.knowledge), 0)

    def test_decision_cap(self):
        env = small_env(ALWAYS_VIOLATED)
        agent = self.make_agent(env, learning=False, max_decisions=3)
        sim = run_training_episode(env, agent, 0)
        self.assertEqual(agent.decisions, 3)
        self.assertLess(sim.t, env.duration)

    def test_one_outstanding_decision(self):
        env = small_env(ALWAYS_VIOLATED)
        agent = self.make_agent(env, learning=False)
        sim = env.make(0)
        for _ in range(50):
            agent.on_tick(sim, sim.step())
            self.assertLessEqual(sim.pending_events, 1)

    def test_target_syncs_every_300_gradient_steps(self):
        cfg = DQNConfig()
        net, target, optimizer = make_networks(20, cfg)
        agent = SelfHealingAgent(net, cfg, target_net=target, optimizer=optimizer, learning=True)
        rng = np.random.default_rng(5)
        for _ in range(cfg.batch_size):
            agent.buffer.push(Transition(rng.random(20), int(rng.integers(cfg.n_actions)),
                                         float(rng.uniform(-1.0, 1.0)), rng.random(20), False))
        synced_at = []
        before = agent.target_net.get_params()
        for _ in range(601):
            agent._learn()
            after = agent.target_net.get_params()
            if any(not np.array_equal(a, b) for a, b in zip(before, after)):
                synced_at.append(agent.grad_steps)
                for online, copied in zip(agent.net.get_params(), after):
                    np.testing.assert_array_equal(online, copied)
            before = after
        self.assertEqual(agent.grad_steps, 601)
        self.assertEqual(synced_at, [300, 600])


class TestTrain(unittest.TestCase):
    """Test cases for the training loop."""

    def test_quiet_training_run(self):
        env = small_env(QUIET)
        result = train(env, DQNConfig(episodes=2, hidden=(8,)), progress=False)
        self.assertEqual(len(result.curves), 2)
        self.assertEqual(result.curves[0].epsilon, 1.0)
        self.assertAlmostEqual(result.curves[1].epsilon, 0.995)
        self.assertTrue(math.isnan(result.curves[0].mean_loss))
        self.assertEqual(result.transitions_stored, 0)
        self.assertEqual(result.grad_steps, 0)

    def test_training_is_reproducible(self):
        cfg = DQNConfig(episodes=1, hidden=(8,), batch_size=8, buffer_capacity=100)
        first = train(small_env(ALWAYS_VIOLATED), cfg, progress=False)
        second = train(small_env(ALWAYS_VIOLATED), cfg, progress=False)
        self.assertGreater(first.grad_steps, 0)
        for a, b in zip(first.net.params, second.net.params):
            np.testing.assert_array_equal(a, b)

    def test_episode_sync(self):
        cfg = DQNConfig(episodes=1, hidden=(8,), batch_size=8, buffer_capacity=100, sync_per_episodes=1)
        result = train(small_env(ALWAYS_VIOLATED), cfg, progress=False)
        for a, b in zip(result.net.params, result.target_net.params):
            np.testing.assert_array_equal(a, b)

    def test_environment_fault_carries_episode(self):
        fault = EnvironmentFault(7, "temperature overflow")
        self.assertEqual(fault.episode, 7)
        self.assertIn("episode 7", str(fault))


if __name__ == '__main__':
    unittest.main()
