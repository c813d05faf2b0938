#!/usr/bin/env python3
"""
Unit Tests for Delayed Actuation
================================

Tests for the netsim/actuation module and the simulator's event queue.

Usage:
    python -m test.test_actuation
"""

import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from netsim.actuation import (Action, ActionKind, ActuationEvent, ActuationSettings, apply_action,
                              sample_delay)
from netsim.knowledge import QoSIntents
from netsim.simulator import NetworkSimulator
from netsim.topology import load_topology
from netsim.traffic import FlowSpec, ServiceClass

PAIR = ("h01", "h02")
VIA_SP02 = ("lf01", "sp02", "lf02")


def quiet_simulator(seed=3):
    """One light time-sensitive flow and intents that never trigger."""
    graph = load_topology("small")
    flows = [FlowSpec("a", "h01", "h02", ServiceClass.TIME_SENSITIVE, 1e6)]
    return NetworkSimulator(graph, flows, intents=QoSIntents(u_thr=1.0, l_thr=1.0), seed=seed)


class TestSettings(unittest.TestCase):
    """Test cases for actuation settings and delay sampling."""

    def test_invalid_settings(self):
        for kwargs in ({'delay_min': 0.0}, {'delay_min': 0.01, 'delay_max': 0.005},
                       {'throttle_factor': 0.0}, {'throttle_floor': 1.5}):
            with self.subTest(**kwargs):
                with self.assertRaises(ValueError):
                    ActuationSettings(**kwargs)

    def test_delay_range(self):
        settings = ActuationSettings()
        rng = np.random.default_rng(0)
        delays = [sample_delay(settings, rng) for _ in range(1000)]
        self.assertGreaterEqual(min(delays), 0.001)
        self.assertLessEqual(max(delays), 0.0078)

    def test_delay_deterministic(self):
        settings = ActuationSettings()
        first = [sample_delay(settings, np.random.default_rng(9)) for _ in range(3)]
        self.assertEqual(len(set(first)), 1)


class TestApplyAction(unittest.TestCase):
    """Test cases for scheduling and executing actions."""

    def setUp(self):
        self.sim = quiet_simulator()
        self.rng = np.random.default_rng(1)

    def test_effective_after_decision(self):
        event = apply_action(self.sim, Action(ActionKind.NOOP), self.rng)
        self.assertGreater(event.t_effective, event.t_decide)
        self.assertAlmostEqual(event.t_effective - event.t_decide, event.delay)
        self.assertEqual(self.sim.pending_events, 1)
        self.assertEqual(len(self.sim.log), 1)

    def test_schedule_rejects_zero_delay(self):
        event = ActuationEvent(t_decide=0.0, action=Action(ActionKind.NOOP), t_effective=0.0, delay=0.0)
        with self.assertRaises(ValueError):
            self.sim.schedule(event)

    def test_path_takes_effect_only_after_delay(self):
        action = Action(ActionKind.PATH, pair=PAIR, path=VIA_SP02)
        event = apply_action(self.sim, action, self.rng)
        while self.sim.t + self.sim.settings.tick < event.t_effective:
            self.sim.step()
            self.assertFalse(event.applied)
        record = self.sim.step()
        self.assertTrue(event.applied)
        self.assertEqual(record.events_applied, 1)
        self.assertEqual(self.sim.pair_paths[PAIR], VIA_SP02)
        self.assertEqual(self.sim.pending_events, 0)

    def test_action_without_violation_is_stale(self):
        event = apply_action(self.sim, Action(ActionKind.PATH, pair=PAIR, path=VIA_SP02), self.rng)
        self.sim.run(0.01)
        self.assertTrue(event.applied)
        self.assertTrue(event.stale)
        self.assertEqual(self.sim.log.stale_count, 1)
        self.assertEqual(self.sim.stats['stale_events'], 1)

    def test_throttle_released_when_clean(self):
        action = Action(ActionKind.THROTTLE, service_class=ServiceClass.BEST_EFFORT)
        apply_action(self.sim, action, self.rng)
        self.sim.run(0.01)
        self.assertEqual(self.sim.throttle[ServiceClass.BEST_EFFORT], 0.5)
        # ten clean ticks with the unthrottled load under u_thr
        self.sim.run(0.05)
        self.assertEqual(self.sim.throttle[ServiceClass.BEST_EFFORT], 1.0)

    def test_throttle_floor(self):
        self.sim.intents = QoSIntents(u_thr=1.0, l_thr=1e-9)
        action = Action(ActionKind.THROTTLE, service_class=ServiceClass.BEST_EFFORT)
        for _ in range(5):
            apply_action(self.sim, action, self.rng)
            self.sim.run(0.01)
        self.assertEqual(self.sim.throttle[ServiceClass.BEST_EFFORT], 0.125)
        self.assertEqual(self.sim.throttle[ServiceClass.TIME_SENSITIVE], 1.0)

    def test_cooling(self):
        action = Action(ActionKind.COOLING, switches=("sp01",))
        apply_action(self.sim, action, self.rng)
        self.sim.run(0.01)
        idx = self.sim.graph.switch_index["sp01"]
        self.assertEqual(self.sim.thermal_state.c_hvac[idx], 1.0)

    def test_log_records(self):
        apply_action(self.sim, Action(ActionKind.THROTTLE, service_class=ServiceClass.BEST_EFFORT),
                     self.rng)
        records = self.sim.log.to_records()
        self.assertEqual(records[0]['action'], {'kind': 'throttle', 'index': -1,
                                                 'service_class': ServiceClass.BEST_EFFORT.value})
        self.assertFalse(records[0]['stale'])


class TestActionDescribe(unittest.TestCase):

    def test_describe(self):
        self.assertEqual(Action(ActionKind.PATH, pair=PAIR, path=VIA_SP02).describe(),
                         "path h01->h02 via lf01-sp02-lf02")
        self.assertEqual(Action(ActionKind.NOOP).describe(), "noop")
        self.assertEqual(Action(ActionKind.COOLING, switches=("a", "b")).describe(),
                         "cooling on 2 switch(es)")


if __name__ == '__main__':
    unittest.main()
