#!/usr/bin/env python3
"""
Unit Tests for Traffic, Latency and Loss
========================================

Tests for the netsim/traffic module.

Usage:
    python -m test.test_traffic
"""

import itertools
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from netsim.topology import load_topology
from netsim.traffic import (SERVICE_CATALOG, FlashEventConfig, FlashSchedule, FlowSpec,
                            MissingRouteError, Routing, ServiceClass, class_drop_fractions,
                            compute_traffic_matrix, critical_pairs, default_flow_roster,
                            flow_incidence, generate_offered_load, load_flow_roster, packet_loss,
                            path_latency, save_flow_roster)

TS = ServiceClass.TIME_SENSITIVE
DT = ServiceClass.DELAY_TOLERANT
BE = ServiceClass.BEST_EFFORT

PATH_A = ("lf01", "sp01", "lf02")
PATH_B = ("lf01", "sp02", "lf02")


class TestServiceModel(unittest.TestCase):
    """Test cases for service classes and flow specs."""

    def test_priority_order(self):
        self.assertLess(TS.priority, DT.priority)
        self.assertLess(DT.priority, BE.priority)

    def test_catalog_rates(self):
        self.assertEqual(SERVICE_CATALOG['turbine_operational'].nominal_rate, 4_096_000)
        self.assertEqual(SERVICE_CATALOG['bulk_maintenance'].nominal_rate, 25_000_000)
        self.assertEqual(SERVICE_CATALOG['protection'].service_class, TS)

    def test_flow_rate_must_be_positive(self):
        with self.assertRaises(ValueError):
            FlowSpec("f", "h01", "h02", TS, 0.0)

    def test_flow_class_coerced(self):
        flow = FlowSpec("f", "h01", "h02", "best-effort", 1.0)
        self.assertIs(flow.service_class, BE)
        self.assertEqual(flow.pair, ("h01", "h02"))

    def test_flash_config_validation(self):
        for kwargs in ({'arrival_rate': -1.0}, {'burst_multiplier': 0.5}, {'duration': 0.0}):
            with self.subTest(**kwargs):
                with self.assertRaises(ValueError):
                    FlashEventConfig(**kwargs)


class TestOfferedLoad(unittest.TestCase):
    """Test cases for generate_offered_load and flash schedules."""

    def setUp(self):
        self.flows = [FlowSpec("a", "h01", "h02", TS, 1e6), FlowSpec("b", "h01", "h02", BE, 2e6)]

    def test_nominal_without_flash(self):
        rates = generate_offered_load(self.flows, FlashEventConfig(), 5.0)
        np.testing.assert_array_equal(rates, [1e6, 2e6])

    def test_negative_time_rejected(self):
        with self.assertRaises(ValueError):
            generate_offered_load(self.flows, FlashEventConfig(), -0.1)

    def test_scheduled_flash_multiplies_flash_classes_only(self):
        flash = FlashEventConfig(burst_multiplier=4.0, duration=10.0)
        schedule = FlashSchedule(flash, np.random.default_rng(1), onset=20.0)
        before = generate_offered_load(self.flows, flash, 19.0, schedule=schedule)
        during = generate_offered_load(self.flows, flash, 25.0, schedule=schedule)
        after = generate_offered_load(self.flows, flash, 30.0, schedule=schedule)
        np.testing.assert_array_equal(before, [1e6, 2e6])
        np.testing.assert_array_equal(during, [1e6, 8e6])
        np.testing.assert_array_equal(after, [1e6, 2e6])

    def test_throttle(self):
        rates = generate_offered_load(self.flows, FlashEventConfig(), 0.0, throttle={BE: 0.5})
        np.testing.assert_array_equal(rates, [1e6, 1e6])

    def test_poisson_arrivals_deterministic(self):
        flash = FlashEventConfig(arrival_rate=0.1, burst_multiplier=2.0, duration=5.0)
        first = FlashSchedule(flash, np.random.default_rng(7))
        second = FlashSchedule(flash, np.random.default_rng(7))
        first.advance(500.0)
        second.advance(500.0)
        self.assertEqual(first.windows, second.windows)
        self.assertGreater(len(first.windows), 10)
        starts = [w[0] for w in first.windows]
        self.assertEqual(starts, sorted(starts))


class TestLatency(unittest.TestCase):
    """Test cases for path latency and the traffic matrix."""

    def setUp(self):
        self.g = load_topology("small")

    def util(self, value):
        return {lid: value for lid in self.g.link_ids}

    def test_idle_latency_is_propagation(self):
        self.assertAlmostEqual(path_latency(self.g, PATH_A, self.util(0.0)), 0.5e-3, places=12)

    def test_queueing_term(self):
        # service time 12 us, rho/(1-rho) = 1 at half load
        self.assertAlmostEqual(path_latency(self.g, PATH_A, self.util(0.5)), 0.524e-3, places=12)

    def test_clamped_above_095(self):
        saturated = path_latency(self.g, PATH_A, self.util(2.0))
        self.assertAlmostEqual(saturated, path_latency(self.g, PATH_A, self.util(0.95)), places=15)
        self.assertAlmostEqual(saturated, 2 * (0.25e-3 + 19 * 12e-6), places=12)

    def test_monotone_in_utilization(self):
        values = [path_latency(self.g, PATH_A, self.util(u)) for u in np.linspace(0.0, 0.95, 20)]
        self.assertTrue(all(b >= a for a, b in zip(values, values[1:])))

    def test_single_switch_path(self):
        self.assertEqual(path_latency(self.g, ("lf01",), self.util(0.5)), 0.0)

    def test_traffic_matrix_utilization(self):
        flows = [FlowSpec("a", "h01", "h02", TS, 3e8), FlowSpec("b", "h01", "h02", BE, 2e8)]
        routing = Routing(flow_paths={"a": PATH_A, "b": PATH_A})
        tm = compute_traffic_matrix(self.g, routing, flows, [3e8, 2e8])
        self.assertAlmostEqual(tm.utilization_of("lf01|sp01"), 0.5)
        self.assertAlmostEqual(tm.utilization_of("lf02|sp01"), 0.5)
        self.assertAlmostEqual(tm.utilization_of("lf01|sp02"), 0.0)
        self.assertAlmostEqual(tm.latency_of(("h01", "h02")), 0.524e-3, places=12)

    def test_missing_route(self):
        flows = [FlowSpec("a", "h01", "h02", TS, 1e6)]
        with self.assertRaises(MissingRouteError):
            compute_traffic_matrix(self.g, Routing(), flows, [1e6])

    def test_pair_override_wins(self):
        flow = FlowSpec("a", "h01", "h02", TS, 1e6)
        routing = Routing(flow_paths={"a": PATH_A}).with_pair_path(("h01", "h02"), PATH_B)
        self.assertEqual(routing.path_for(flow), PATH_B)
        self.assertEqual(routing.pair_path(("h01", "h02"), [flow]), PATH_B)


class TestLoss(unittest.TestCase):
    """Test cases for strict-priority congestion loss and thermal loss."""

    def setUp(self):
        self.g = load_topology("small")

    def test_strict_priority_drops_lowest_class_first(self):
        loads = np.array([[6.0], [3.0], [4.0]])
        fractions = class_drop_fractions(loads, np.array([10.0]))
        np.testing.assert_allclose(fractions[:, 0], [0.0, 0.0, 0.75])

    def test_no_loss_below_capacity(self):
        flows = [FlowSpec("a", "h01", "h02", TS, 1e8)]
        report = packet_loss(self.g, Routing(flow_paths={"a": PATH_A}), flows, [1e8])
        self.assertEqual(report.aggregate, 0.0)
        np.testing.assert_allclose(report.delivered, [1e8])

    def test_overload_hits_best_effort(self):
        flows = [FlowSpec("a", "h01", "h02", TS, 6e8), FlowSpec("b", "h01", "h02", BE, 8e8)]
        routing = Routing(flow_paths={"a": PATH_A, "b": PATH_A})
        report = packet_loss(self.g, routing, flows, [6e8, 8e8])
        self.assertAlmostEqual(report.per_flow[0], 0.0)
        # half the best-effort rate is dropped on each of the two overloaded hops
        self.assertAlmostEqual(report.per_flow[1], 0.75)
        self.assertAlmostEqual(report.aggregate, 6e8 / 14e8)
        self.assertAlmostEqual(report.link_drop[self.g.link_index["lf01|sp01"]], 1 - 1 / 1.4)

    def test_thermal_excess_loss(self):
        flows = [FlowSpec("a", "h01", "h02", TS, 1e8)]
        excess = np.zeros(len(self.g.switch_ids))
        excess[self.g.switch_index["sp01"]] = 10.0
        report = packet_loss(self.g, Routing(flow_paths={"a": PATH_A}), flows, [1e8],
                             thermal_excess=excess)
        self.assertAlmostEqual(report.per_flow[0], 0.02)
        cold_path = packet_loss(self.g, Routing(flow_paths={"a": PATH_B}), flows, [1e8],
                                thermal_excess=excess)
        self.assertAlmostEqual(cold_path.per_flow[0], 0.0)


class TestLoadProperties(unittest.TestCase):
    """Randomized load checks for conservation, strict priority and throttling."""

    TRIALS = 200

    def setUp(self):
        self.g = load_topology("small")
        self.caps = np.array([self.g.links_by_id[lid].capacity for lid in self.g.link_ids])

    def random_load(self, rng):
        classes = list(ServiceClass)
        n = int(rng.integers(2, 12))
        flows = [FlowSpec(f"f{i}", "h01", "h02", classes[int(rng.integers(3))],
                          float(rng.uniform(1e7, 8e8)))
                 for i in range(n)]
        routing = Routing(flow_paths={f.id: (PATH_A, PATH_B)[int(rng.integers(2))] for f in flows})
        return flows, routing

    def class_loads(self, flows, routing, offered):
        inc = flow_incidence(self.g, routing, flows).astype(float)
        loads = np.zeros((len(ServiceClass), len(self.g.link_ids)))
        for f, rate, row in zip(flows, offered, inc):
            loads[f.priority] += rate * row
        return loads

    def test_link_conservation(self):
        rng = np.random.default_rng(41)
        for trial in range(self.TRIALS):
            flows, routing = self.random_load(rng)
            offered = np.array([f.nominal_rate for f in flows])
            loads = self.class_loads(flows, routing, offered)
            fractions = class_drop_fractions(loads, self.caps)
            admitted = loads * (1.0 - fractions)
            dropped = loads * fractions
            total = loads.sum(axis=0)
            report = packet_loss(self.g, routing, flows, offered)
            with self.subTest(trial=trial):
                np.testing.assert_allclose(admitted + dropped, loads, rtol=1e-12)
                np.testing.assert_allclose(admitted.sum(axis=0), np.minimum(total, self.caps), rtol=1e-9)
                np.testing.assert_allclose(total * (1.0 - report.link_drop), np.minimum(total, self.caps),
                                           rtol=1e-9)
                np.testing.assert_allclose(report.delivered, offered * (1.0 - report.per_flow), rtol=1e-9)
                self.assertTrue(np.all(report.delivered <= offered * (1.0 + 1e-12)))

    def test_strict_priority(self):
        rng = np.random.default_rng(43)
        for trial in range(self.TRIALS):
            loads = rng.uniform(0.0, 10.0, size=(3, 5)) * (rng.random((3, 5)) < 0.8)
            caps = rng.uniform(1.0, 20.0, size=5)
            fractions = class_drop_fractions(loads, caps)
            for link in range(5):
                for high in range(3):
                    if fractions[high, link] <= 0.0:
                        continue
                    for low in range(high + 1, 3):
                        if loads[low, link] > 0:
                            with self.subTest(trial=trial, link=link, high=high, low=low):
                                self.assertAlmostEqual(fractions[low, link], 1.0)

        for trial in range(self.TRIALS):
            flows, routing = self.random_load(rng)
            report = packet_loss(self.g, routing, flows, [f.nominal_rate for f in flows])
            for a, b in itertools.combinations(range(len(flows)), 2):
                fa, fb = flows[a], flows[b]
                if routing.path_for(fa) != routing.path_for(fb) or fa.priority == fb.priority:
                    continue
                high, low = (a, b) if fa.priority < fb.priority else (b, a)
                with self.subTest(trial=trial, high=flows[high].id, low=flows[low].id):
                    self.assertLessEqual(report.per_flow[high], report.per_flow[low] + 1e-12)

    def test_throttle_never_raises_utilization(self):
        rng = np.random.default_rng(47)
        for trial in range(self.TRIALS):
            flows, routing = self.random_load(rng)
            throttle = {c: float(rng.uniform(0.05, 1.0)) for c in ServiceClass if rng.random() < 0.7}
            plain = generate_offered_load(flows, FlashEventConfig(), 0.0)
            throttled = generate_offered_load(flows, FlashEventConfig(), 0.0, throttle=throttle)
            before = compute_traffic_matrix(self.g, routing, flows, plain)
            after = compute_traffic_matrix(self.g, routing, flows, throttled)
            with self.subTest(trial=trial):
                self.assertTrue(np.all(throttled <= plain))
                self.assertTrue(np.all(after.utilization <= before.utilization + 1e-15))
                self.assertLessEqual(after.latency.max(), before.latency.max() + 1e-15)


class TestFlowRoster(unittest.TestCase):
    """Test cases for the deterministic flow roster."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_wpp_monitors_six_pairs(self):
        flows = default_flow_roster(load_topology("wpp"))
        self.assertEqual(critical_pairs(flows), (("h01", "h02"), ("h03", "h04"), ("h04", "h03"),
                                                 ("h05", "h06"), ("h07", "h08"), ("h09", "h06")))

    def test_small_roster(self):
        g = load_topology("small")
        flows = default_flow_roster(g)
        self.assertEqual(len(flows), 11)
        self.assertEqual(flows[0].id, "f000-turbine_operational")
        self.assertTrue(all(g.leaf_of(f.src) != g.leaf_of(f.dst) for f in flows))
        self.assertEqual(sum(1 for f in flows if f.service_class == BE), 4)

    def test_save_and_load(self):
        flows = default_flow_roster(load_topology("small"))
        path = Path(self.temp_dir) / "roster.json"
        save_flow_roster(flows, path)
        self.assertEqual(load_flow_roster(path), flows)


if __name__ == '__main__':
    unittest.main()
