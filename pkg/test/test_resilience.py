#!/usr/bin/env python3
"""
Unit Tests for Resilience Metrics
=================================

Tests for the harness/resilience module.

Usage:
    python -m test.test_resilience
"""

import os
import sys
import unittest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from harness.resilience import EmptyTraceError, first_clean_window, resilience_metrics
from netsim.simulator import TickTrace

T = [float(i) for i in range(20)]


class TestResilienceMetrics(unittest.TestCase):
    """Test cases for the performance drop and recovery time."""

    def test_dip_and_recovery(self):
        y = [1.0] * 5 + [0.4] * 3 + [1.0] * 12
        violation = [False] * 5 + [True] * 3 + [False] * 12
        result = resilience_metrics(TickTrace.from_series(T, y, violation, t_D=5.0))
        self.assertAlmostEqual(result.dy, 0.6)
        self.assertAlmostEqual(result.y_m, 0.4)
        self.assertEqual(result.t_R, 8.0)
        self.assertEqual(result.dt, 3.0)
        self.assertEqual(result.first_violation, 5.0)
        self.assertEqual(result.recovery_class, "full")

    def test_no_disruption_marker(self):
        result = resilience_metrics(TickTrace.from_series(T, [1.0] * 20, [False] * 20))
        self.assertEqual(result.dy, 0.0)
        self.assertEqual(result.dt, 0.0)
        self.assertEqual(result.recovery_class, "full")

    def test_disruption_without_violation(self):
        y = [1.0] * 10 + [0.9] * 10
        result = resilience_metrics(TickTrace.from_series(T, y, [False] * 20, t_D=10.0))
        self.assertAlmostEqual(result.dy, 0.1)
        self.assertEqual(result.dt, 0.0)
        self.assertEqual(result.recovery_class, "partial")

    def test_never_recovers(self):
        violation = [False] * 5 + [True] * 15
        y = [1.0] * 5 + [0.5] * 15
        result = resilience_metrics(TickTrace.from_series(T, y, violation, t_D=5.0))
        self.assertEqual(result.recovery_class, "none")
        self.assertEqual(result.dt, 14.0)
        self.assertIsNone(result.t_R)

    def test_flapping_needs_full_window(self):
        violation = [False] * 5 + [True, False, True] + [False] * 12
        y = [1.0] * 5 + [0.7, 0.9, 0.7] + [1.0] * 12
        result = resilience_metrics(TickTrace.from_series(T, y, violation, t_D=5.0))
        self.assertEqual(result.t_R, 8.0)

    def test_partial_recovery(self):
        violation = [False] * 5 + [True] * 2 + [False] * 13
        y = [1.0] * 5 + [0.4] * 2 + [0.8] * 13
        result = resilience_metrics(TickTrace.from_series(T, y, violation, t_D=5.0))
        self.assertEqual(result.recovery_class, "partial")
        self.assertEqual(result.dt, 2.0)

    def test_drop_never_negative(self):
        y = [0.8] * 5 + [1.0] * 15
        result = resilience_metrics(TickTrace.from_series(T, y, [False] * 20, t_D=5.0))
        self.assertEqual(result.dy, 0.0)

    def test_empty_trace(self):
        with self.assertRaises(EmptyTraceError):
            resilience_metrics(TickTrace(t_D=1.0))

    def test_window_is_second_argument(self):
        violation = [False] * 5 + [True, False, False, True] + [False] * 11
        y = [1.0] * 5 + [0.6, 0.9, 0.9, 0.6] + [1.0] * 11
        trace = TickTrace.from_series(T, y, violation, t_D=5.0)
        self.assertEqual(resilience_metrics(trace, 2).t_R, 6.0)
        self.assertEqual(resilience_metrics(trace).t_R, 9.0)


class TestFirstCleanWindow(unittest.TestCase):

    def test_window(self):
        violation = [True, False, False, True, False, False, False]
        self.assertEqual(first_clean_window(violation, 0, 3), 4)
        self.assertEqual(first_clean_window(violation, 0, 2), 1)
        self.assertIsNone(first_clean_window(violation, 0, 4))


if __name__ == '__main__':
    unittest.main()
