#!/usr/bin/env python3
"""
Unit Tests for the Switch Thermal Model
=======================================

Tests for the netsim/thermal module.

Usage:
    python -m test.test_thermal
"""

import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from harness.scenarios import SCENARIO_IDS, load_scenario
from netsim.thermal import (ThermalMode, ThermalParams, ThermalState, ThermalStepError,
                            UnknownSwitchError, advance, apply_cooling, set_exogenous,
                            steady_state, step_ambient, step_internal)

SWITCHES = ("lf01", "lf02", "sp01")
TC1 = ThermalParams(300.0, 200.0, 0.80, 1.20, 5.0, 12.0)


class TestThermalParams(unittest.TestCase):
    """Test cases for parameter validation."""

    def test_invalid_params(self):
        for kwargs in ({'lambda_ambient': 0.0}, {'lambda_sw': -1.0}, {'psi_idle': -0.1},
                       {'phi_sw': -1.0}, {'gain_scale': 0.0}):
            with self.subTest(**kwargs):
                values = dict(TC1.to_dict())
                values.update(kwargs)
                with self.assertRaises(ValueError):
                    ThermalParams(**values)

    def test_max_dt(self):
        self.assertEqual(TC1.max_dt, 20.0)

    def test_state_bounds(self):
        with self.assertRaises(ValueError):
            ThermalState(SWITCHES, 22.0, 30.0, 22.0, 0.5, 1.5)
        with self.assertRaises(ValueError):
            ThermalState(SWITCHES, 22.0, 30.0, 22.0, -0.1, 1.0)


class TestEulerSteps(unittest.TestCase):
    """Test cases for the ambient and internal Euler steps."""

    def test_steady_state_is_fixed_point(self):
        u = np.array([0.0, 0.4, 0.9])
        state = ThermalState.at_steady_state(SWITCHES, TC1, utilization=u)
        nxt = advance(state, TC1, u, 1.0)
        np.testing.assert_allclose(nxt.tau_ambient, state.tau_ambient, atol=1e-12)
        np.testing.assert_allclose(nxt.tau_internal, state.tau_internal, atol=1e-12)

    def test_tc1_steady_state_in_health_band(self):
        amb, internal = steady_state(TC1, 22.0, 0.5, 1.0, 1.0)
        self.assertAlmostEqual(amb, 19.6)
        self.assertTrue(18.0 <= amb <= 27.0)
        self.assertTrue(20.0 <= internal <= 40.0)

    def test_step_size_guard(self):
        state = ThermalState.at_steady_state(SWITCHES, TC1)
        for dt in (0.0, -1.0, 30.1):
            with self.subTest(dt=dt):
                with self.assertRaises(ThermalStepError):
                    step_ambient(state, TC1, dt)
        with self.assertRaises(ThermalStepError):
            step_internal(state, TC1, 0.5, 20.5)

    def test_advance_uses_previous_ambient(self):
        state = ThermalState(SWITCHES, 30.0, 30.0, 22.0, 0.5, 1.0)
        nxt = advance(state, TC1, 0.5, 1.0)
        np.testing.assert_array_equal(nxt.tau_internal, step_internal(state, TC1, 0.5, 1.0))
        np.testing.assert_array_equal(nxt.tau_ambient, step_ambient(state, TC1, 1.0))

    def test_utilization_clamped_with_warning(self):
        state = ThermalState.at_steady_state(SWITCHES, TC1)
        with self.assertLogs('netsim.thermal', level='WARNING'):
            over = step_internal(state, TC1, 1.7, 1.0)
        np.testing.assert_array_equal(over, step_internal(state, TC1, 1.0, 1.0))


class TestConvergence(unittest.TestCase):
    """Corrected-mode trajectories settle on the analytic fixed point for every scenario row."""

    def test_ambient_converges_within_5_lambda(self):
        for tc in SCENARIO_IDS:
            params = load_scenario(tc).thermal
            with self.subTest(tc=tc):
                state = ThermalState(SWITCHES, 22.0, 30.0, 22.0, 0.9, 0.5)
                dt = params.lambda_ambient / 100.0
                for _ in range(500):
                    state.tau_ambient = step_ambient(state, params, dt)
                target, _ = steady_state(params, 22.0, 0.9, 0.5, 0.0)
                self.assertLess(np.max(np.abs(state.tau_ambient - target)), 0.1)

    def test_internal_converges_within_5_lambda(self):
        u = 0.2
        for tc in SCENARIO_IDS:
            params = load_scenario(tc).thermal
            with self.subTest(tc=tc):
                state = ThermalState(SWITCHES, 24.0, 24.0, 24.0, 0.5, 1.0)
                dt = params.lambda_sw / 100.0
                for _ in range(500):
                    state.tau_internal = step_internal(state, params, u, dt)
                target = 24.0 + params.psi_idle + params.phi_sw * u
                self.assertLess(np.max(np.abs(state.tau_internal - target)), 0.1)

    def test_literal_mode_is_unbounded(self):
        state = ThermalState.at_steady_state(SWITCHES, TC1, utilization=0.5)
        previous = state.tau_internal.copy()
        for _ in range(200):
            state.tau_internal = step_internal(state, TC1, 0.5, TC1.max_dt, ThermalMode.LITERAL)
            self.assertTrue(np.all(state.tau_internal > previous))
            previous = state.tau_internal.copy()
        self.assertTrue(np.all(state.tau_internal > 1000.0))


class TestCoolingAndInputs(unittest.TestCase):
    """Test cases for cooling commands and exogenous inputs."""

    def setUp(self):
        self.state = ThermalState.at_steady_state(SWITCHES, TC1, c_hvac=0.5)

    def test_apply_cooling(self):
        cooled = apply_cooling(self.state, ["sp01"], 1.0)
        np.testing.assert_array_equal(cooled.c_hvac, [0.5, 0.5, 1.0])
        np.testing.assert_array_equal(self.state.c_hvac, [0.5, 0.5, 0.5])

    def test_empty_set_is_noop(self):
        self.assertIs(apply_cooling(self.state, [], 1.0), self.state)

    def test_cooling_errors(self):
        with self.assertRaises(ValueError):
            apply_cooling(self.state, ["sp01"], 1.5)
        with self.assertRaises(UnknownSwitchError):
            apply_cooling(self.state, ["ss09"], 1.0)

    def test_more_cooling_lowers_ambient(self):
        cooled = apply_cooling(self.state, SWITCHES, 1.0)
        self.assertTrue(np.all(step_ambient(cooled, TC1, 1.0) < step_ambient(self.state, TC1, 1.0)))

    def test_set_exogenous(self):
        hot = set_exogenous(self.state, tau_env=36.0, p_rack=0.9)
        np.testing.assert_array_equal(hot.tau_env, [36.0] * 3)
        np.testing.assert_array_equal(hot.p_rack, [0.9] * 3)
        np.testing.assert_array_equal(hot.c_hvac, self.state.c_hvac)


if __name__ == '__main__':
    unittest.main()
