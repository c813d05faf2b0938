"""
Test package for the wpp-selfheal project.

This package contains the unit tests for the simulator, the learning agent,
the evaluation harness and the helper utilities.

Test modules:
- test_topology, test_traffic, test_thermal: network and thermal models
- test_knowledge, test_actuation, test_simulator: monitoring and the tick loop
- test_baseline: Dijkstra + ECMP comparator
- test_network, test_replay, test_dqn, test_trainer: the DQN agent
- test_scenarios, test_resilience, test_runner, test_evaluation: TC1-TC9 harness
- test_config, test_run_tracker, test_csv_utils, test_trace_io: helpers
- test_selfheal: command-line entry point
"""

__version__ = "1.0.0"
