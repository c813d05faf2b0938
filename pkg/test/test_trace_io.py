#!/usr/bin/env python3
"""
Unit Tests for Tick Trace JSONL I/O
===================================

Tests for the helpers/trace_io module.

Usage:
    python -m test.test_trace_io
"""

import json
import os
import shutil
import sys
import tempfile
import unittest
from pathlib import Path

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from harness.scenarios import build_simulator, load_scenario
from helpers.trace_io import (TraceBatchReader, TraceFormatError, TraceWriter, read_trace,
                              write_jsonl)
from netsim.simulator import SimulationSettings
from netsim.topology import load_topology
from netsim.traffic import default_flow_roster


class TestTraceRoundTrip(unittest.TestCase):
    """Test cases for writing a simulated trace and reading it back."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = Path(self.temp_dir) / "trace.jsonl"
        graph = load_topology("small")
        self.sim = build_simulator(graph, default_flow_roster(graph), load_scenario("TC9"), seed=23,
                                   duration=1.0, settings=SimulationSettings(tick=0.01))

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_write_and_read(self):
        meta = {'t_D': self.sim.disruption.onset, 'tick': 0.01, 'tc': 'TC9', 'seed': 23}
        with TraceWriter(self.path, meta=meta) as writer:
            trace = self.sim.run(writer=writer)
            writer.write_events([{'t_decide': 0.5, 'action': {'kind': 'noop'}}])
        self.assertEqual(writer.ticks_written, 100)

        loaded = read_trace(self.path)
        self.assertEqual(len(loaded), 100)
        self.assertEqual(loaded.t_D, self.sim.disruption.onset)
        self.assertEqual(loaded.meta['tc'], 'TC9')
        self.assertEqual(loaded.events, [{'t_decide': 0.5, 'action': {'kind': 'noop'}}])
        self.assertEqual(loaded.columns['violation'], trace.columns['violation'])
        for a, b in zip(loaded.columns['y'], trace.columns['y']):
            self.assertAlmostEqual(a, b, places=9)

    def test_tick_lines_carry_detail(self):
        with TraceWriter(self.path) as writer:
            self.sim.run(0.02, writer=writer)
        with open(self.path) as f:
            lines = [json.loads(line) for line in f]
        self.assertEqual(lines[0], {'type': 'meta'})
        self.assertEqual(lines[1]['type'], 'tick')
        self.assertEqual(len(lines[1]['utilization']), 8)
        self.assertEqual(len(lines[1]['tau_internal']), 6)


class TestTraceBatchReader(unittest.TestCase):
    """Test cases for batched reading and format errors."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = Path(self.temp_dir) / "trace.jsonl"

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_batches(self):
        records = [{'type': 'meta'}] + [{'type': 'event', 'i': i} for i in range(5)]
        self.assertEqual(write_jsonl(records, self.path), 6)
        reader = TraceBatchReader(self.path, batch_size=4, show_progress=False)
        batches = list(reader.process_batches())
        self.assertEqual([len(b) for b in batches], [4, 2])
        self.assertEqual(reader.stats['events'], 5)
        self.assertEqual(reader.stats['meta'], 1)
        self.assertEqual(reader.stats['batches_yielded'], 2)

    def test_invalid_json(self):
        self.path.write_text('{"type": "meta"}\n{broken\n')
        with self.assertRaises(TraceFormatError):
            read_trace(self.path)

    def test_unknown_type(self):
        self.path.write_text('{"type": "meta"}\n{"type": "packet"}\n')
        with self.assertRaises(TraceFormatError):
            read_trace(self.path)

    def test_tick_missing_column(self):
        self.path.write_text('{"type": "meta"}\n{"type": "tick", "t": 0.1}\n')
        with self.assertRaises(TraceFormatError):
            read_trace(self.path)

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            read_trace(self.path)


if __name__ == '__main__':
    unittest.main()
