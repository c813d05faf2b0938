#!/usr/bin/env python3
"""
Tick Trace JSONL I/O
====================

One JSON object per line. The first line is a "meta" record (disruption
marker, tick, scenario, policy, seed); then one "tick" record per simulated
tick and one "event" record per actuation event.

Usage:
    with TraceWriter('trace.jsonl', meta={'t_D': 120.0, 'tick': 0.001}) as writer:
        trace = sim.run(controller=controller, writer=writer)
        writer.write_events(trace.events)

    trace = read_trace('trace.jsonl')
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Generator, Iterable, List, Mapping, Optional, Union

from tqdm import tqdm

from helpers.csv_utils import count_lines_fast
from netsim.simulator import TickTrace

logger = logging.getLogger(__name__)


class TraceFormatError(ValueError):
    """Raised for malformed trace lines."""


def _dumps(record: Mapping[str, Any]) -> str:
    return json.dumps(record, sort_keys=True, separators=(',', ':'))


class TraceWriter:
    """Streaming JSONL writer usable as the simulator's `writer` hook."""

    def __init__(self, path: Union[str, Path], meta: Optional[Mapping[str, Any]] = None):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._file = open(self.path, 'w', encoding='utf-8')
        self.ticks_written = 0
        self.events_written = 0
        self._file.write(_dumps({'type': 'meta', **(meta or {})}) + '\n')

    def write_tick(self, record) -> None:
        self._file.write(_dumps({'type': 'tick', **record.to_dict(detail=True)}) + '\n')
        self.ticks_written += 1

    def write_events(self, events: Iterable[Mapping[str, Any]]) -> None:
        for event in events:
            self._file.write(_dumps({'type': 'event', **event}) + '\n')
            self.events_written += 1

    def close(self) -> None:
        if not self._file.closed:
            self._file.close()
            logger.info(f"Wrote trace {self.path}: {self.ticks_written} ticks, {self.events_written} events")

    def __enter__(self) -> 'TraceWriter':
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        self.close()


def write_jsonl(records: Iterable[Mapping[str, Any]], path: Union[str, Path]) -> int:
    """Write arbitrary records (e.g. the actuation log) as JSONL; returns the count."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', encoding='utf-8') as f:
        for record in records:
            f.write(_dumps(record) + '\n')
            count += 1
    return count


class TraceBatchReader:
    """
    Generator-based reader yielding batches of parsed trace records.

    Memory stays bounded by the batch size, so multi-hour traces at a 1 ms
    tick can be inspected.
    """

    def __init__(self, path: Union[str, Path], batch_size: int = 10000, show_progress: bool = True):
        self.path = Path(path)
        self.batch_size = batch_size
        self.show_progress = show_progress
        self.stats = {
            'lines_read': 0,
            'ticks': 0,
            'events': 0,
            'meta': 0,
            'batches_yielded': 0,
        }

    def process_batches(self) -> Generator[List[Dict[str, Any]], None, None]:
        """
        Yield lists of records in file order.

        Raises:
            FileNotFoundError: If the trace doesn't exist
            TraceFormatError: On a line that is not a JSON object with a type
        """
        if not self.path.exists():
            raise FileNotFoundError(f"Trace file not found: {self.path}")
        total = count_lines_fast(self.path, show_progress=False) if self.show_progress else None
        batch: List[Dict[str, Any]] = []
        with open(self.path, encoding='utf-8') as f:
            for line_no, line in enumerate(tqdm(f, total=total, desc="Reading trace", unit="line",
                                                disable=not self.show_progress), start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise TraceFormatError(f"{self.path}:{line_no}: invalid JSON: {e}") from e
                kind = record.get('type') if isinstance(record, dict) else None
                if kind not in ('meta', 'tick', 'event'):
                    raise TraceFormatError(f"{self.path}:{line_no}: unknown record type {kind!r}")
                self.stats['lines_read'] += 1
                self.stats[kind if kind == 'meta' else kind + 's'] += 1
                batch.append(record)
                if len(batch) >= self.batch_size:
                    self.stats['batches_yielded'] += 1
                    yield batch
                    batch = []
        if batch:
            self.stats['batches_yielded'] += 1
            yield batch


def read_trace(path: Union[str, Path], show_progress: bool = False) -> TickTrace:
    """
    Rebuild a TickTrace (scalar columns, t_D, tick, events) from a JSONL trace.

    Raises:
        FileNotFoundError: If the trace doesn't exist
        TraceFormatError: On malformed lines or tick records missing columns
    """
    reader = TraceBatchReader(path, show_progress=show_progress)
    trace = TickTrace()
    for batch in reader.process_batches():
        for record in batch:
            kind = record['type']
            if kind == 'meta':
                trace.t_D = record.get('t_D')
                trace.tick = record.get('tick')
                trace.meta = {k: v for k, v in record.items() if k != 'type'}
            elif kind == 'tick':
                try:
                    trace.append_dict(record)
                except KeyError as e:
                    raise TraceFormatError(f"{path}: tick record missing column {e}") from e
            else:
                trace.events.append({k: v for k, v in record.items() if k != 'type'})
    logger.debug(f"Read {len(trace)} ticks and {len(trace.events)} events from {path}")
    return trace
