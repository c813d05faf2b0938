#!/usr/bin/env python3
"""
CSV Output Utilities
====================

Writers and readers for the evaluation results table, the per-run metrics
table and the training curves.

Features:
- Fixed float formatting so identical runs give byte-identical files
- "n/a" for missing values (single-seed CI, runs without a reaction)
- Fast buffered line counting with an optional tqdm bar for large files

Usage:
    from helpers.csv_utils import write_results_csv

    write_results_csv(result.rows, 'results.csv')
"""

import csv
import logging
import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

from tqdm import tqdm

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ("policy", "tc", "latency_ms_mean", "latency_ms_ci", "loss_pct", "throughput_mbps",
                  "reaction_s", "recovery_s", "dy", "improvement_pct", "sla_adherence", "seeds")

RUN_COLUMNS = ("policy", "tc", "seed", "latency_ms", "loss_pct", "throughput_mbps", "reaction_s",
               "recovery_s", "dy", "recovery_class", "utilization_mean", "retransmissions",
               "decisions", "sla_adherence", "actuation_events", "stale_actions")

CURVE_COLUMNS = ("episode", "reward", "epsilon", "mean_loss", "decisions", "recovered")

FLOAT_DIGITS = 6


def format_float(value: Optional[float], digits: int = FLOAT_DIGITS) -> str:
    """Fixed-point text for a number; "n/a" for None or NaN."""
    if value is None:
        return "n/a"
    value = float(value)
    if math.isnan(value):
        return "n/a"
    return f"{value:.{digits}f}"


def count_lines_fast(file_path: Union[str, Path], show_progress: bool = True) -> int:
    """
    Fast line counting using large buffer reads with optional progress indicator.

    Reads the file in 1MB chunks and counts newline characters, showing a
    progress bar for files larger than 10MB.

    Args:
        file_path: Path to the file to count lines in
        show_progress: Whether to show progress bar for large files

    Returns:
        Number of lines in the file

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    file_path = Path(file_path)

    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")

    file_size = file_path.stat().st_size
    if file_size == 0:
        return 0

    line_count = 0
    buffer_size = 1024 * 1024

    progress_bar = None
    if show_progress and file_size > 10 * 1024 * 1024:
        progress_bar = tqdm(total=file_size, desc="Counting lines", unit="B",
                            unit_scale=True, unit_divisor=1024)

    try:
        with open(file_path, 'rb') as f:
            while True:
                buffer = f.read(buffer_size)
                if not buffer:
                    break
                line_count += buffer.count(b'\n')
                if progress_bar:
                    progress_bar.update(len(buffer))
    finally:
        if progress_bar:
            progress_bar.close()

    logger.debug(f"Fast line count: {line_count:,} lines ({file_size / 1024 / 1024:.1f} MB)")
    return line_count


def _write_rows(path: Union[str, Path], header: Iterable[str], rows: Iterable[List[str]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(row)
            count += 1
    logger.info(f"Wrote {count} rows to {path}")
    return count


def write_results_csv(rows, path: Union[str, Path]) -> int:
    """
    Write aggregate evaluation rows.

    Args:
        rows: AggregateRow objects, one per (policy, scenario)
        path: Output CSV path

    Returns:
        Number of data rows written
    """
    return _write_rows(path, RESULT_COLUMNS, (
        [row.policy, row.tc, format_float(row.latency_ms_mean), format_float(row.latency_ms_ci),
         format_float(row.loss_pct), format_float(row.throughput_mbps), format_float(row.reaction_s),
         format_float(row.recovery_s), format_float(row.dy), format_float(row.improvement_pct, 2),
         format_float(row.sla_adherence, 4), str(row.n)]
        for row in rows))


def write_runs_csv(records, path: Union[str, Path]) -> int:
    """Write one line per MetricsRecord."""
    def cell(value):
        if isinstance(value, float):
            return format_float(value)
        return str(value)
    return _write_rows(path, RUN_COLUMNS, ([cell(getattr(rec, col)) for col in RUN_COLUMNS] for rec in records))


def write_curves_csv(curves, path: Union[str, Path]) -> int:
    """Write per-episode training curves (EpisodeCurve objects)."""
    return _write_rows(path, CURVE_COLUMNS, (
        [str(c.episode), format_float(c.reward), format_float(c.epsilon), format_float(c.mean_loss),
         str(c.decisions), "1" if c.recovered else "0"]
        for c in curves))


def read_results_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    """
    Read a CSV written by this module back as a list of string dictionaries.

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    with open(path, newline='', encoding='utf-8') as f:
        return list(csv.DictReader(f))
