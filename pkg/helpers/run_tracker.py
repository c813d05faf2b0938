#!/usr/bin/env python3
"""
Evaluation Run Tracking
=======================

SQLite-based record of completed evaluation runs so an interrupted
evaluation can resume without repeating finished work.

Features:
- One row per (policy, scenario, seed, weights hash, config hash)
- Metrics stored as JSON alongside completion timestamps
- Summary statistics, record removal and cleanup of stale configurations
- SHA-256 file hashing for weight files

Usage:
    tracker = RunTracker("selfheal_runs.db")
    key = RunKey("baseline", "TC5", 23, "", config.config_hash())

    if tracker.needs_run(key):
        record, _ = run_episode(...)
        tracker.mark_completed(key, record.to_dict())
"""

import hashlib
import json
import logging
import sqlite3
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

logger = logging.getLogger(__name__)


class RunKey(NamedTuple):
    policy: str
    tc: str
    seed: int
    weights_hash: str = ""
    config_hash: str = ""


def file_hash(file_path: Union[str, Path]) -> str:
    """
    SHA-256 of a file's contents.

    Raises:
        FileNotFoundError: If the file doesn't exist
    """
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"File not found: {file_path}")
    hash_sha256 = hashlib.sha256()
    with open(file_path, 'rb') as f:
        for chunk in iter(lambda: f.read(8192), b""):
            hash_sha256.update(chunk)
    return hash_sha256.hexdigest()


class RunTracker:
    """
    SQLite-backed set of completed evaluation runs and their metrics.
    """

    def __init__(self, db_path: Union[str, Path] = "selfheal_runs.db"):
        """
        Initialize the run tracker with SQLite database.

        Args:
            db_path: Path to SQLite database file
        """
        self.db_path = Path(db_path)
        self.db_path.parent.mkdir(parents=True, exist_ok=True)
        self._init_database()

    def _init_database(self) -> None:
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                CREATE TABLE IF NOT EXISTS completed_runs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    policy TEXT NOT NULL,
                    tc TEXT NOT NULL,
                    seed INTEGER NOT NULL,
                    weights_hash TEXT NOT NULL,
                    config_hash TEXT NOT NULL,
                    metrics TEXT NOT NULL,
                    completion_date TEXT NOT NULL,
                    created_at TEXT NOT NULL,
                    UNIQUE (policy, tc, seed, weights_hash, config_hash)
                )
            """)
            conn.execute("""
                CREATE INDEX IF NOT EXISTS idx_run_config
                ON completed_runs(config_hash)
            """)
            conn.commit()
            logger.debug(f"Initialized run tracking database: {self.db_path}")

    def is_completed(self, key: RunKey) -> bool:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("""
                SELECT 1 FROM completed_runs
                WHERE policy = ? AND tc = ? AND seed = ? AND weights_hash = ? AND config_hash = ?
            """, tuple(key))
            return cursor.fetchone() is not None

    def needs_run(self, key: RunKey) -> bool:
        return not self.is_completed(key)

    def mark_completed(self, key: RunKey, metrics: Dict[str, Any]) -> None:
        """
        Record a finished run, replacing any earlier record with the same key.

        Args:
            key: Run identity
            metrics: MetricsRecord as a dictionary
        """
        completion_date = datetime.now().isoformat()
        with sqlite3.connect(self.db_path) as conn:
            conn.execute("""
                INSERT OR REPLACE INTO completed_runs
                (policy, tc, seed, weights_hash, config_hash, metrics, completion_date, created_at)
                VALUES (?, ?, ?, ?, ?, ?, ?,
                        COALESCE((SELECT created_at FROM completed_runs
                                  WHERE policy = ? AND tc = ? AND seed = ?
                                  AND weights_hash = ? AND config_hash = ?), ?))
            """, (*key, json.dumps(metrics, sort_keys=True), completion_date, *key, completion_date))
            conn.commit()
        logger.debug(f"Marked run as completed: {key.policy}/{key.tc}/seed {key.seed}")

    def get_record(self, key: RunKey) -> Optional[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("""
                SELECT metrics FROM completed_runs
                WHERE policy = ? AND tc = ? AND seed = ? AND weights_hash = ? AND config_hash = ?
            """, tuple(key))
            row = cursor.fetchone()
        return json.loads(row[0]) if row else None

    def get_completed_runs(self) -> List[Dict[str, Any]]:
        with sqlite3.connect(self.db_path) as conn:
            conn.row_factory = sqlite3.Row
            cursor = conn.execute("""
                SELECT policy, tc, seed, weights_hash, config_hash, metrics, completion_date
                FROM completed_runs
                ORDER BY policy, tc, seed
            """)
            results = []
            for row in cursor.fetchall():
                result = dict(row)
                result['metrics'] = json.loads(result['metrics'])
                results.append(result)
            return results

    def get_processing_summary(self) -> Dict[str, Any]:
        """
        Summary statistics about tracked runs.

        Returns:
            Dictionary with total runs, distinct policies/scenarios/configs and date range
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("""
                SELECT
                    COUNT(*),
                    COUNT(DISTINCT policy),
                    COUNT(DISTINCT tc),
                    COUNT(DISTINCT config_hash),
                    MIN(completion_date),
                    MAX(completion_date)
                FROM completed_runs
            """)
            result = cursor.fetchone()
        return {
            'total_runs': result[0] or 0,
            'policies': result[1] or 0,
            'scenarios': result[2] or 0,
            'configs': result[3] or 0,
            'first_completed': result[4],
            'last_completed': result[5],
        }

    def remove_run_record(self, key: RunKey) -> bool:
        """
        Remove one run record.

        Returns:
            True if record was removed, False if not found
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("""
                DELETE FROM completed_runs
                WHERE policy = ? AND tc = ? AND seed = ? AND weights_hash = ? AND config_hash = ?
            """, tuple(key))
            conn.commit()
            removed = cursor.rowcount > 0
        if removed:
            logger.info(f"Removed run record: {key.policy}/{key.tc}/seed {key.seed}")
        else:
            logger.warning(f"Run record not found: {key.policy}/{key.tc}/seed {key.seed}")
        return removed

    def cleanup_stale_configs(self, config_hash: str) -> int:
        """
        Remove records produced under any other configuration.

        Returns:
            Number of records removed
        """
        with sqlite3.connect(self.db_path) as conn:
            cursor = conn.execute("DELETE FROM completed_runs WHERE config_hash != ?", (config_hash,))
            conn.commit()
            removed_count = cursor.rowcount
        if removed_count > 0:
            logger.info(f"Cleaned up {removed_count} records from other configurations")
        return removed_count
