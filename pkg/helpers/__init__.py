"""
Helper modules for the wpp-selfheal project.

This package contains utility functions and classes for:
- Layered configuration (defaults, .env, JSON file, command line)
- CSV output for evaluation results and training curves
- JSONL tick traces
- SQLite tracking of completed evaluation runs
"""

__version__ = "0.1.0"
