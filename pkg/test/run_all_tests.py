#!/usr/bin/env python3
"""
Test Runner for the Self-Healing Network Simulator
==================================================

Discovers the test modules of the test package, runs them and prints a
per-module summary.

Usage:
    python -m test.run_all_tests
    python -m test.run_all_tests simulator dqn      # only test_simulator, test_dqn
    python test/run_all_tests.py --failfast --quiet
"""

import argparse
import os
import sys
import time
import unittest
from collections import Counter
from typing import Iterable, List, Optional

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

TEST_DIR = os.path.dirname(os.path.abspath(__file__))


def iter_tests(suite: unittest.TestSuite) -> Iterable[unittest.TestCase]:
    for item in suite:
        if isinstance(item, unittest.TestSuite):
            yield from iter_tests(item)
        else:
            yield item


def module_of(test: unittest.TestCase) -> str:
    return type(test).__module__.rsplit('.', 1)[-1]


def build_suite(modules: Optional[List[str]] = None) -> unittest.TestSuite:
    """All test_*.py modules, or only those named (with or without the test_ prefix)."""
    loader = unittest.TestLoader()
    if not modules:
        return loader.discover(TEST_DIR, pattern='test_*.py', top_level_dir=os.path.dirname(TEST_DIR))
    suite = unittest.TestSuite()
    for name in modules:
        stem = name if name.startswith('test_') else f"test_{name}"
        suite.addTests(loader.discover(TEST_DIR, pattern=f"{stem}.py",
                                       top_level_dir=os.path.dirname(TEST_DIR)))
    return suite


def run_all_tests(modules: Optional[List[str]] = None, failfast: bool = False, verbosity: int = 2) -> bool:
    """Run the selected tests and print a summary; returns True when all pass."""
    print("=" * 60)
    print("SELF-HEALING SDN SIMULATOR - TEST SUITE")
    print("=" * 60)

    suite = build_suite(modules)
    per_module = Counter(module_of(t) for t in iter_tests(suite))
    if not per_module:
        print(f"No tests found for: {', '.join(modules or [])}")
        return False

    print(f"\nRunning {sum(per_module.values())} tests from {len(per_module)} modules in {TEST_DIR}")
    print("-" * 60)

    start = time.time()
    runner = unittest.TextTestRunner(verbosity=verbosity, stream=sys.stdout, failfast=failfast)
    result = runner.run(suite)
    elapsed = time.time() - start

    failed_modules = Counter(module_of(t) for t, _ in result.failures + result.errors
                             if isinstance(t, unittest.TestCase))

    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)
    for name in sorted(per_module):
        mark = "FAIL" if failed_modules[name] else "ok"
        print(f"  {name:<24} {per_module[name]:>4} tests  {mark}")
    print("-" * 60)
    skipped = len(result.skipped)
    bad = len(result.failures) + len(result.errors)
    print(f"Total tests run: {result.testsRun}")
    print(f"Successes: {result.testsRun - bad - skipped}")
    print(f"Failures: {len(result.failures)}")
    print(f"Errors: {len(result.errors)}")
    print(f"Skipped: {skipped}")
    print(f"Wall time: {elapsed:.1f} seconds")

    if result.wasSuccessful():
        print("\n✓ ALL TESTS PASSED!")
        return True

    print(f"\n✗ TESTS FAILED ({len(result.failures)} failures, {len(result.errors)} errors)")
    for label, entries in (("FAILURES", result.failures), ("ERRORS", result.errors)):
        if entries:
            print(f"\n{label}:")
            for test, _ in entries:
                print(f"  - {test}")
    return False


if __name__ == '__main__':
    parser = argparse.ArgumentParser(description='Run the wpp-selfheal test suite')
    parser.add_argument('modules', nargs='*', help='Test modules to run, e.g. simulator dqn (default: all)')
    parser.add_argument('--failfast', action='store_true', help='Stop at the first failure')
    parser.add_argument('--quiet', action='store_true', help='One character per test')
    args = parser.parse_args()
    success = run_all_tests(args.modules, failfast=args.failfast, verbosity=1 if args.quiet else 2)
    sys.exit(0 if success else 1)
