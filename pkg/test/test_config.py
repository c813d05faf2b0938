#!/usr/bin/env python3
"""
Unit Tests for Configuration Loading
====================================

Tests for the helpers/config module: defaults, JSON override files,
command-line overrides and AUTOHEAL_* environment settings.

Usage:
    python -m test.test_config
"""

import json
import os
import shutil
import sys
import tempfile
import unittest
from unittest.mock import patch

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from helpers.config import AppConfig, ConfigError, load_config, load_env_config


class TestAppConfig(unittest.TestCase):
    """Test cases for the configuration object."""

    def test_defaults(self):
        config = AppConfig()
        self.assertEqual(config.topology.preset, "wpp")
        self.assertEqual(config.simulation.tick, 0.001)
        self.assertEqual(config.dqn.episodes, 1500)
        self.assertEqual(config.evaluation.seeds, (23, 37, 49, 71, 42))
        self.assertAlmostEqual(config.intents.to_intents().l_thr, 0.003)

    def test_hash_is_stable(self):
        self.assertEqual(AppConfig().config_hash(), AppConfig().config_hash())
        changed = AppConfig().with_overrides({'dqn': {'gamma': 0.9}})
        self.assertNotEqual(changed.config_hash(), AppConfig().config_hash())

    def test_to_dict_is_json(self):
        data = AppConfig().to_dict()
        self.assertEqual(json.loads(json.dumps(data)), data)
        self.assertEqual(data['dqn']['hidden'], [24, 24])

    def test_overrides(self):
        config = AppConfig().with_overrides({'evaluation': {'seeds': [1, 2]},
                                             'simulation': {'tick': 0.01}})
        self.assertEqual(config.evaluation.seeds, (1, 2))
        self.assertEqual(config.simulation.tick, 0.01)

    def test_unknown_section_or_key(self):
        with self.assertRaises(ConfigError):
            AppConfig().with_overrides({'metrics': {}})
        with self.assertRaises(ConfigError):
            AppConfig().with_overrides({'dqn': {'learning_rat': 0.1}})
        with self.assertRaises(ConfigError):
            AppConfig().with_overrides({'dqn': 3})

    def test_invalid_value(self):
        with self.assertRaises(ConfigError):
            AppConfig().with_overrides({'dqn': {'gamma': 1.5}})

    def test_k_paths_synchronized(self):
        config = AppConfig().with_overrides({'simulation': {'k_paths': 6}})
        self.assertEqual(config.dqn.k_paths, 6)
        self.assertEqual(config.dqn.n_actions, 10)
        config = AppConfig().with_overrides({'dqn': {'k_paths': 2}})
        self.assertEqual(config.simulation.k_paths, 2)
        with self.assertRaises(ConfigError):
            AppConfig().with_overrides({'simulation': {'k_paths': 6}, 'dqn': {'k_paths': 3}})


class TestLoadConfig(unittest.TestCase):
    """Test cases for layered loading."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.path = os.path.join(self.temp_dir, "config.json")

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def write(self, content):
        with open(self.path, 'w') as f:
            f.write(content)

    def test_file_then_cli(self):
        self.write(json.dumps({'dqn': {'episodes': 10, 'seed': 5}, 'topology': {'preset': 'small'}}))
        config = load_config(self.path, overrides={'dqn': {'episodes': 3}}, env={})
        self.assertEqual(config.dqn.episodes, 3)
        self.assertEqual(config.dqn.seed, 5)
        self.assertEqual(config.topology.preset, "small")

    def test_env_seed_below_file(self):
        self.write(json.dumps({'dqn': {'seed': 5}}))
        self.assertEqual(load_config(env={'seed': '11'}).dqn.seed, 11)
        self.assertEqual(load_config(self.path, env={'seed': '11'}).dqn.seed, 5)

    def test_env_config_path(self):
        self.write(json.dumps({'evaluation': {'max_workers': 4}}))
        self.assertEqual(load_config(env={'config_path': self.path}).evaluation.max_workers, 4)

    def test_invalid_env_seed_ignored(self):
        with self.assertLogs('helpers.config', level='WARNING'):
            config = load_config(env={'seed': 'abc'})
        self.assertEqual(config.dqn.seed, 42)

    def test_bad_files(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.temp_dir, "missing.json"), env={})
        self.write("{not json")
        with self.assertRaises(ConfigError):
            load_config(self.path, env={})
        self.write("[1, 2]")
        with self.assertRaises(ConfigError):
            load_config(self.path, env={})

    def test_intents_file(self):
        intents_path = os.path.join(self.temp_dir, "intents.json")
        with open(intents_path, 'w') as f:
            json.dump({'u_thr': 0.7, 'l_thr_ms': 2.5}, f)
        config = load_config(overrides={'intents': {'intents_file': intents_path}}, env={})
        intents = config.intents.to_intents()
        self.assertEqual(intents.u_thr, 0.7)
        self.assertAlmostEqual(intents.l_thr, 0.0025)


class TestEnvConfig(unittest.TestCase):

    @patch.dict(os.environ, {'AUTOHEAL_SEED': '7', 'AUTOHEAL_LOG_LEVEL': 'DEBUG'}, clear=False)
    def test_reads_autoheal_variables(self):
        env = load_env_config()
        self.assertEqual(env['seed'], '7')
        self.assertEqual(env['log_level'], 'DEBUG')

    @patch.dict(os.environ, {'AUTOHEAL_CONFIG': ''}, clear=False)
    def test_empty_values_skipped(self):
        self.assertNotIn('config_path', load_env_config())


if __name__ == '__main__':
    unittest.main()
