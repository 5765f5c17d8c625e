"""Tests for the config module."""

import json
import math
import os
import tempfile
import unittest

from brmdp.config import PRESETS, builtin_config, load_bandit_config, load_config
from brmdp.environments import InventoryConfig, MazeConfig
from brmdp.errors import ConfigurationError
from brmdp.posterior import FinitePosterior, NormalMeanPosterior
from brmdp.risk import RiskFunctional


class TestPresets(unittest.TestCase):
    """Test the shipped experiments."""

    def test_every_preset_loads(self):
        """Test that each preset validates."""
        for name in PRESETS:
            config = load_config(builtin_config(name))
            self.assertEqual(config.name, name)

    def test_inventory_preset(self):
        """Test the inventory experiment settings."""
        config = load_config(builtin_config('inventory'))
        self.assertEqual(config.environment, InventoryConfig())
        self.assertIsInstance(config.prior, FinitePosterior)
        self.assertEqual(config.data_sizes, (10, 20, 100, 1000))
        self.assertEqual(config.risk('cvar'), RiskFunctional.cvar(0.8))
        self.assertEqual(config.risk('empirical'), RiskFunctional.expectation())

    def test_maze_preset_data_sizes(self):
        """Test that the finite maze experiment includes the H=20 histogram size."""
        config = load_config(builtin_config('maze-finite'))
        self.assertEqual(config.data_sizes, (10, 20, 100, 1000))
        self.assertEqual(config.risk('var'), RiskFunctional.var(0.6))

    def test_continuous_preset(self):
        """Test the continuous maze experiment settings."""
        config = load_config(builtin_config('maze-continuous'))
        self.assertIsInstance(config.prior, NormalMeanPosterior)
        self.assertEqual(config.solver, 'nso')
        self.assertEqual(config.solver_options, {'paths': 200, 'beliefs_per_stage': 20})
        self.assertEqual(config.evaluation, 'rollout')

    def test_presets_are_copies(self):
        """Test that callers cannot mutate the shipped presets."""
        raw = builtin_config('inventory')
        raw['seed'] = 1
        self.assertNotEqual(builtin_config('inventory')['seed'], 1)
        with self.assertRaises(ConfigurationError):
            builtin_config('unknown')

    def test_infinite_horizon_override(self):
        """Test building the discounted environment from a finite preset."""
        config = load_config(builtin_config('maze-finite'))
        env = config.build_environment(horizon=math.inf, gamma=0.9)
        self.assertFalse(env.finite_horizon)
        self.assertEqual(env.gamma, 0.9)
        self.assertEqual(config.environment, MazeConfig())


class TestValidation(unittest.TestCase):
    """Test configuration errors."""

    def setUp(self):
        """Set up test fixtures."""
        self.raw = builtin_config('inventory')

    def assertRejected(self, raw, fragment):
        with self.assertRaises(ConfigurationError) as caught:
            load_config(raw)
        self.assertIn(fragment, str(caught.exception))

    def test_unknown_and_missing_keys(self):
        """Test key checks."""
        self.raw['colour'] = 'blue'
        self.assertRejected(self.raw, 'colour')
        raw = builtin_config('inventory')
        del raw['seed']
        self.assertRejected(raw, 'seed')

    def test_true_theta_outside_space(self):
        """Test a true parameter that is not an atom."""
        self.raw['true_theta'] = 2.1
        self.assertRejected(self.raw, 'true_theta')

    def test_alpha_required_for_risk(self):
        """Test that VaR and CVaR need a level."""
        del self.raw['alpha']
        self.assertRejected(self.raw, 'alpha')

    def test_normal_prior_needs_truncated_normal(self):
        """Test prior and family compatibility."""
        self.raw['prior'] = {'kind': 'normal', 'mean': 0.0, 'variance': 1.0}
        self.assertRejected(self.raw, 'truncated-normal')

    def test_bad_solver_budget(self):
        """Test solver blocks."""
        self.raw['solver'] = {'kind': 'nso', 'outer': 10}
        self.assertRejected(self.raw, 'nested')
        self.raw['solver'] = {'kind': 'ucb'}
        self.assertRejected(self.raw, 'per-stage')
        self.raw['solver'] = {'kind': 'exact', 'depth': 3}
        self.assertRejected(self.raw, 'depth')

    def test_bad_environment(self):
        """Test environment blocks."""
        self.raw['environment'] = {'inventory': {'capacity': 3, 'initial_level': 9}}
        self.assertRejected(self.raw, 'initial inventory')
        self.raw['environment'] = {'warehouse': {}}
        self.assertRejected(self.raw, 'warehouse')

    def test_file_errors(self):
        """Test missing and malformed files."""
        with self.assertRaises(ConfigurationError):
            load_config('/nonexistent/brmdp.json')
        with tempfile.NamedTemporaryFile('w', suffix='.json', delete=False) as f:
            f.write('{not json')
        try:
            with self.assertRaises(ConfigurationError):
                load_config(f.name)
        finally:
            os.unlink(f.name)

    def test_loads_from_file(self):
        """Test reading a configuration from disk."""
        with tempfile.NamedTemporaryFile('w', suffix='.json', delete=False) as f:
            json.dump(self.raw, f)
        try:
            self.assertEqual(load_config(f.name).seed, 20240501)
        finally:
            os.unlink(f.name)


class TestBanditConfig(unittest.TestCase):
    """Test regret simulation configurations."""

    def test_load(self):
        """Test a two-machine configuration."""
        config = load_bandit_config({
            'machines': [[{'bernoulli': {'mean': 0.1}}], [{'bernoulli': {'mean': 0.9}}]],
            'checkpoints': [100, 1000],
            'runs': 20,
            'seed': 3,
        })
        self.assertEqual(config.instance.machines, 2)
        self.assertEqual(config.checkpoints, (100, 1000))
        self.assertTrue(config.instance.guaranteed)

    def test_rejects(self):
        """Test invalid bandit configurations."""
        base = {'machines': [[{'bernoulli': {'mean': 0.1}}], [{'bernoulli': {'mean': 0.9}}]],
                'checkpoints': [100]}
        for change in ({'checkpoints': [1]}, {'runs': 0}, {'risk': 'cvar'}, {'arms': 2}, {'machines': []}):
            raw = dict(base, **change)
            with self.assertRaises(ConfigurationError):
                load_bandit_config(raw)


if __name__ == '__main__':
    unittest.main()
