"""Tests for the cli module."""

import json
import os
import shutil
import tempfile
import unittest

from click.testing import CliRunner

from brmdp import __version__
from brmdp.cli import cli

TINY = {
    'name': 'tiny',
    'environment': {'inventory': {'capacity': 2, 'horizon': 3, 'initial_level': 1}},
    'family': {'kind': 'poisson'},
    'parameter_space': {'atoms': [1.6, 2.4]},
    'true_theta': 1.6,
    'prior': {'kind': 'uniform'},
    'formulations': ['mean', 'empirical'],
    'solver': {'kind': 'exact'},
    'data_sizes': [5],
    'replications': 2,
    'seed': 7,
    'infinite': {'universe_depth': 1},
}

BANDIT = {
    'machines': [[{'bernoulli': {'mean': 0.1}}], [{'bernoulli': {'mean': 0.9}}]],
    'checkpoints': [10, 100],
    'runs': 5,
    'seed': 1,
}


class TestCli(unittest.TestCase):
    """Test the command line interface."""

    def setUp(self):
        """Set up test fixtures."""
        self.runner = CliRunner()
        self.work_dir = tempfile.mkdtemp()
        self.config_path = self._write('tiny.json', TINY)

    def tearDown(self):
        """Tear down test fixtures."""
        shutil.rmtree(self.work_dir, ignore_errors=True)

    def _write(self, name, content):
        path = os.path.join(self.work_dir, name)
        with open(path, 'w') as f:
            json.dump(content, f)
        return path

    def test_version(self):
        """Test the version option."""
        result = self.runner.invoke(cli, ['--version'])
        self.assertEqual(result.exit_code, 0)
        self.assertIn(__version__, result.output)

    def test_solve_finite(self):
        """Test solving from the prior."""
        result = self.runner.invoke(cli, ['solve', '--config', self.config_path, '-q'])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('value: ', result.output)
        self.assertIn('action: ', result.output)

    def test_solve_infinite(self):
        """Test value iteration on the discounted problem."""
        result = self.runner.invoke(cli, ['solve', '--config', self.config_path, '--horizon', 'infinite',
                                          '--gamma', '0.5', '--epsilon', '1e-4', '-q'])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('value: ', result.output)

    def test_needs_exactly_one_source(self):
        """Test the config/preset usage error."""
        result = self.runner.invoke(cli, ['solve', '-q'])
        self.assertEqual(result.exit_code, 2)
        result = self.runner.invoke(cli, ['solve', '--config', self.config_path, '--preset', 'inventory', '-q'])
        self.assertEqual(result.exit_code, 2)

    def test_invalid_config_exits_nonzero(self):
        """Test that configuration errors exit with status 1."""
        broken = self._write('broken.json', dict(TINY, true_theta=9.0))
        result = self.runner.invoke(cli, ['solve', '--config', broken, '-q'])
        self.assertEqual(result.exit_code, 1)

    def test_experiment_writes_csv(self):
        """Test a full experiment run."""
        out = os.path.join(self.work_dir, 'out')
        result = self.runner.invoke(cli, ['experiment', '--config', self.config_path, '--out', out, '-q'])
        self.assertEqual(result.exit_code, 0, result.output)
        for name in ('replications.csv', 'summary.csv', 'histogram.csv', 'timings.csv'):
            self.assertTrue(os.path.exists(os.path.join(out, name)))

    def test_experiment_needs_output(self):
        """Test the missing output directory."""
        result = self.runner.invoke(cli, ['experiment', '--config', self.config_path, '-q'])
        self.assertEqual(result.exit_code, 1)

    def test_evaluate(self):
        """Test evaluating one replication against V*."""
        result = self.runner.invoke(cli, ['evaluate', '--config', self.config_path, '--formulation', 'empirical',
                                          '--data-size', '5', '-q'])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('optimum: ', result.output)
        self.assertIn('relative deviation: ', result.output)

    def test_bandit_writes_regret(self):
        """Test the regret simulation."""
        config_path = self._write('bandit.json', BANDIT)
        out = os.path.join(self.work_dir, 'regret')
        result = self.runner.invoke(cli, ['bandit', '--config', config_path, '--out', out, '-q'])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn('n=100', result.output)
        self.assertTrue(os.path.exists(os.path.join(out, 'regret.csv')))


if __name__ == '__main__':
    unittest.main()
