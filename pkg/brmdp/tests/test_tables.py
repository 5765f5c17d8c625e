"""Tests for the tables module."""

import unittest

import numpy as np

from brmdp.environments import build_inventory
from brmdp.errors import ConfigurationError, DomainError
from brmdp.posterior import FinitePosterior
from brmdp.tables import Policy, SamplingBudget, TableOracle, ValueTable, ZeroOracle


def belief(first):
    return FinitePosterior([1.0, 2.0], [first, 1.0 - first])


class TestValueTable(unittest.TestCase):
    """Test storage, terminal stages and nearest-key fallback."""

    def setUp(self):
        """Set up test fixtures."""
        self.table = ValueTable(horizon=3, grid=1e-6)
        self.table.store(1, 0, belief(0.2).key(1e-6), 5.0, 1)
        self.table.store(1, 0, belief(0.8).key(1e-6), 7.0, 2)

    def test_exact_lookup(self):
        """Test stored and missing keys."""
        self.assertEqual(self.table.lookup(1, 0, belief(0.2).key(1e-6)), 5.0)
        self.assertIsNone(self.table.lookup(1, 0, belief(0.5).key(1e-6)))

    def test_terminal_stage(self):
        """Test that the horizon reads zero."""
        self.assertEqual(self.table.value(3, 0, belief(0.5).key(1e-6)), 0.0)

    def test_nearest_fallback(self):
        """Test value and action fallback to the closest stored key."""
        self.assertEqual(self.table.value(1, 0, belief(0.3).key(1e-6)), 5.0)
        self.assertEqual(self.table.action(1, 0, belief(0.7).key(1e-6)), 2)
        self.assertIsNone(self.table.action(1, 1, belief(0.7).key(1e-6)))
        with self.assertRaises(DomainError):
            self.table.value(1, 1, belief(0.7).key(1e-6))

    def test_nearest_values_vectorised(self):
        """Test batched nearest lookups."""
        coords = np.array([belief(0.1).key(1e-6).coords, belief(0.9).key(1e-6).coords])
        np.testing.assert_array_equal(self.table.nearest_values(1, 0, 'finite', coords), [5.0, 7.0])

    def test_non_finite_values_rejected(self):
        """Test that NaN cannot be stored."""
        with self.assertRaises(DomainError):
            self.table.store(0, 0, belief(0.5).key(1e-6), float('nan'))

    def test_stationary_table(self):
        """Test that a table without horizon reads the same entries at every stage."""
        table = ValueTable(horizon=None, grid=1e-6)
        table.store(0, 2, belief(0.5).key(1e-6), 1.5)
        self.assertEqual(table.value(17, 2, belief(0.5).key(1e-6)), 1.5)
        self.assertEqual(table.sizes(), {0: 1})


class TestOraclesAndPolicy(unittest.TestCase):
    """Test continuation oracles and policy fallback."""

    def test_table_oracle(self):
        """Test that the oracle projects successor beliefs."""
        table = ValueTable(horizon=2, grid=1e-6)
        table.store(1, 0, belief(0.5).key(1e-6), 3.0)
        table.store(1, 1, belief(0.5).key(1e-6), 4.0)
        batch = belief(0.5).repeat(3)
        np.testing.assert_array_equal(TableOracle(table, 1).values(np.array([0, 1, 0]), batch), [3.0, 4.0, 3.0])
        np.testing.assert_array_equal(TableOracle(table, 2).values(np.array([0]), belief(0.5).repeat(1)), [0.0])
        np.testing.assert_array_equal(ZeroOracle().values(np.array([0, 1]), batch), [0.0, 0.0])

    def test_policy_falls_back_to_first_action(self):
        """Test the action of a state with no stored entry."""
        env = build_inventory()
        table = ValueTable(horizon=env.horizon, grid=1e-6)
        prior = FinitePosterior.uniform([1.2, 1.6, 2.0, 2.4, 2.8])
        table.store(0, 1, prior.key(1e-6), 10.0, 2)
        policy = Policy(env, table, 1, prior)
        self.assertEqual(policy.act(0, 1, prior), 2)
        self.assertEqual(policy.act(0, 3, prior), 0)
        self.assertEqual(policy.root_value(), 10.0)


class TestSamplingBudget(unittest.TestCase):
    """Test budget validation."""

    def test_nested_budget(self):
        """Test that nested simulation needs outer and inner budgets."""
        self.assertEqual(SamplingBudget(outer=10, inner=5).require_nested(), (10, 5))
        with self.assertRaises(ConfigurationError):
            SamplingBudget(outer=10).require_nested()

    def test_per_stage_repeats_last(self):
        """Test the per-stage total of stages past the list."""
        budget = SamplingBudget(per_stage=(100, 50))
        self.assertEqual(budget.stage_total(0), 100)
        self.assertEqual(budget.stage_total(6), 50)
        with self.assertRaises(ConfigurationError):
            SamplingBudget(per_stage=(0,))


if __name__ == '__main__':
    unittest.main()
