"""Tests for the risk module."""

import unittest

import numpy as np

from brmdp.errors import DomainError
from brmdp.risk import RiskFunctional, apply, make_risk


class TestUniformScenarios(unittest.TestCase):
    """Test the equally-weighted recipes."""

    def test_expectation(self):
        """Test the mean."""
        self.assertEqual(apply(RiskFunctional.expectation(), [1.0, 2.0, 3.0, 4.0]), 2.5)

    def test_var_and_cvar(self):
        """Test VaR as an order statistic and CVaR as the tail mean."""
        values = [5.0, 1.0, 4.0, 2.0, 3.0]
        self.assertEqual(RiskFunctional.var(0.8).apply(values), 4.0)
        self.assertEqual(RiskFunctional.cvar(0.8).apply(values), 5.0)
        self.assertEqual(RiskFunctional.var(0.5).apply([1.0, 2.0, 3.0, 4.0]), 2.0)
        self.assertEqual(RiskFunctional.cvar(0.5).apply([1.0, 2.0, 3.0, 4.0]), 3.5)

    def test_cvar_with_empty_tail(self):
        """Test that CVaR falls back to the maximum."""
        self.assertEqual(RiskFunctional.cvar(0.99).apply([1.0, 2.0, 3.0, 4.0, 5.0]), 5.0)

    def test_along_last_axis(self):
        """Test that leading axes are kept."""
        values = np.array([[1.0, 2.0, 3.0, 4.0], [4.0, 3.0, 2.0, 1.0]])
        np.testing.assert_array_equal(RiskFunctional.cvar(0.5).apply(values), [3.5, 3.5])

    def test_empty_input(self):
        """Test that an empty scenario set raises DomainError."""
        with self.assertRaises(DomainError):
            RiskFunctional.expectation().apply([])


class TestWeightedScenarios(unittest.TestCase):
    """Test the weighted CDF recipes."""

    def test_uniform_weights_agree_with_sample_recipe(self):
        """Test agreement when alpha N is integral."""
        values = np.array([3.0, 1.0, 5.0, 2.0, 4.0])
        weights = np.full(5, 0.2)
        for rho in (RiskFunctional.var(0.8), RiskFunctional.cvar(0.8), RiskFunctional.cvar(0.4)):
            self.assertAlmostEqual(rho.apply(values, weights), rho.apply(values), places=12)

    def test_weighted_var_and_cvar(self):
        """Test values read off the weighted CDF."""
        values = [10.0, 20.0, 30.0]
        weights = [0.5, 0.3, 0.2]
        self.assertEqual(RiskFunctional.var(0.6).apply(values, weights), 20.0)
        # Tail above 0.6: 0.2 of mass at 20 and 0.2 at 30.
        self.assertAlmostEqual(RiskFunctional.cvar(0.6).apply(values, weights), 25.0, places=12)

    def test_weights_must_be_probabilities(self):
        """Test weight validation."""
        with self.assertRaises(DomainError):
            RiskFunctional.var(0.5).apply([1.0, 2.0], [0.5, 0.6])


class TestProperties(unittest.TestCase):
    """Test coherence properties on random inputs."""

    def test_translation_and_homogeneity(self):
        """Test rho(aX + c) = a rho(X) + c."""
        rng = np.random.default_rng(0)
        values = rng.normal(size=20)
        weights = rng.dirichlet(np.ones(20))
        for rho in (make_risk('mean'), make_risk('var', 0.7), make_risk('cvar', 0.7)):
            self.assertTrue(rho.is_translation_invariant())
            self.assertTrue(rho.is_positively_homogeneous())
            for w in (None, weights):
                self.assertAlmostEqual(rho.apply(2.5 * values + 3.0, w), 2.5 * rho.apply(values, w) + 3.0, places=10)

    def test_monotone(self):
        """Test that X <= Y scenario-wise implies rho(X) <= rho(Y)."""
        rng = np.random.default_rng(1)
        weights = rng.dirichlet(np.ones(30))
        for _ in range(20):
            low = rng.normal(size=30)
            high = low + rng.exponential(size=30)
            for rho in (make_risk('mean'), make_risk('var', 0.7), make_risk('cvar', 0.7)):
                for w in (None, weights):
                    self.assertLessEqual(rho.apply(low, w), rho.apply(high, w) + 1e-12)

    def test_permutation_invariant(self):
        """Test that reordering scenarios, with their weights, leaves rho unchanged."""
        rng = np.random.default_rng(2)
        values = rng.normal(size=25)
        weights = rng.dirichlet(np.ones(25))
        order = rng.permutation(25)
        for rho in (make_risk('mean'), make_risk('var', 0.6), make_risk('cvar', 0.6)):
            self.assertAlmostEqual(rho.apply(values[order]), rho.apply(values), places=12)
            self.assertAlmostEqual(rho.apply(values[order], weights[order]), rho.apply(values, weights), places=12)

    def test_alpha_required(self):
        """Test that VaR and CVaR need alpha in (0, 1)."""
        with self.assertRaises(DomainError):
            make_risk('cvar')
        with self.assertRaises(DomainError):
            RiskFunctional.var(1.0)
        self.assertEqual(str(make_risk('cvar', 0.8)), 'cvar(0.8)')


if __name__ == '__main__':
    unittest.main()
