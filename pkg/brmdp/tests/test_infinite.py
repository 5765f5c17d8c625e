"""Tests for the infinite module."""

import math
import unittest

import numpy as np

from brmdp.environments import InventoryConfig, build_inventory
from brmdp.errors import ConfigurationError
from brmdp.infinite import (OperatorContext, bellman_apply, build_universe, contraction_envelope,
                            value_iteration)
from brmdp.model import ParameterSpace, PoissonFamily
from brmdp.posterior import FinitePosterior
from brmdp.risk import RiskFunctional


def discounted_inventory(gamma=0.9):
    family = PoissonFamily(ParameterSpace.finite((1.6, 2.4)))
    return build_inventory(InventoryConfig(horizon=math.inf, gamma=gamma), family)


class TestBellmanOperator(unittest.TestCase):
    """Test the risk-adjusted Bellman operator."""

    @classmethod
    def setUpClass(cls):
        """Build one universe shared by every test."""
        cls.env = discounted_inventory()
        cls.prior = FinitePosterior.uniform((1.6, 2.4))
        cls.universe = build_universe(cls.env, cls.prior, depth=1)
        cls.context = OperatorContext(cls.env, RiskFunctional.expectation(), cls.universe)

    def test_universe_root_first(self):
        """Test that the root augmented state leads the universe."""
        state, belief = self.universe[0]
        self.assertEqual(state, self.env.initial_state)
        self.assertIs(belief, self.prior)
        states = {s for s, b in self.universe if b is self.prior}
        self.assertEqual(states, set(range(self.env.num_states)))
        self.assertGreater(len(self.universe), self.env.num_states)

    def test_monotone(self):
        """Test that V <= W implies TV <= TW."""
        rng = np.random.default_rng(3)
        low = rng.uniform(0, 10, len(self.context))
        high = low + rng.uniform(0, 5, len(self.context))
        self.assertTrue(np.all(bellman_apply(self.context, low) <= bellman_apply(self.context, high) + 1e-12))

    def test_contraction(self):
        """Test the gamma-contraction in the sup norm."""
        rng = np.random.default_rng(4)
        v = rng.uniform(0, 20, len(self.context))
        w = rng.uniform(0, 20, len(self.context))
        gap = np.max(np.abs(bellman_apply(self.context, v) - bellman_apply(self.context, w)))
        self.assertLessEqual(gap, self.env.gamma * np.max(np.abs(v - w)) + 1e-9)

    def test_constant_shift(self):
        """Test that adding a constant to V adds gamma times it to TV."""
        base = bellman_apply(self.context, np.zeros(len(self.context)))
        shifted = bellman_apply(self.context, np.full(len(self.context), 5.0))
        np.testing.assert_allclose(shifted, base + 0.9 * 5.0, atol=1e-9)

    def test_cvar_operator_is_monotone(self):
        """Test monotonicity under CVaR."""
        context = OperatorContext(self.env, RiskFunctional.cvar(0.5), self.universe)
        low = np.zeros(len(context))
        self.assertTrue(np.all(bellman_apply(context, low) <= bellman_apply(context, low + 1.0) + 1e-12))

    def test_wrong_shape(self):
        """Test value vectors of the wrong length."""
        with self.assertRaises(ConfigurationError):
            bellman_apply(self.context, np.zeros(3))

    def test_value_iteration_converges(self):
        """Test the stopping rule and the fixed-point residual."""
        epsilon = 1e-6
        result = value_iteration(self.context, epsilon=epsilon)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.residuals[-1], epsilon * (1 - 0.9) / 0.9)
        residual = np.max(np.abs(bellman_apply(self.context, result.values) - result.values))
        self.assertLessEqual(residual, epsilon)
        for earlier, later in zip(result.residuals, result.residuals[1:]):
            self.assertLessEqual(later, 0.9 * earlier + 1e-9)
        root_action = result.policy.act(0, self.env.initial_state, self.prior)
        self.assertIn(root_action, self.env.actions(self.env.initial_state))

    def test_fixed_point_is_unique(self):
        """Test that zero, constant and random starts reach one fixed point."""
        epsilon = 1e-6
        size = len(self.context)
        top = self.context.cost_bound / (1 - 0.9)
        starts = [np.zeros(size), np.full(size, top), np.random.default_rng(5).uniform(-top, top, size)]
        finals = [value_iteration(self.context, initial=start, epsilon=epsilon).values for start in starts]
        for other in finals[1:]:
            self.assertLessEqual(np.max(np.abs(other - finals[0])), 2 * epsilon)

    def test_iteration_count_follows_threshold(self):
        """Test that the stopping sweep comes no later than the geometric decay of the first residual predicts."""
        epsilon = 1e-6
        threshold = epsilon * (1 - 0.9) / 0.9
        result = value_iteration(self.context, epsilon=epsilon)
        self.assertGreater(result.residuals[0], threshold)
        predicted = 1 + math.ceil(math.log(threshold / result.residuals[0]) / math.log(0.9))
        self.assertGreater(result.iterations, 1)
        self.assertLessEqual(result.iterations, predicted)

    def test_restart_from_fixed_point(self):
        """Test that starting from the converged values stops after one sweep."""
        first = value_iteration(self.context, epsilon=1e-6)
        again = value_iteration(self.context, initial=first.values, epsilon=1e-6)
        self.assertTrue(again.converged)
        self.assertEqual(again.iterations, 1)

    def test_policy_is_greedy_for_returned_values(self):
        """Test that every stored action minimises the Q-values of the returned values."""
        result = value_iteration(self.context, epsilon=1e-3)
        for u, (state, belief) in enumerate(self.universe):
            best_action = min(self.context.q_values(u, result.values), key=lambda pair: pair[1])[0]
            self.assertEqual(result.policy.act(0, state, belief), best_action)

    def test_iteration_cap(self):
        """Test that hitting the cap is reported, not raised."""
        with self.assertLogs(level='WARNING'):
            result = value_iteration(self.context, max_iterations=2)
        self.assertFalse(result.converged)
        self.assertEqual(result.iterations, 2)

    def test_envelope_bounds_iterates(self):
        """Test the geometric distance bound from the zero start."""
        result = value_iteration(self.context, epsilon=1e-8)
        previous = np.zeros(len(self.context))
        for k in range(1, 6):
            previous = bellman_apply(self.context, previous)
            bound = contraction_envelope(0.9, k, self.context.cost_bound, 0.0)
            self.assertLessEqual(np.max(np.abs(previous - result.values)), bound + 1e-6)


class TestOperatorChecks(unittest.TestCase):
    """Test operator construction errors."""

    def test_undiscounted(self):
        """Test that gamma = 1 is rejected."""
        env = build_inventory(InventoryConfig(gamma=1.0), PoissonFamily(ParameterSpace.finite((1.6, 2.4))))
        universe = [(env.initial_state, FinitePosterior.uniform((1.6, 2.4)))]
        with self.assertRaises(ConfigurationError):
            OperatorContext(env, RiskFunctional.expectation(), universe)

    def test_bad_epsilon(self):
        """Test a non-positive accuracy target."""
        env = discounted_inventory()
        prior = FinitePosterior.point_mass(2.4)
        context = OperatorContext(env, RiskFunctional.expectation(), build_universe(env, prior, depth=0))
        with self.assertRaises(ConfigurationError):
            value_iteration(context, epsilon=0.0)

    def test_declared_cost_bound_is_checked(self):
        """Test that a declared bound below the swept costs is rejected and a covering one is kept."""
        env = discounted_inventory()
        universe = build_universe(env, FinitePosterior.uniform((1.6, 2.4)), depth=0)
        env.cost_bound = 0.1
        with self.assertRaises(ConfigurationError):
            OperatorContext(env, RiskFunctional.expectation(), universe)
        env.cost_bound = 1000.0
        context = OperatorContext(env, RiskFunctional.expectation(), universe)
        self.assertEqual(context.cost_bound, 1000.0)

    def test_nso_needs_budget(self):
        """Test the sampling backend without a budget."""
        env = discounted_inventory()
        universe = build_universe(env, FinitePosterior.point_mass(2.4), depth=0)
        with self.assertRaises(ConfigurationError):
            OperatorContext(env, RiskFunctional.expectation(), universe, backend='nso')


if __name__ == '__main__':
    unittest.main()
