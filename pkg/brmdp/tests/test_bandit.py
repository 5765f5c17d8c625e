"""Tests for the bandit module."""

import math
import unittest

import numpy as np

from brmdp.bandit import (BanditInstance, BernoulliCost, DiscreteCost, UniformCost, concentration_bound,
                          empirical_regret, expected_plays_bound, make_cost, play_ucb, regret, regret_bound,
                          regret_curve)
from brmdp.errors import ConfigurationError
from brmdp.risk import RiskFunctional


def two_machines():
    """Bernoulli costs 0.1 and 0.9, a single scenario, gap 0.8."""
    return BanditInstance([[BernoulliCost(0.1)], [BernoulliCost(0.9)]])


class TestCosts(unittest.TestCase):
    """Test the cost samplers."""

    def test_make_cost(self):
        """Test building samplers from config entries."""
        self.assertEqual(make_cost({'bernoulli': {'mean': 0.25}}), BernoulliCost(0.25))
        self.assertEqual(make_cost({'uniform': {'low': 0.2, 'high': 0.6}}).mean, 0.4)
        cost = make_cost({'discrete': {'values': [0.0, 1.0], 'probs': [0.75, 0.25]}})
        self.assertIsInstance(cost, DiscreteCost)
        self.assertAlmostEqual(cost.mean, 0.25)

    def test_bad_entries(self):
        """Test malformed cost entries."""
        with self.assertRaises(ConfigurationError):
            make_cost({'gamma': {'mean': 0.5}})
        with self.assertRaises(ConfigurationError):
            make_cost({'bernoulli': {'p': 0.5}})
        with self.assertRaises(ConfigurationError):
            make_cost({'bernoulli': {'mean': 0.5}, 'uniform': {'low': 0, 'high': 1}})
        with self.assertRaises(ConfigurationError):
            BernoulliCost(1.5)
        with self.assertRaises(ConfigurationError):
            UniformCost(0.7, 0.2)

    def test_samples_stay_in_unit_interval(self):
        """Test the sampled cost range."""
        rng = np.random.default_rng(0)
        values = UniformCost(0.2, 0.4).sample(rng, 1000)
        self.assertTrue(np.all((values >= 0.2) & (values <= 0.4)))


class TestInstance(unittest.TestCase):
    """Test risk-adjusted machine values."""

    def test_expectation_values(self):
        """Test values and gaps of the two-machine instance."""
        instance = two_machines()
        np.testing.assert_allclose(instance.values, [0.1, 0.9])
        np.testing.assert_allclose(instance.gaps, [0.0, 0.8])
        self.assertTrue(instance.guaranteed)

    def test_cvar_across_scenarios(self):
        """Test that a risk functional ranks machines by their worse scenarios."""
        costs = [[BernoulliCost(0.1), BernoulliCost(0.9)], [BernoulliCost(0.5), BernoulliCost(0.5)]]
        mean = BanditInstance(costs)
        cvar = BanditInstance(costs, rho=RiskFunctional.cvar(0.5))
        np.testing.assert_allclose(mean.values, [0.5, 0.5])
        np.testing.assert_allclose(cvar.values, [0.9, 0.5])
        self.assertFalse(cvar.guaranteed)

    def test_ragged_instance(self):
        """Test machines with different scenario counts."""
        with self.assertRaises(ConfigurationError):
            BanditInstance([[BernoulliCost(0.1)], [BernoulliCost(0.2), BernoulliCost(0.3)]])


class TestUCB(unittest.TestCase):
    """Test the UCB rule and its regret."""

    def test_initial_round_robin(self):
        """Test that every machine is played once first."""
        history, ledger = play_ucb(two_machines(), 50, seed=1)
        self.assertEqual(history[:2], [0, 1])
        self.assertEqual(ledger.plays, 50)
        self.assertGreater(ledger.counts[0], ledger.counts[1])

    def test_reproducible(self):
        """Test that a seed and run index fix the play sequence."""
        first, _ = play_ucb(two_machines(), 200, seed=7, run=3)
        second, _ = play_ucb(two_machines(), 200, seed=7, run=3)
        third, _ = play_ucb(two_machines(), 200, seed=7, run=4)
        self.assertEqual(first, second)
        self.assertEqual(len(third), 200)

    def test_too_few_plays(self):
        """Test that the initial round needs one play per machine."""
        with self.assertRaises(ConfigurationError):
            play_ucb(two_machines(), 1, seed=0)

    def test_regret_below_bound(self):
        """Test mean regret against the logarithmic bound."""
        instance = two_machines()
        points = regret_curve(instance, [100, 1000], runs=40, seed=11)
        self.assertEqual([p.plays for p in points], [100, 1000])
        for point in points:
            self.assertLessEqual(point.mean_regret, point.bound)
            self.assertEqual(point.bound, regret_bound(instance.gaps, point.plays))
        self.assertLessEqual(points[0].mean_regret, points[1].mean_regret)

    def test_regret_decomposition(self):
        """Test that the gap-weighted play counts match the realised cost excess on average."""
        instance = two_machines()
        realised, decomposed = [], []
        for run in range(100):
            _, ledger = play_ucb(instance, 300, seed=5, run=run)
            decomposed.append(regret(ledger))
            realised.append(empirical_regret(ledger, instance))
        spread = np.std(np.asarray(realised) - np.asarray(decomposed), ddof=1) / math.sqrt(100)
        self.assertLessEqual(abs(np.mean(realised) - np.mean(decomposed)), 4 * spread + 1e-9)

    def test_suboptimal_plays_below_bound(self):
        """Test mean plays of the worse machine against 8 ln n / gap^2 + 1 + pi^2/3."""
        instance = BanditInstance([[BernoulliCost(0.3)], [BernoulliCost(0.6)]])
        plays = [play_ucb(instance, 1000, seed=13, run=run)[1].counts[1] for run in range(50)]
        self.assertLessEqual(float(np.mean(plays)), expected_plays_bound(instance.gaps[1], 1000))
        self.assertGreater(float(np.mean(plays)), 1.0)

    def test_warns_without_guarantee(self):
        """Test the warning for non-expectation functionals."""
        instance = BanditInstance([[BernoulliCost(0.2)], [BernoulliCost(0.6)]], rho=RiskFunctional.var(0.5))
        with self.assertLogs(level='WARNING') as captured:
            play_ucb(instance, 10, seed=0)
        self.assertIn('no regret guarantee', captured.output[0])


class TestBounds(unittest.TestCase):
    """Test the closed-form bounds."""

    def test_regret_bound(self):
        """Test the bound value for one positive gap."""
        expected = 8 * math.log(100) / 0.8 + (1 + math.pi ** 2 / 3) * 0.8
        self.assertAlmostEqual(regret_bound([0.0, 0.8], 100), expected)

    def test_expected_plays_bound(self):
        """Test the play-count bound."""
        self.assertAlmostEqual(expected_plays_bound(0.5, 10), 32 * math.log(10) + 1 + math.pi ** 2 / 3)

    def test_concentration_bound(self):
        """Test the Hoeffding tail."""
        self.assertAlmostEqual(concentration_bound(50, 0.1), math.exp(-1.0))


if __name__ == '__main__':
    unittest.main()
