"""
brmdp - Bayesian Risk Markov Decision Processes.

This package provides solvers for MDPs whose randomness has an unknown
distribution parameter: the parameter is handled with a Bayesian posterior
and a risk functional (expectation, VaR or CVaR) is nested over that
posterior at every stage. It includes exact, nested-simulation and
adaptive-sampling solvers, value iteration for the infinite horizon, the
inventory and maze benchmarks, and an experiment harness with a CLI.
"""

__version__ = '0.1.0'
