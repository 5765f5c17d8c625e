"""
Callbacks for BR-MDP solves and experiments.

This module provides callback classes for solver and experiment progress
events.
"""

import logging


class SolverCallback:
    """
    Callback interface for solver progress events.

    This class defines the interface for callbacks that can be triggered
    while a solver works backward through the stages. Subclass this to
    implement custom behavior when a stage or a whole solve completes.
    """

    def on_stage_complete(self, solver, stage, states, seconds):
        """
        Called when a stage has been solved.

        Args:
            solver (str): Solver name
            stage (int): Stage index
            states (int): Number of augmented states evaluated at the stage
            seconds (float): Time spent on the stage
        """
        pass

    def on_solve_complete(self, solver, value, seconds):
        """
        Called when a solve is complete.

        Args:
            solver (str): Solver name
            value (float): Value at the root augmented state
            seconds (float): Total solve time
        """
        pass


class ExperimentCallback:
    """
    Callback interface for experiment progress events.
    """

    def on_replication_complete(self, result):
        """
        Called when a replication has been solved and evaluated.

        Args:
            result (ReplicationResult): The replication outcome
        """
        pass

    def on_experiment_complete(self, results, rows):
        """
        Called when every replication is complete.

        Args:
            results (list): All replication results
            rows (list): Summary rows
        """
        pass


class LoggingCallback(SolverCallback, ExperimentCallback):
    """Reports progress through the logging module."""

    def on_stage_complete(self, solver, stage, states, seconds):
        logging.debug("solver=%s stage=%d states=%d seconds=%.3f", solver, stage, states, seconds)

    def on_solve_complete(self, solver, value, seconds):
        logging.debug("solver=%s value=%.10g seconds=%.3f", solver, value, seconds)

    def on_replication_complete(self, result):
        if result.error:
            logging.warning("Replication %d (%s, H=%d) failed: %s",
                            result.replication, result.formulation, result.data_size, result.error)
        else:
            logging.debug("Replication %d (%s, H=%d): value %.10g",
                          result.replication, result.formulation, result.data_size, result.value)

    def on_experiment_complete(self, results, rows):
        for row in rows:
            logging.info("%s H=%d: average %.4f std %.4f D %.3e (%d failures)",
                         row.formulation, row.data_size, row.average, row.std, row.deviation, row.failures)
