"""
CSV export of experiment and bandit results.

This module provides classes for writing replication results, summaries,
histograms, timings and regret curves to CSV files.

The main class is ResultExporter which writes every file of one experiment
into an output directory. A module-level function is provided for
convenience.
"""

import csv
import logging
import math
import os

from .errors import ExportError

REPLICATIONS_FILE = 'replications.csv'
SUMMARY_FILE = 'summary.csv'
HISTOGRAM_FILE = 'histogram.csv'
TIMINGS_FILE = 'timings.csv'
REGRET_FILE = 'regret.csv'

REPLICATION_COLUMNS = ('formulation', 'H', 'replication', 'value', 'stderr', 'error')
SUMMARY_COLUMNS = ('formulation', 'H', 'average', 'std', 'D', 'replications', 'failures', 'optimum')
HISTOGRAM_COLUMNS = ('formulation', 'H', 'bin_lower', 'bin_upper', 'count')
TIMING_COLUMNS = ('formulation', 'H', 'replication', 'seconds')
REGRET_COLUMNS = ('n', 'mean_regret', 'stderr', 'bound')

DEFAULT_BIN_WIDTH = 0.05
# Values sitting on a bin edge up to rounding belong to the bin above it.
EDGE_SLACK = 1e-9


def format_number(value):
    """Shortest round-trip text of a number; NaN becomes an empty field."""
    if isinstance(value, float):
        return '' if math.isnan(value) else repr(value)
    return str(value)


def histogram(values, bin_width):
    """
    Counts of ``values`` on bins ``[k w, (k + 1) w)``.

    Returns:
        list: ``(bin_index, count)`` for non-empty bins, ascending
    """
    counts = {}
    for value in values:
        index = math.floor(value / bin_width + EDGE_SLACK)
        counts[index] = counts.get(index, 0) + 1
    return sorted(counts.items())


class ResultExporter:
    """
    Class for writing experiment results to CSV files.

    Every file starts with a header row naming its columns and uses
    RFC-4180 quoting with ``\\r\\n`` line endings. Wall times go to their own
    file, so the other files are byte-identical between runs with the same
    configuration.
    """

    def __init__(self, output_dir, bin_width=DEFAULT_BIN_WIDTH):
        """
        Initialize a ResultExporter.

        Args:
            output_dir (str): Directory where the CSV files are written; created if missing
            bin_width (float): Histogram bin width (default: 0.05)
        """
        self.output_dir = output_dir
        self.bin_width = bin_width

    def _write(self, filename, columns, rows):
        path = os.path.join(self.output_dir, filename)
        try:
            os.makedirs(self.output_dir, exist_ok=True)
            with open(path, 'w', newline='') as f:
                writer = csv.writer(f, quoting=csv.QUOTE_MINIMAL, lineterminator='\r\n')
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([format_number(v) for v in row])
        except OSError as e:
            raise ExportError("cannot write %s: %s" % (path, e))
        logging.info("Wrote %s", path)
        return path

    def write_replications(self, results):
        return self._write(REPLICATIONS_FILE, REPLICATION_COLUMNS,
                           ((r.formulation, r.data_size, r.replication, r.value, r.stderr, r.error)
                            for r in results))

    def write_summary(self, rows):
        return self._write(SUMMARY_FILE, SUMMARY_COLUMNS,
                           ((r.formulation, r.data_size, r.average, r.std, r.deviation, r.replications,
                             r.failures, r.optimum) for r in rows))

    def write_histogram(self, results):
        """Histogram of successful replication values per (formulation, H), in result order."""
        groups = {}
        for result in results:
            if not result.error:
                groups.setdefault((result.formulation, result.data_size), []).append(result.value)
        rows = []
        for (formulation, data_size), values in groups.items():
            for index, count in histogram(values, self.bin_width):
                rows.append((formulation, data_size, index * self.bin_width, (index + 1) * self.bin_width, count))
        return self._write(HISTOGRAM_FILE, HISTOGRAM_COLUMNS, rows)

    def write_timings(self, results):
        return self._write(TIMINGS_FILE, TIMING_COLUMNS,
                           ((r.formulation, r.data_size, r.replication, r.seconds) for r in results))

    def write_regret(self, points):
        return self._write(REGRET_FILE, REGRET_COLUMNS,
                           ((p.plays, p.mean_regret, p.stderr, p.bound) for p in points))

    def export(self, results, rows):
        """
        Write every experiment file.

        Args:
            results (list): Replication results
            rows (list): Summary rows

        Returns:
            list: Paths of the written files

        Raises:
            ExportError: If a file cannot be written
        """
        return [
            self.write_replications(results),
            self.write_summary(rows),
            self.write_histogram(results),
            self.write_timings(results),
        ]


def emit(results, rows, output_dir, bin_width=DEFAULT_BIN_WIDTH):
    """
    Write the experiment CSV files.

    Args:
        results (list): Replication results
        rows (list): Summary rows
        output_dir (str): Output directory
        bin_width (float): Histogram bin width

    Returns:
        list: Paths of the written files
    """
    return ResultExporter(output_dir, bin_width).export(results, rows)
