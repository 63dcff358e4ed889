"""Benchmark problems, baselines and the run harness."""

from .baselines import METHODS, baseline_cts, baseline_random
from .problems import PROBLEMS, Problem, ackley_mixed, get_problem, hartmann6, synthetic_ordered_pool
