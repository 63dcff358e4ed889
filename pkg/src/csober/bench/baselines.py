"""Baseline optimisers sharing the loop, budget accounting and metrics of the main method."""

from __future__ import annotations

from ..optimizer import LoopConfig, RunResult, cts_proposal, random_proposal, run_generic, run_loop


def baseline_random(problem, cfg: LoopConfig) -> RunResult:
    """Batches of prior draws (pool-uniform for pool problems)."""
    return run_generic(problem, cfg, random_proposal, "random")


def baseline_cts(problem, cfg: LoopConfig) -> RunResult:
    """Constrained Thompson sampling with surrogate refits every iteration."""
    return run_generic(problem, cfg, cts_proposal, "cts")


METHODS = {
    "csober": run_loop,
    "random": baseline_random,
    "cts": baseline_cts,
}
