"""Run cells, sweeps and RunRecord serialisation (CSV and JSON)."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, TextIO

from ..errors import ConfigError
from ..optimizer import LoopConfig, RunRecord, RunResult, Tolerance
from .baselines import METHODS
from .problems import get_problem

CSV_COLUMNS = RunRecord.columns()
_INT_FIELDS = {"iteration", "batch_size", "seed"}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(records: Iterable[RunRecord], out: TextIO, group: str | None = None, header: bool = True) -> None:
    """CSV rows in the fixed column order; a leading ``group`` column when ``group`` is given."""
    w = csv.writer(out, lineterminator="\n")
    cols = (["group"] if group is not None else []) + CSV_COLUMNS
    if header:
        w.writerow(cols)
    for r in records:
        row = [_fmt(getattr(r, c)) for c in CSV_COLUMNS]
        w.writerow(([group] if group is not None else []) + row)


def read_csv(src: TextIO) -> list[tuple[str | None, RunRecord]]:
    """Inverse of write_csv: (group or None, record) pairs."""
    out = []
    for row in csv.DictReader(src):
        kw = {c: int(row[c]) if c in _INT_FIELDS else float(row[c]) for c in CSV_COLUMNS}
        out.append((row.get("group"), RunRecord(**kw)))
    return out


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def record_to_json(r: RunRecord) -> dict:
    return {k: _json_safe(v) for k, v in r.to_dict().items()}


def record_from_json(d: dict) -> RunRecord:
    return RunRecord(**{c: int(d[c]) if c in _INT_FIELDS else float(d[c]) for c in CSV_COLUMNS})


def summary(result: RunResult, problem: str, cfg: LoopConfig) -> dict:
    last = result[-1] if len(result) else None
    return {
        "problem": problem,
        "method": result.method,
        "seed": cfg.seed,
        "batch_size": cfg.batch_size,
        "iterations": cfg.iterations,
        "tolerance": str(cfg.tolerance),
        "fill_with_cts": cfg.fill_with_cts,
        "final_best_feasible": _json_safe(last.best_feasible) if last else None,
        "final_log_regret": _json_safe(last.log_regret) if last else None,
        "total_queries": int(sum(r.batch_size for r in result)),
        "rejected_queries": int(result.state.rejected.sum()) if result.state is not None else None,
    }


@dataclass(frozen=True)
class Cell:
    problem: str
    method: str
    cfg: LoopConfig

    @property
    def group(self) -> str:
        return f"{self.method}|{self.cfg.tolerance}"


def run_cell(cell: Cell) -> RunResult:
    try:
        fn = METHODS[cell.method]
    except KeyError:
        raise ConfigError(f"unknown method {cell.method!r}; choose from {sorted(METHODS)}") from None
    return fn(get_problem(cell.problem, cell.cfg.seed), cell.cfg)


def _records_only(cell: Cell) -> list[RunRecord]:
    return list(run_cell(cell))


def sweep_cells(problem: str, methods: list[str], tolerances: list[Tolerance], seeds: list[int],
                base: LoopConfig) -> list[Cell]:
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}; choose from {sorted(METHODS)}")
    get_problem(problem)
    return [Cell(problem, m, replace(base, tolerance=t, seed=s)) for m in methods for t in tolerances for s in seeds]


def worker_count(cells: int) -> int:
    cap = os.environ.get("CSOBER_THREADS")
    try:
        n = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise ConfigError(f"CSOBER_THREADS must be an integer, got {cap!r}") from None
    return max(1, min(n, cells))


def run_sweep(cells: list[Cell]) -> list[tuple[Cell, list[RunRecord]]]:
    """Run independent cells, in parallel up to CSOBER_THREADS; output order follows ``cells``."""
    workers = worker_count(len(cells))
    if workers == 1:
        return [(c, _records_only(c)) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(zip(cells, pool.map(_records_only, cells)))


def sweep_csv(results: list[tuple[Cell, list[RunRecord]]]) -> str:
    buf = io.StringIO()
    for i, (cell, recs) in enumerate(results):
        write_csv(recs, buf, group=cell.group, header=i == 0)
    return buf.getvalue()


def sweep_json(results: list[tuple[Cell, list[RunRecord]]]) -> str:
    groups: dict[str, list] = {}
    for cell, recs in results:
        groups.setdefault(cell.group, []).append(
            {"seed": cell.cfg.seed, "records": [record_to_json(r) for r in recs]})
    return json.dumps({"groups": groups}, indent=2)
