"""Acquisition functions, tolerance selection, constrained Thompson sampling and the loop.

One iteration of the recombination optimiser fits the surrogates, weights a
candidate set by the feasibility-aware density, compresses it with the LP and,
when the LP returns fewer than ``n`` points, fills the batch by constrained
Thompson sampling on hallucinated surrogates. `run_loop` repeats this under
ordered-query semantics: the objective of a point is only revealed when all
its ordered constraints pass.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, DegenerateBatch, DomainError, OracleError
from .kernels import JITTER, KernelSpec, SumKernel, as_matrix
from .measure import (EmpiricalMeasure, PiDensity, build_measure, deweighted_resample, estimate_eta,
                      rejection_rate, shrinkage_stats, weighted_resample)
from .quadrature import extract_batch, nystrom_basis, nystrom_error, recombine, worst_case_error
from .surrogate import (CheapOracle, ConstraintModel, ContinuousConstraint, Dataset, GpPosterior,
                        fit_binary_constraint, fit_gp, hallucinate_gp, sample_posterior)

logger = logging.getLogger(__name__)

# Tolerance used when no constraint can reject a query.
ZERO_RISK_EPS = 1e-8
AF_KINDS = ("ucb", "ei", "mean")
LANDMARK_SAMPLING = ("inverse", "weighted")


# --------------------------------------------------------------------------
# Acquisition


def acquisition(gp: GpPosterior, x, kind: str = "ucb", beta: float = 2.0, best: float | None = None):
    """Acquisition values in the units of the objective (maximisation).

    ``kind`` is "ucb" (m + beta * sqrt(C)), "ei" (expected improvement over
    ``best``) or "mean". Returns a float for a single point.
    """
    X = as_matrix(x)
    mean, var = gp.predict(X, full_cov=False)
    sd = np.sqrt(var)
    if kind == "ucb":
        out = mean + beta * sd
    elif kind == "mean":
        out = mean
    elif kind == "ei":
        if best is None:
            raise DomainError("EI needs the current best feasible value")
        out = expected_improvement(mean, sd, best)
    else:
        raise DomainError(f"unknown acquisition {kind!r}; choose from {AF_KINDS}")
    single = not isinstance(x, np.ndarray) or np.ndim(x) == 1
    return float(out[0]) if single and out.size == 1 else out


def expected_improvement(mean, sd, best: float) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    diff = mean - best
    out = np.maximum(diff, 0.0)
    ok = sd > 1e-12
    z = diff[ok] / sd[ok]
    out[ok] = diff[ok] * ndtr(z) + sd[ok] * np.exp(-0.5 * z**2) / math.sqrt(2.0 * math.pi)
    return out


# --------------------------------------------------------------------------
# Tolerance


@dataclass(frozen=True)
class Tolerance:
    """Either the adaptive rule (expected ordered rejection rate) or a fixed value."""

    mode: str = "adaptive"
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("adaptive", "fixed"):
            raise ConfigError(f"unknown tolerance mode {self.mode!r}")
        if self.mode == "fixed" and (self.value is None or not self.value >= 0):
            raise ConfigError("fixed tolerance needs a nonnegative value")

    @classmethod
    def fixed(cls, value: float) -> "Tolerance":
        return cls("fixed", float(value))

    @classmethod
    def parse(cls, text: str) -> "Tolerance":
        text = text.strip()
        if text == "adaptive":
            return cls()
        if text.startswith("fixed:"):
            try:
                return cls.fixed(float(text[len("fixed:"):]))
            except ValueError:
                raise ConfigError(f"bad fixed tolerance {text!r}") from None
        raise ConfigError(f"tolerance must be 'adaptive' or 'fixed:<value>', got {text!r}")

    def __str__(self) -> str:
        return "adaptive" if self.mode == "adaptive" else f"fixed:{self.value:g}"


def select_tolerance(tol, m: EmpiricalMeasure, constraints: Sequence[ConstraintModel]) -> float:
    """eps_LP for one iteration.

    Fixed tolerances pass through. The adaptive rule returns the expected
    rejection rate restricted to ordered constraints, and ZERO_RISK_EPS when
    no ordered constraint exists (nothing can be rejected).
    """
    if isinstance(tol, LoopConfig):
        tol = tol.tolerance
    if tol.mode == "fixed":
        return float(tol.value)
    ordered = [c for c in constraints if c.ordered]
    if not ordered:
        return ZERO_RISK_EPS
    return max(rejection_rate(m, ordered), ZERO_RISK_EPS)


# --------------------------------------------------------------------------
# Constrained Thompson sampling and hallucination


def constrained_ts(gp_obj: GpPosterior, constraints: Sequence[ConstraintModel], candidates, count: int,
                   seed=None, max_candidates: int = 2048) -> np.ndarray:
    """Row indices into ``candidates`` of ``count`` constrained Thompson-sampling picks.

    Each pick uses its own joint draw of the objective and of every constraint
    over the candidates: among candidates whose sampled constraints hold, take
    the sampled-objective argmax. If none holds, take the candidate with the
    largest product of acceptance probabilities (ties broken by their sum,
    then by the objective sample). Picks are without replacement. Candidate
    sets larger than ``max_candidates`` are subsampled first.
    """
    X = as_matrix(candidates)
    if X.shape[0] == 0:
        raise DomainError("constrained_ts needs candidates")
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sub = np.arange(X.shape[0])
    if X.shape[0] > max_candidates:
        sub = np.sort(rng.choice(X.shape[0], size=max_candidates, replace=False))
    Xs = X[sub]
    count = min(count, Xs.shape[0])
    f = sample_posterior(gp_obj, Xs, count, rng)
    sat = np.ones((count, Xs.shape[0]), dtype=bool)
    rho_prod = np.ones(Xs.shape[0])
    rho_sum = np.zeros(Xs.shape[0])
    for c in constraints:
        sat &= c.sample_satisfied(Xs, rng, count)
        r = c.rho(Xs)
        rho_prod *= r
        rho_sum += r
    taken = np.zeros(Xs.shape[0], dtype=bool)
    picks = []
    for k in range(count):
        feas = sat[k] & ~taken
        if feas.any():
            j = int(np.argmax(np.where(feas, f[k], -np.inf)))
        else:
            order = np.lexsort((f[k], rho_sum, rho_prod))
            order = order[~taken[order]]
            j = int(order[-1])
        taken[j] = True
        picks.append(sub[j])
    return np.asarray(picks, dtype=int)


def hallucinate(gp: GpPosterior, X_new) -> GpPosterior:
    """Condition on predictive means at X_new without refitting hyperparameters."""
    return hallucinate_gp(gp, X_new)


# --------------------------------------------------------------------------
# Configuration and state


@dataclass
class LoopConfig:
    batch_size: int = 5
    iterations: int = 10
    seed: int = 0
    tolerance: Tolerance = field(default_factory=Tolerance)
    af: str = "ucb"
    beta: float = 2.0
    fill_with_cts: bool = True
    n_candidates: int = 4096
    n_nystrom: int = 512
    # minimum acceptance probability per constraint (one value for all, or one each)
    thresholds: float | tuple[float, ...] = 0.0
    gp_restarts: int = 8
    # random restarts once a previous optimum is available as an extra start
    gp_refit_restarts: int = 2
    landmark_sampling: str = "weighted"
    solver: str = "simplex"
    n_initial: int | None = None
    max_pool: int = 10_000
    cts_candidates: int = 1024

    def __post_init__(self):
        if isinstance(self.tolerance, str):
            self.tolerance = Tolerance.parse(self.tolerance)
        if self.batch_size < 3:
            raise ConfigError("batch size must be at least 3")
        if self.iterations < 1:
            raise ConfigError("iterations must be at least 1")
        if self.af not in AF_KINDS:
            raise ConfigError(f"unknown acquisition {self.af!r}; choose from {AF_KINDS}")
        if self.landmark_sampling not in LANDMARK_SAMPLING:
            raise ConfigError(f"landmark_sampling must be one of {LANDMARK_SAMPLING}")
        if self.n_nystrom < self.batch_size - 2:
            raise ConfigError("need at least batch_size - 2 Nystrom points")
        if self.n_candidates < self.batch_size:
            raise ConfigError("need at least batch_size candidates")

    def threshold(self, i: int) -> float:
        if isinstance(self.thresholds, (int, float)):
            return float(self.thresholds)
        return float(self.thresholds[i])

    def initial_size(self, dim: int) -> int:
        if self.n_initial is not None:
            return self.n_initial
        return min(max(3 * dim, 6), max(self.batch_size, 6))


class LoopState:
    """Everything observed so far, one row per query.

    ``y`` holds the objective (NaN for rejected queries), ``cvals`` the
    constraint values or labels revealed for every query, ``feasible`` the
    true feasibility of each queried point under all constraints.
    """

    def __init__(self, problem, cfg: LoopConfig):
        self.problem = problem
        self.cfg = cfg
        L = len(problem.constraints)
        self.X = np.zeros((0, problem.dim))
        self.idx = np.zeros(0, dtype=int)            # pool index, -1 off-pool
        self.y = np.zeros(0)
        self.cvals = np.zeros((0, L))
        self.feasible = np.zeros(0, dtype=bool)
        self.iteration = 0
        self.thetas: dict[str, np.ndarray] = {}

    # ---- derived views
    @property
    def labelled(self) -> np.ndarray:
        return ~np.isnan(self.y)

    @property
    def rejected(self) -> np.ndarray:
        return np.isnan(self.y)

    def objective_data(self) -> Dataset:
        lab = self.labelled
        return Dataset(self.X[lab], self.y[lab])

    def constraint_data(self, i: int) -> Dataset:
        return Dataset(self.X, self.cvals[:, i])

    def queried_pool(self) -> np.ndarray:
        return self.idx[self.idx >= 0]

    def best_feasible(self) -> float:
        """Best feasible objective found so far (maximisation), -inf when none."""
        ok = self.feasible & self.labelled
        return float(self.y[ok].max()) if ok.any() else -np.inf

    def rng(self, *tag: int) -> np.random.Generator:
        return np.random.default_rng([self.cfg.seed, self.iteration, *tag])

    # ---- queries
    def query(self, X, idx=None) -> np.ndarray:
        """Evaluate constraints, then the objective where ordered constraints pass.

        Returns the per-point true feasibility. Constraint values are revealed
        for every query; the objective is withheld (NaN) on ordered failures.
        """
        p = self.problem
        X = as_matrix(X)
        pidx = np.full(X.shape[0], -1) if idx is None else np.asarray(idx, dtype=int)
        oracle_idx = None if idx is None else pidx
        cv = np.column_stack([c.values(X, oracle_idx) for c in p.constraints]) if p.constraints \
            else np.zeros((X.shape[0], 0))
        sat = np.ones(X.shape[0], dtype=bool)
        passed = np.ones(X.shape[0], dtype=bool)
        for i, c in enumerate(p.constraints):
            ok = cv[:, i] >= 0.0 if c.tags.kind == "continuous" else cv[:, i] > 0.5
            sat &= ok
            if c.tags.ordered:
                passed &= ok
        y = np.full(X.shape[0], np.nan)
        if passed.any():
            sel = None if idx is None else pidx[passed]
            y[passed] = p.query_objective(X[passed], sel)
        self.X = np.vstack([self.X, X])
        self.idx = np.concatenate([self.idx, pidx])
        self.y = np.concatenate([self.y, y])
        self.cvals = np.vstack([self.cvals, cv])
        self.feasible = np.concatenate([self.feasible, sat])
        return sat

    def audit(self) -> None:
        """Raise if any labelled point failed an ordered constraint."""
        for i, c in enumerate(self.problem.constraints):
            if not c.tags.ordered:
                continue
            ok = self.cvals[:, i] >= 0.0 if c.tags.kind == "continuous" else self.cvals[:, i] > 0.5
            if np.any(self.labelled & ~ok):
                raise AssertionError(f"objective label present for a point violating {c.name!r}")


# --------------------------------------------------------------------------
# Surrogate fitting


def _restarts(state: LoopState, cfg: LoopConfig, key: str) -> int:
    return cfg.gp_refit_restarts if key in state.thetas else cfg.gp_restarts


def fit_models(state: LoopState, cfg: LoopConfig, seed: int = 0):
    """Objective GP plus one ConstraintModel per problem constraint."""
    p = state.problem
    template = p.kernel_template()
    gp = fit_gp(state.objective_data(), template, restarts=_restarts(state, cfg, "objective"), seed=seed,
                init_theta=state.thetas.get("objective"))
    state.thetas["objective"] = gp.theta
    models: list[ConstraintModel] = []
    for i, c in enumerate(p.constraints):
        kw = dict(threshold=cfg.threshold(i), coupled=c.tags.coupled, ordered=c.tags.ordered, name=c.name)
        if c.tags.cheap:
            models.append(CheapOracle(lambda X, c=c: c.satisfied(X), **kw))
        elif c.tags.kind == "continuous":
            floor = 1e-6 if c.tags.deterministic else 1e-4
            key = f"constraint{i}"
            cgp = fit_gp(state.constraint_data(i), template, noise_floor=floor, restarts=_restarts(state, cfg, key),
                         seed=seed + 1 + i, init_theta=state.thetas.get(key))
            state.thetas[key] = cgp.theta
            models.append(ContinuousConstraint(cgp, **kw))
        else:
            models.append(fit_binary_constraint(state.constraint_data(i), template, seed=seed + 1 + i, **kw))
    return gp, models


class _MemoRho(ConstraintModel):
    """Delegating wrapper that remembers rho on the most recent point sets."""

    def __init__(self, inner: ConstraintModel, size: int = 4):
        super().__init__(inner.threshold, inner.coupled, inner.ordered, inner.name)
        self.inner = inner
        self.flavour = inner.flavour
        self._cache: dict = {}
        self._size = size

    def rho(self, X) -> np.ndarray:
        X = as_matrix(X)
        key = (X.shape, hash(X.tobytes()))
        if key not in self._cache:
            if len(self._cache) >= self._size:
                self._cache.pop(next(iter(self._cache)))
            self._cache[key] = self.inner.rho(X)
        return self._cache[key].copy()

    def sample_satisfied(self, X, rng, count=1):
        return self.inner.sample_satisfied(X, rng, count)

    def hallucinate(self, X_new) -> ConstraintModel:
        return self.inner.hallucinate(X_new)


def ready_for_models(state: LoopState) -> bool:
    """At least two labelled objective points and two observations per learnt constraint."""
    return int(state.labelled.sum()) >= 2 and len(state.y) >= 2


def candidate_set(state: LoopState, cfg: LoopConfig, rng: np.random.Generator):
    """X_rec: prior draws for box domains, the unqueried pool (capped) for pool domains."""
    p = state.problem
    if p.is_pool:
        free = np.setdiff1d(np.arange(len(p.pool)), state.queried_pool())
        if free.size > cfg.max_pool:
            free = np.sort(rng.choice(free, size=cfg.max_pool, replace=False))
        return p.pool[free], free
    return p.sample(cfg.n_candidates, rng)


def acceptance_product(models: Sequence[ConstraintModel], X) -> np.ndarray:
    q = np.ones(as_matrix(X).shape[0])
    for c in models:
        q *= c.rho(X)
    return q


# --------------------------------------------------------------------------
# One iteration


@dataclass
class Proposal:
    X: np.ndarray
    idx: np.ndarray | None
    eps_lp: float = float("nan")
    # predicted rejection of this batch: 1 - mean acceptance product over its points
    est_rejection: float = float("nan")
    wce: float = float("nan")
    lp_size: int = 0
    diagnostics: dict = field(default_factory=dict)


def budgeted_batch(X_lp_idx: np.ndarray, X_rec: np.ndarray, gp: GpPosterior,
                   models: Sequence[ConstraintModel], n: int, fill: bool, rng, max_candidates: int = 2048):
    """Row indices into X_rec: the LP picks, then cTS picks on hallucinated surrogates up to ``n``."""
    picks = np.asarray(X_lp_idx, dtype=int)[:n]
    if not fill or picks.size >= n:
        return picks
    rest = np.setdiff1d(np.arange(X_rec.shape[0]), picks)
    if rest.size == 0:
        return picks
    if picks.size:
        gp = hallucinate(gp, X_rec[picks])
        models = [c.hallucinate(X_rec[picks]) for c in models]
    extra = constrained_ts(gp, models, X_rec[rest], n - picks.size, rng, max_candidates)
    return np.concatenate([picks, rest[extra]])


def lp_kernel(gp: GpPosterior, models: Sequence[ConstraintModel], query_target: str = "objective"):
    """Objective posterior covariance, or the summed constraint posteriors for constraint queries."""
    if query_target == "objective":
        return gp.posterior_kernel
    if query_target != "constraints":
        raise DomainError(f"query_target must be 'objective' or 'constraints', got {query_target!r}")
    models = [getattr(c, "inner", c) for c in models]
    parts = [c.gp.posterior_kernel for c in models if isinstance(c, ContinuousConstraint)]
    return SumKernel(parts) if parts else gp.posterior_kernel


def csober_step(state: LoopState, cfg: LoopConfig, query_target: str = "objective") -> Proposal:
    """Propose one batch: surrogates, weighted measure, tolerance, LP, optional cTS fill."""
    p = state.problem
    n = cfg.batch_size
    rng = state.rng(1)
    gp, models = fit_models(state, cfg, seed=int(rng.integers(2**31)))
    # rho over X_rec is needed by the measure, both rejection estimates and q
    models = [_MemoRho(c) for c in models]

    X_rec, pool_idx = candidate_set(state, cfg, rng)
    pd = PiDensity(gp, None, models)
    pd.eta = estimate_eta(pd, X_rec)
    m = build_measure(pd, X_rec, pool_idx)
    est_rej = rejection_rate(m, models)
    eps_lp = select_tolerance(cfg.tolerance, m, models)
    stats = shrinkage_stats(m, p.x_star)

    # the LP works on the support of the measure
    support = np.flatnonzero(m.w > 0)
    ms = EmpiricalMeasure(X_rec[support], m.w[support] / m.w[support].sum())
    kernel = lp_kernel(gp, models, query_target)
    resample = deweighted_resample if cfg.landmark_sampling == "inverse" else weighted_resample
    X_nys = ms.X[resample(ms, cfg.n_nystrom, rng)]
    basis = nystrom_basis(kernel, X_nys, n)
    phi = basis.test_functions(ms.X)
    eps_nys = nystrom_error(basis, ms.X, phi)
    best = state.best_feasible()
    if not np.isfinite(best):
        best = float(np.nanmax(state.y)) if state.labelled.any() else 0.0
    g = acquisition(gp, ms.X, cfg.af, cfg.beta, best)
    # shift so the reward is nonnegative; a negative g * q would favour low acceptance
    g = g - g.min()
    q = acceptance_product(models, X_rec)[support]
    res = recombine(ms, basis, g, q, eps_lp, cfg.solver, phi=phi)
    k_max = float(np.sqrt(max(np.max(kernel.diag(ms.X)), 0.0)))
    try:
        bp = extract_batch(res, ms, eps_nys, k_max)
        lp_rows = support[bp.indices]
        wce = worst_case_error(bp, ms, kernel)
        w_lp, X_lp = bp.w_batch, bp.X_batch
    except DegenerateBatch:
        logger.warning("LP batch degenerate; whole batch from cTS")
        lp_rows = np.zeros(0, dtype=int)
        wce = float("nan")
        w_lp, X_lp = np.zeros(0), np.zeros((0, p.dim))

    rows = budgeted_batch(lp_rows, X_rec, gp, models, n, cfg.fill_with_cts, rng, cfg.cts_candidates)
    batch_rej = float(1.0 - acceptance_product(models, X_rec)[rows].mean())
    diag = {
        "eps_rej_measure": est_rej,
        "pi_variance": stats.variance,
        "pi_mean_distance": stats.mean_distance,
        "eps_nys": eps_nys,
        "lp_fallback": res.fallback,
        "lp_weights": w_lp,
        "lp_points": X_lp,
    }
    return Proposal(X_rec[rows], None if pool_idx is None else pool_idx[rows], eps_lp, batch_rej, wce,
                    int(lp_rows.size), diag)


def random_proposal(state: LoopState, cfg: LoopConfig) -> Proposal:
    """Prior draws (pool draws exclude queried points)."""
    p = state.problem
    rng = state.rng(0)
    if p.is_pool:
        free = np.setdiff1d(np.arange(len(p.pool)), state.queried_pool())
        idx = np.sort(rng.choice(free, size=min(cfg.batch_size, free.size), replace=False))
        return Proposal(p.pool[idx], idx)
    X, _ = p.sample(cfg.batch_size, rng)
    return Proposal(X, None)


def cts_proposal(state: LoopState, cfg: LoopConfig) -> Proposal:
    """A full batch of constrained Thompson-sampling picks over fresh candidates."""
    rng = state.rng(2)
    gp, models = fit_models(state, cfg, seed=int(rng.integers(2**31)))
    X_rec, pool_idx = candidate_set(state, cfg, rng)
    rows = constrained_ts(gp, models, X_rec, cfg.batch_size, rng, cfg.cts_candidates)
    q = acceptance_product(models, X_rec[rows])
    return Proposal(X_rec[rows], None if pool_idx is None else pool_idx[rows],
                    est_rejection=float(1.0 - q.mean()))


# --------------------------------------------------------------------------
# Loop


@dataclass
class RunRecord:
    iteration: int
    best_feasible: float
    log_regret: float
    eps_lp: float
    est_rejection: float
    realised_rejection: float
    batch_logdet: float
    wce: float
    batch_size: int
    elapsed_seconds: float
    seed: int

    def __post_init__(self):
        for f in fields(self):
            cast = int if f.type in ("int", int) else float
            object.__setattr__(self, f.name, cast(getattr(self, f.name)))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class RunResult(list):
    """RunRecords of one run, plus the final state and per-iteration diagnostics."""

    def __init__(self, records=(), state: LoopState | None = None, diagnostics=None, method: str = ""):
        super().__init__(records)
        self.state = state
        self.diagnostics = diagnostics or []
        self.method = method


def batch_logdet(kernel: KernelSpec, X) -> float:
    K = kernel(X)
    K[np.diag_indices_from(K)] += JITTER * kernel.outputscale
    sign, logdet = np.linalg.slogdet(K)
    return float(logdet) if sign > 0 else float("-inf")


def initial_design(problem, cfg: LoopConfig):
    """Prior draws shared by every method for a given seed (not counted as an iteration)."""
    rng = np.random.default_rng([cfg.seed, 0xD0])
    return problem.sample(cfg.initial_size(problem.dim), rng)


def run_generic(problem, cfg: LoopConfig, propose: Callable[[LoopState, LoopConfig], Proposal],
                method: str = "") -> RunResult:
    """Initial design, then ``cfg.iterations`` proposals under ordered-query semantics.

    On an oracle failure the records gathered so far are attached to the
    exception as ``records`` and it is re-raised.
    """
    state = LoopState(problem, cfg)
    X0, idx0 = initial_design(problem, cfg)
    state.query(X0, idx0)
    out = RunResult(state=state, method=method)
    ref = problem.reference_kernel()
    for it in range(1, cfg.iterations + 1):
        state.iteration = it
        t0 = time.perf_counter()
        try:
            prop = propose(state, cfg) if ready_for_models(state) else random_proposal(state, cfg)
            sat = state.query(prop.X, prop.idx)
        except OracleError as exc:
            exc.records = out
            raise
        elapsed = time.perf_counter() - t0
        best = state.best_feasible()
        best_min = -best
        if problem.optimum is not None and np.isfinite(best):
            gap = problem.optimum - best
            log_regret = math.log10(gap) if gap > 0 else float("-inf")
        else:
            log_regret = float("nan") if problem.optimum is None else float("inf")
        out.append(RunRecord(
            iteration=it, best_feasible=best_min, log_regret=log_regret, eps_lp=prop.eps_lp,
            est_rejection=prop.est_rejection, realised_rejection=float(1.0 - sat.mean()),
            batch_logdet=batch_logdet(ref, prop.X), wce=prop.wce, batch_size=int(prop.X.shape[0]),
            elapsed_seconds=elapsed, seed=cfg.seed,
        ))
        diag = dict(prop.diagnostics)
        diag["lp_size"] = prop.lp_size
        if problem.optimum is not None and diag.get("lp_weights") is not None and len(diag["lp_weights"]):
            f_true = problem.objective(diag["lp_points"], None)
            diag["bayes_regret"] = float(abs(problem.optimum - diag["lp_weights"] @ f_true))
        out.diagnostics.append(diag)
        state.audit()
        logger.info("%s it=%d best=%.4g n=%d rej=%.2f (%.1fs)", method, it, best_min, prop.X.shape[0],
                    1.0 - sat.mean(), elapsed)
    return out


def run_loop(problem, cfg: LoopConfig) -> RunResult:
    """The recombination optimiser on ``problem``; records in the minimisation convention."""
    return run_generic(problem, cfg, csober_step, "csober")
