"""Kernel recombination with a tolerance-relaxed LP.

Given an empirical measure ``(w_rec, X_rec)``, a kernel, a reward ``g`` and
acceptance probabilities ``q``, the LP below picks a sparse reweighting::

    maximise    w @ (g * q)
    subject to  |(w - w_rec) @ phi_j(X_rec)| <= eps * sqrt(lam_j / (n - 2)),  j < n - 2
                (w - w_rec) @ q >= 0,  sum(w) == 1,  w >= 0

where ``(lam_j, phi_j)`` come from the eigendecomposition of the kernel Gram
matrix over Nystrom landmarks. A vertex solution has at most ``n`` nonzeros.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import DegenerateBatch, DomainError, EmptyAcceptance, NumericalFailure, SolverStall
from .kernels import KernelSpec, as_matrix
from .measure import EmpiricalMeasure
from .simplex import SOLVERS, SimplexResult

logger = logging.getLogger(__name__)

STRIP_TOL = 1e-12
# Eigenvalues below this fraction of the largest (times M) are numerically zero.
EIG_RTOL = 1e-13


@dataclass
class NystromBasis:
    X_nys: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    n_test: int
    kernel: Callable

    def positive(self) -> np.ndarray:
        """Mask over the leading ``n_test`` eigenpairs that are numerically nonzero."""
        lam = self.eigvals[: self.n_test]
        cutoff = EIG_RTOL * max(self.eigvals[0], 0.0) * len(self.eigvals)
        return lam > cutoff

    def test_functions(self, X) -> np.ndarray:
        """phi_j(X) for the leading ``n_test`` eigenpairs, shape (n_test, |X|)."""
        K = self.kernel(self.X_nys, as_matrix(X))
        return self.eigvecs[:, : self.n_test].T @ K

    def k_nys_diag(self, X, phi: np.ndarray | None = None) -> np.ndarray:
        if phi is None:
            phi = self.test_functions(X)
        pos = self.positive()
        lam = self.eigvals[: self.n_test][pos]
        return np.sum(phi[pos] ** 2 / lam[:, None], axis=0)


def nystrom_basis(kernel, X_nys, n: int) -> NystromBasis:
    """Symmetric eigendecomposition of the landmark Gram, eigenvalues descending and clamped at 0."""
    if n < 3:
        raise DomainError("batch size n must be at least 3")
    X_nys = as_matrix(X_nys)
    if X_nys.shape[0] < n - 2:
        raise DomainError(f"need at least n-2={n - 2} landmarks, got {X_nys.shape[0]}")
    G = kernel(X_nys)
    G = 0.5 * (G + G.T)
    try:
        lam, U = linalg.eigh(G)
    except linalg.LinAlgError as exc:
        raise NumericalFailure("eigendecomposition of the landmark Gram failed") from exc
    order = np.argsort(lam)[::-1]
    return NystromBasis(X_nys, np.maximum(lam[order], 0.0), U[:, order], n - 2, kernel)


def nystrom_error(basis: NystromBasis, X_rec, phi: np.ndarray | None = None) -> float:
    """sqrt of max |K_nys(x, x) - K(x, x)| over X_rec."""
    X_rec = as_matrix(X_rec)
    gap = np.abs(basis.k_nys_diag(X_rec, phi) - basis.kernel.diag(X_rec))
    return float(np.sqrt(gap.max()))


@dataclass
class LpProblem:
    objective: np.ndarray     # g * q
    phi: np.ndarray           # (n_test, N)
    rhs: np.ndarray           # eps * sqrt(lam_j / (n - 2))
    w_rec: np.ndarray
    q: np.ndarray
    eps_lp: float

    @property
    def n_test(self) -> int:
        return self.phi.shape[0]

    @property
    def row_count(self) -> int:
        return self.A_ub.shape[0] + self.A_eq.shape[0]

    @property
    def A_ub(self) -> np.ndarray:
        return np.vstack([self.phi, -self.phi, -self.q[None, :]])

    @property
    def b_ub(self) -> np.ndarray:
        a = self.phi @ self.w_rec
        return np.concatenate([a + self.rhs, -a + self.rhs, [-(self.q @ self.w_rec)]])

    @property
    def A_eq(self) -> np.ndarray:
        return np.ones((1, self.w_rec.size))

    @property
    def b_eq(self) -> np.ndarray:
        return np.ones(1)

    def violation(self, w: np.ndarray) -> float:
        """Largest constraint violation of ``w`` (0 when feasible)."""
        ub = np.max(self.A_ub @ w - self.b_ub, initial=0.0)
        eq = abs(w.sum() - 1.0)
        return float(max(ub, eq, -w.min(initial=0.0)))


def build_lp(m: EmpiricalMeasure, basis: NystromBasis, g, q, eps_lp: float,
             phi: np.ndarray | None = None) -> LpProblem:
    if eps_lp < 0:
        raise DomainError("eps_lp must be nonnegative")
    g = np.asarray(g, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if g.size != len(m) or q.size != len(m):
        raise DomainError("g and q must align with the measure")
    if phi is None:
        phi = basis.test_functions(m.X)
    # a null eigenpair has phi_j == 0 exactly (its RKHS norm is sqrt(lam_j)); keep the
    # row as the equality 0 == 0 instead of passing round-off noise to the solver
    pos = basis.positive()
    phi = np.where(pos[:, None], phi, 0.0)
    lam = np.where(pos, basis.eigvals[: basis.n_test], 0.0)
    rhs = eps_lp * np.sqrt(lam / basis.n_test)
    return LpProblem(g * q, phi, rhs, m.w.copy(), q, float(eps_lp))


@dataclass
class LpResult:
    w: np.ndarray
    objective: float
    support: np.ndarray
    lp: LpProblem
    nit: int = 0
    fallback: bool = False


def solve_lp(lp: LpProblem, solver: str | Callable = "simplex", max_iter: int | None = None) -> LpResult:
    """Vertex-optimal weights of the recombination LP."""
    fn = SOLVERS[solver] if isinstance(solver, str) else solver
    res: SimplexResult = fn(-lp.objective, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, max_iter=max_iter)
    w = res.x
    return LpResult(w, float(w @ lp.objective), np.flatnonzero(w > 0), lp, res.nit)


def recombine(m: EmpiricalMeasure, basis: NystromBasis, g, q, eps_lp: float,
              solver: str | Callable = "simplex", retries: int = 3, max_iter: int | None = None,
              phi: np.ndarray | None = None) -> LpResult:
    """Solve the LP, relaxing the tolerance tenfold on stalls; finally fall back to top-n of w_rec."""
    if phi is None:
        phi = basis.test_functions(m.X)
    eps = eps_lp
    for attempt in range(retries + 1):
        lp = build_lp(m, basis, g, q, eps, phi)
        try:
            return solve_lp(lp, solver, max_iter)
        except (SolverStall, NumericalFailure) as exc:
            logger.warning("LP attempt %d at eps=%.3g failed: %s", attempt, eps, exc)
            eps = max(eps * 10.0, 1e-8)
    n = basis.n_test + 2
    top = np.argsort(m.w)[::-1][:n]
    w = np.zeros(len(m))
    w[top] = m.w[top]
    if w.sum() <= 0:
        w[top] = 1.0
    w /= w.sum()
    lp = build_lp(m, basis, g, q, eps_lp, phi)
    return LpResult(w, float(w @ lp.objective), np.flatnonzero(w > 0), lp, fallback=True)


@dataclass
class BatchProposal:
    w_batch: np.ndarray
    X_batch: np.ndarray
    indices: np.ndarray
    eps_lp: float
    expected_reward: float
    wce_certificate: float
    eps_nys: float
    eps_rej: float = 0.0
    k_max: float = 1.0

    def __len__(self) -> int:
        return self.indices.size


def extract_batch(res: LpResult, m: EmpiricalMeasure, eps_nys: float = 0.0, k_max: float = 1.0) -> BatchProposal:
    """Nonzero entries of the LP solution, renormalised, with the integration-error certificate."""
    w = np.where(res.w > STRIP_TOL, res.w, 0.0)
    idx = np.flatnonzero(w)
    if idx.size == 0:
        raise DegenerateBatch("no LP weight above the strip tolerance")
    wb = w[idx] / w[idx].sum()
    lp = res.lp
    eps_rej = float(1.0 - lp.w_rec @ lp.q)
    cert = eps_rej * k_max + 2.0 * eps_nys + lp.eps_lp
    return BatchProposal(wb, m.X[idx], idx, lp.eps_lp, float(res.w @ lp.objective), cert, eps_nys,
                         eps_rej, k_max)


def _quad(kernel, X: np.ndarray, w: np.ndarray, chunk: int = 2048) -> float:
    """w @ K(X, X) @ w, row-chunked to bound memory."""
    keep = w != 0
    X, w = X[keep], w[keep]
    total = 0.0
    for s in range(0, len(w), chunk):
        total += w[s:s + chunk] @ (kernel(X[s:s + chunk], X) @ w)
    return float(total)


def mmd_squared(kernel, Xa, wa, Xb, wb) -> float:
    Xa, Xb = as_matrix(Xa), as_matrix(Xb)
    wa, wb = np.asarray(wa, dtype=float), np.asarray(wb, dtype=float)
    keep = wb != 0
    cross = wa @ kernel(Xa, Xb[keep]) @ wb[keep]
    return _quad(kernel, Xa, wa) - 2.0 * cross + _quad(kernel, Xb, wb)


def worst_case_error(bp: BatchProposal, m: EmpiricalMeasure, kernel) -> float:
    """Squared MMD between the batch and the reference measure under ``kernel``."""
    return mmd_squared(kernel, bp.X_batch, bp.w_batch, m.X, m.w)


def reweight_nnls(K_ss: np.ndarray, b: np.ndarray, w0: np.ndarray, max_iter: int = 500,
                  rtol: float = 1e-10) -> np.ndarray:
    """Projected gradient for min_w w K w - 2 b w subject to w >= 0, started at ``w0``."""
    L = 2.0 * max(float(np.linalg.eigvalsh(K_ss)[-1]), 1e-300)
    w = np.maximum(w0, 0.0)
    for _ in range(max_iter):
        grad = 2.0 * (K_ss @ w - b)
        new = np.maximum(w - grad / L, 0.0)
        change = np.linalg.norm(new - w)
        w = new
        if change <= rtol * max(np.linalg.norm(w), 1e-300):
            break
    return w


def simulate_rejection(bp: BatchProposal, q, m: EmpiricalMeasure, kernel, seed=None):
    """Bernoulli acceptance of batch points, then wce-optimal nonnegative reweighting of survivors.

    Returns (accepted positions within the batch, weights). The weights are not
    renormalised. Raises EmptyAcceptance when nothing survives.
    """
    q = np.asarray(q, dtype=float).ravel()
    if q.size != len(bp):
        raise DomainError("q must give one probability per batch point")
    rng = np.random.default_rng(seed)
    accepted = np.flatnonzero(rng.random(len(bp)) < q)
    if accepted.size == 0:
        raise EmptyAcceptance("every batch point was rejected")
    if accepted.size == len(bp):
        return accepted, bp.w_batch.copy()
    Xs = bp.X_batch[accepted]
    keep = m.w != 0
    K_ss = kernel(Xs)
    b = kernel(Xs, m.X[keep]) @ m.w[keep]
    return accepted, reweight_nnls(K_ss, b, bp.w_batch[accepted])


# --------------------------------------------------------------------------
# Monte-Carlo check of the expected-reward and integration-error bounds


@dataclass
class Prop1Instance:
    N: int = 200
    n: int = 10
    M: int = 50
    dim: int = 2
    lengthscale: float = 0.3
    n_functions: int = 10
    terms_per_function: int = 5
    eps_lp: float | None = None      # None: use the expected rejection rate
    q_mode: str = "random"           # "random" or "ones"
    landmarks: str = "subset"        # "subset" of X_rec, or "all" of X_rec
    solver: str = "simplex"


@dataclass
class FunctionCheck:
    norm: float
    mc_mean: float
    mc_se: float
    bound: float
    violated: bool


@dataclass
class Prop1Report:
    eps_lp: float
    eps_rej: float
    eps_nys: float
    k_max: float
    batch_size: int
    reward_bound: float
    reward_exact: float
    reward_mc_mean: float
    reward_mc_se: float
    reward_violated: bool
    functions: list[FunctionCheck] = field(default_factory=list)

    @property
    def lp1_violations(self) -> int:
        return int(self.reward_violated)

    @property
    def lp2_violations(self) -> int:
        return sum(f.violated for f in self.functions)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lp1_margin"] = self.reward_mc_mean - self.reward_bound
        d["lp2_margins"] = [f.bound - f.mc_mean for f in self.functions]
        d["lp1_violations"] = self.lp1_violations
        d["lp2_violations"] = self.lp2_violations
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def random_instance(spec: Prop1Instance, rng: np.random.Generator):
    X = rng.uniform(0.0, 1.0, (spec.N, spec.dim))
    w = rng.dirichlet(np.ones(spec.N))
    g = rng.normal(size=spec.N)
    q = np.ones(spec.N) if spec.q_mode == "ones" else rng.beta(2.0, 1.0, spec.N)
    if spec.landmarks == "all":
        X_nys = X
    else:
        X_nys = X[rng.choice(spec.N, size=spec.M, replace=False)]
    return X, w, g, q, X_nys


def verify_prop1(spec: Prop1Instance, trials: int = 1000, seed=None) -> Prop1Report:
    """Solve one random instance and compare Monte-Carlo estimates with both bounds.

    A bound is flagged violated only when the Monte-Carlo mean misses it by
    more than three standard errors.
    """
    if trials < 100:
        raise DomainError("verify_prop1 needs at least 100 trials")
    rng = np.random.default_rng(seed)
    kernel = KernelSpec.rbf(np.full(spec.dim, spec.lengthscale))
    X, w_rec, g, q, X_nys = random_instance(spec, rng)
    m = EmpiricalMeasure(X, w_rec)
    eps_rej = float(1.0 - w_rec @ q)
    eps_lp = eps_rej if spec.eps_lp is None else spec.eps_lp
    basis = nystrom_basis(kernel, X_nys, spec.n)
    phi = basis.test_functions(X)
    eps_nys = nystrom_error(basis, X, phi)
    k_max = float(np.sqrt(kernel.diag(X).max()))
    res = solve_lp(build_lp(m, basis, g, q, eps_lp, phi), spec.solver)
    bp = extract_batch(res, m, eps_nys, k_max)
    # the bounds concern the raw LP weights of the accepted points (no renormalisation)
    w_b = res.w[bp.indices]
    q_b, g_b = q[bp.indices], g[bp.indices]
    masks = rng.random((trials, len(bp))) < q_b[None, :]
    rewards = (masks * w_b) @ g_b
    bound1 = float(w_rec @ (g * q))
    se1 = float(rewards.std(ddof=1) / np.sqrt(trials))
    violated1 = bound1 - rewards.mean() > 3.0 * se1 + 1e-12

    report = Prop1Report(eps_lp, eps_rej, eps_nys, k_max, len(bp), bound1, res.objective,
                         float(rewards.mean()), se1, bool(violated1))
    slack = eps_rej * k_max + 2.0 * eps_nys + eps_lp
    for _ in range(spec.n_functions):
        Z = rng.uniform(0.0, 1.0, (spec.terms_per_function, spec.dim))
        a = rng.normal(size=spec.terms_per_function)
        norm = float(np.sqrt(max(a @ kernel(Z) @ a, 0.0)))
        f_rec = kernel(X, Z) @ a
        target = w_rec @ f_rec
        errs = np.abs((masks * w_b) @ f_rec[bp.indices] - target)
        se = float(errs.std(ddof=1) / np.sqrt(trials))
        bound = slack * norm
        report.functions.append(FunctionCheck(norm, float(errs.mean()), se, bound,
                                              bool(errs.mean() - bound > 3.0 * se + 1e-12)))
    return report
