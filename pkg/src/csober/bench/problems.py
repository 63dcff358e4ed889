"""Synthetic constrained benchmarks with oracle semantics.

Objectives are written in the maximisation convention used internally by the
optimiser. Every constraint is described by a latent value (continuous
constraints, satisfied iff the value is >= 0) or a {0,1} label (binary
constraints, satisfied iff 1), plus the tags that decide how the loop may
query it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..errors import ConfigError, DomainError, OracleError
from ..kernels import KernelSpec, as_matrix


@dataclass(frozen=True)
class ConstraintTags:
    """Attributes of a constraint that decide how it is queried and modelled."""

    kind: str = "continuous"        # "continuous" or "binary"
    coupled: bool = True
    ordered: bool = False
    deterministic: bool = True
    cheap: bool = False

    def __post_init__(self):
        if self.kind not in ("continuous", "binary"):
            raise DomainError(f"unknown constraint kind {self.kind!r}")


@dataclass
class ConstraintOracle:
    name: str
    fn: Callable[[np.ndarray, np.ndarray | None], np.ndarray]
    tags: ConstraintTags = field(default_factory=ConstraintTags)

    def values(self, X, idx=None) -> np.ndarray:
        """Latent values (continuous) or {0,1} labels (binary) at the rows of X."""
        X = as_matrix(X)
        return np.asarray(self.fn(X, idx), dtype=float).reshape(X.shape[0])

    def satisfied(self, X, idx=None) -> np.ndarray:
        v = self.values(X, idx)
        return v >= 0.0 if self.tags.kind == "continuous" else v > 0.5


@dataclass
class Problem:
    """A black-box problem over a box (continuous plus binary) or over a finite pool.

    ``objective`` maps (X, pool indices or None) to values to be maximised.
    ``optimum`` is the best feasible objective value when known.
    """

    name: str
    n_continuous: int
    n_binary: int
    objective: Callable[[np.ndarray, np.ndarray | None], np.ndarray]
    constraints: list[ConstraintOracle]
    bounds: np.ndarray | None = None
    pool: np.ndarray | None = None
    optimum: float | None = None
    x_star: np.ndarray | None = None
    kernel_family: str = "rbf"
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.n_continuous + self.n_binary

    @property
    def is_pool(self) -> bool:
        return self.pool is not None

    @property
    def has_ordered(self) -> bool:
        return any(c.tags.ordered for c in self.constraints)

    def kernel_template(self) -> KernelSpec:
        if self.kernel_family == "tanimoto":
            return KernelSpec.tanimoto(1.0, self.dim)
        return KernelSpec.rbf(np.ones(self.dim))

    def reference_kernel(self) -> KernelSpec:
        """Fixed kernel used for batch diversity metrics, identical across methods."""
        if self.kernel_family == "tanimoto":
            return KernelSpec.tanimoto(1.0, self.dim)
        ls = np.ones(self.dim)
        if self.bounds is not None:
            ls[: self.n_continuous] = 0.2 * (self.bounds[:, 1] - self.bounds[:, 0])
        return KernelSpec.rbf(ls)

    def sample(self, count: int, rng: np.random.Generator):
        """Draws from the prior: (X, pool indices or None). Pool draws are without replacement."""
        if self.is_pool:
            idx = rng.choice(len(self.pool), size=min(count, len(self.pool)), replace=False)
            return self.pool[idx], idx
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        cont = lo + (hi - lo) * rng.random((count, self.n_continuous))
        bits = (rng.random((count, self.n_binary)) < 0.5).astype(float)
        return np.hstack([cont, bits]), None

    def feasible(self, X, idx=None) -> np.ndarray:
        X = as_matrix(X)
        ok = np.ones(X.shape[0], dtype=bool)
        for c in self.constraints:
            ok &= c.satisfied(X, idx)
        return ok

    def ordered_feasible(self, X, idx=None) -> np.ndarray:
        X = as_matrix(X)
        ok = np.ones(X.shape[0], dtype=bool)
        for c in self.constraints:
            if c.tags.ordered:
                ok &= c.satisfied(X, idx)
        return ok

    def query_objective(self, X, idx=None) -> np.ndarray:
        """Objective oracle; refuses any point failing an ordered constraint."""
        X = as_matrix(X)
        if not np.all(self.ordered_feasible(X, idx)):
            raise OracleError("objective withheld: an ordered constraint is violated")
        return np.asarray(self.objective(X, idx), dtype=float).reshape(X.shape[0])


# --------------------------------------------------------------------------
# Ackley over 3 continuous and 20 binary inputs

ACKLEY_A = 20.0
ACKLEY_B = 0.2
ACKLEY_C = 2.0 * np.pi
ACKLEY_CONT = 3
ACKLEY_BIN = 20


def ackley(X) -> np.ndarray:
    """Ackley function (minimum 0 at the origin) over all columns of X."""
    X = as_matrix(X)
    d = X.shape[1]
    r = np.sqrt(np.sum(X**2, axis=1) / d)
    s = np.sum(np.cos(ACKLEY_C * X), axis=1) / d
    return -ACKLEY_A * np.exp(-ACKLEY_B * r) - np.exp(s) + ACKLEY_A + np.e


def ackley_mixed(ordered: bool = False) -> Problem:
    """Negated Ackley on [-1, 1]^3 x {0, 1}^20 with constraints x1 >= 0 and x2 >= 0.

    The constraints are cheap and unordered. With ``ordered=True`` they are
    re-tagged ordered and expensive, so their values are only learnt from
    queries and a violation withholds the objective.
    """
    tags = ConstraintTags("continuous", coupled=True, ordered=ordered, deterministic=True, cheap=not ordered)
    cons = [ConstraintOracle("x1>=0", lambda X, idx: X[:, 0], tags),
            ConstraintOracle("x2>=0", lambda X, idx: X[:, 1], tags)]
    bounds = np.tile([-1.0, 1.0], (ACKLEY_CONT, 1))
    return Problem(
        name="ackley_mixed_ordered" if ordered else "ackley_mixed",
        n_continuous=ACKLEY_CONT, n_binary=ACKLEY_BIN,
        objective=lambda X, idx: -ackley(X),
        constraints=cons, bounds=bounds, optimum=0.0,
        x_star=np.zeros(ACKLEY_CONT + ACKLEY_BIN),
    )


# --------------------------------------------------------------------------
# Hartmann 6

HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
HARTMANN_A = np.array([
    [10, 3, 17, 3.5, 1.7, 8],
    [0.05, 10, 17, 0.1, 8, 14],
    [3, 3.5, 1.7, 10, 17, 8],
    [17, 8, 0.05, 10, 0.1, 14],
])
HARTMANN_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])
HARTMANN_MAX = 3.32237
HARTMANN_XSTAR = np.array([0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573])


def hartmann(X) -> np.ndarray:
    """Hartmann-6 in its usual sign (minimum -3.32237)."""
    X = as_matrix(X)
    inner = np.einsum("ij,nij->ni", HARTMANN_A, (X[:, None, :] - HARTMANN_P[None]) ** 2)
    return -np.exp(-inner) @ HARTMANN_ALPHA


def hartmann6() -> Problem:
    """Negated Hartmann-6 on [0, 1]^6 with cheap unordered constraints 0.15 <= sum(x) <= 3."""
    tags = ConstraintTags("continuous", coupled=True, ordered=False, deterministic=True, cheap=True)
    cons = [ConstraintOracle("sum>=0.15", lambda X, idx: X.sum(axis=1) - 0.15, tags),
            ConstraintOracle("sum<=3", lambda X, idx: 3.0 - X.sum(axis=1), tags)]
    return Problem(
        name="hartmann6", n_continuous=6, n_binary=0,
        objective=lambda X, idx: -hartmann(X),
        constraints=cons, bounds=np.tile([0.0, 1.0], (6, 1)),
        optimum=HARTMANN_MAX, x_star=HARTMANN_XSTAR.copy(),
    )


# --------------------------------------------------------------------------
# Synthetic pool of binary fingerprints with ordered constraints

POOL_SIZE = 2000
POOL_BITS = 64


def _tanimoto_to(X: np.ndarray, x: np.ndarray) -> np.ndarray:
    xy = X @ x
    return xy / (X.sum(axis=1) + x.sum() - xy)


def synthetic_ordered_pool(seed: int = 0) -> Problem:
    """2000 random 64-bit fingerprints with two ordered constraints and a planted optimum.

    Objective: Tanimoto similarity to a planted fingerprint minus a penalty on
    the distance of the bit count from the planted count. Constraint 1 is a
    binary label drawn from a hidden logistic model of the bits under a mask;
    constraint 2 is a deterministic continuous cap on the bits under another
    mask. Both are ordered. The feasible optimum is found by exhaustive scan.
    """
    rng = np.random.default_rng(seed)
    density = rng.uniform(0.15, 0.5, POOL_SIZE)
    pool = (rng.random((POOL_SIZE, POOL_BITS)) < density[:, None]).astype(float)
    empty = pool.sum(axis=1) == 0
    pool[empty, rng.integers(0, POOL_BITS, empty.sum())] = 1.0
    star = int(rng.integers(POOL_SIZE))
    x_p = pool[star].copy()
    k_p = x_p.sum()

    def objective(X, idx=None):
        X = as_matrix(X)
        return 2.0 * _tanimoto_to(X, x_p) - 0.5 * ((X.sum(axis=1) - k_p) / 16.0) ** 2

    # deterministic cap on the bits under mask B
    mask_b = np.zeros(POOL_BITS)
    mask_b[rng.choice(POOL_BITS, 16, replace=False)] = 1.0
    cap = max(float(np.quantile(pool @ mask_b, 0.85)), float(x_p @ mask_b))

    def cap_value(X, idx=None):
        return cap - as_matrix(X) @ mask_b

    # logistic acceptance on the bits under mask A; the offset is calibrated so
    # that about 40% of the pool is infeasible overall
    mask_a = np.zeros(POOL_BITS)
    mask_a[rng.choice(POOL_BITS, 16, replace=False)] = 1.0
    slope = 1.5
    u = rng.random(POOL_SIZE)
    u[star] = 0.0
    count_a = pool @ mask_a
    capped = cap_value(pool) >= 0

    def infeasible_frac(off):
        return 1.0 - np.mean(capped & (u < 1.0 / (1.0 + np.exp(slope * (count_a - off)))))

    offsets = np.arange(0.0, 16.01, 0.25)
    offset = float(offsets[np.argmin([abs(infeasible_frac(o) - 0.4) for o in offsets])])

    def p_accept(X):
        return 1.0 / (1.0 + np.exp(slope * (as_matrix(X) @ mask_a - offset)))

    def binary_label(X, idx):
        if idx is None:
            raise OracleError("the pool constraint is only defined on pool members")
        return (u[np.asarray(idx)] < p_accept(X)).astype(float)

    cons = [
        ConstraintOracle("hidden-logistic", binary_label,
                         ConstraintTags("binary", coupled=True, ordered=True, deterministic=False, cheap=False)),
        ConstraintOracle("bit-cap", cap_value,
                         ConstraintTags("continuous", coupled=True, ordered=True, deterministic=True, cheap=False)),
    ]
    all_idx = np.arange(POOL_SIZE)
    feasible = (u < p_accept(pool)) & (cap_value(pool) >= 0)
    frac = 1.0 - feasible.mean()
    if not 0.3 <= frac <= 0.5:
        raise ConfigError(f"pool infeasible fraction {frac:.3f} outside [0.3, 0.5] for seed {seed}")
    if not feasible[star]:
        raise ConfigError("planted optimum is infeasible")
    f = objective(pool, all_idx)
    best = int(np.flatnonzero(feasible)[np.argmax(f[feasible])])
    return Problem(
        name="synthetic_ordered_pool", n_continuous=0, n_binary=POOL_BITS,
        objective=objective, constraints=cons, pool=pool,
        optimum=float(f[best]), x_star=pool[best].copy(), kernel_family="tanimoto", seed=seed,
    )


PROBLEMS: dict[str, Callable[..., Problem]] = {
    "ackley_mixed": lambda seed=0: ackley_mixed(False),
    "ackley_mixed_ordered": lambda seed=0: ackley_mixed(True),
    "hartmann6": lambda seed=0: hartmann6(),
    "synthetic_ordered_pool": lambda seed=0: synthetic_ordered_pool(seed),
}


def get_problem(name: str, seed: int = 0) -> Problem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ConfigError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(seed)
