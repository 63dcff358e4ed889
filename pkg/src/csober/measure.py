"""Feasibility-weighted empirical measures.

The target density combines a probability-of-improvement term from the
objective GP with clamped acceptance probabilities of every constraint. A
candidate set is turned into a normalised weighted point set, from which the
Nystrom landmarks are resampled and the expected rejection rate estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateMeasure, DomainError
from .kernels import as_matrix
from .surrogate import ConstraintModel, GpPosterior, _is_single, prob_above

# Total raw mass below which the density is considered identically zero.
MASS_FLOOR = 1e-300


@dataclass
class EmpiricalMeasure:
    X: np.ndarray
    w: np.ndarray
    normalised: bool = True
    # row indices into an external pool, when the points come from one
    pool_index: np.ndarray | None = None

    def __post_init__(self):
        self.X = as_matrix(self.X)
        self.w = np.asarray(self.w, dtype=float).ravel()
        if self.X.shape[0] != self.w.shape[0]:
            raise DomainError("points and weights differ in length")
        if np.any(self.w < 0):
            raise DomainError("weights must be nonnegative")
        if self.normalised and abs(self.w.sum() - 1.0) > 1e-10:
            raise DomainError(f"normalised measure sums to {self.w.sum()!r}")

    def __len__(self) -> int:
        return self.w.shape[0]

    def subset(self, idx) -> "EmpiricalMeasure":
        pool = None if self.pool_index is None else self.pool_index[idx]
        return EmpiricalMeasure(self.X[idx], self.w[idx], normalised=False, pool_index=pool)


@dataclass
class PiDensity:
    gp: GpPosterior
    eta: float | None = None
    constraints: Sequence[ConstraintModel] = field(default_factory=list)

    def acceptance(self, X) -> np.ndarray:
        """Product of constraint acceptance probabilities (1 when unconstrained)."""
        X = as_matrix(X)
        q = np.ones(X.shape[0])
        for c in self.constraints:
            q *= c.rho(X)
        return q


def lfi_term(pd: PiDensity, x) -> np.ndarray | float:
    """Probability that the objective exceeds the incumbent GP maximum ``eta``."""
    if pd.eta is None:
        raise DomainError("eta must be set before evaluating the density")
    mean, var = pd.gp.predict(as_matrix(x), full_cov=False)
    out = prob_above(mean, var, pd.eta)
    return float(out[0]) if _is_single(x) else out


def pi_density(pd: PiDensity, x) -> np.ndarray | float:
    """LFI term times the clamped margins ``max(rho - threshold, 0)`` of every constraint."""
    X = as_matrix(x)
    out = lfi_term(pd, X)
    for c in pd.constraints:
        out = out * np.maximum(c.rho(X) - c.threshold, 0.0)
    return float(out[0]) if _is_single(x) else out


def estimate_eta(pd: PiDensity, pool) -> float:
    """Largest GP predictive mean over ``pool`` and the objective training inputs."""
    pool = as_matrix(pool)
    if pool.shape[0] == 0:
        raise DomainError("pool must be nonempty")
    X = np.vstack([pool, pd.gp.X])
    return float(np.max(pd.gp.mean(X)))


def normalise_density(dens: np.ndarray, fallbacks: Sequence[np.ndarray] = ()) -> np.ndarray:
    """Normalise raw densities, walking down ``fallbacks`` and finally to uniform when mass vanishes."""
    for cand in (dens, *fallbacks):
        cand = np.clip(np.asarray(cand, dtype=float), 0.0, None)
        peak = cand.max() if cand.size else 0.0
        if peak > 0 and cand.sum() >= MASS_FLOOR:
            # dividing by the peak first keeps the sum representable
            scaled = cand / peak
            return scaled / scaled.sum()
    return np.full(len(dens), 1.0 / len(dens))


def build_measure(pd: PiDensity, candidates, pool_index=None) -> EmpiricalMeasure:
    """Weights proportional to the density over ``candidates`` (LFI-only, then uniform fallback)."""
    X = as_matrix(candidates)
    if X.shape[0] == 0:
        raise DomainError("candidates must be nonempty")
    lfi = lfi_term(pd, X)
    dens = lfi.copy()
    for c in pd.constraints:
        dens *= np.maximum(c.rho(X) - c.threshold, 0.0)
    w = normalise_density(dens, [lfi])
    return EmpiricalMeasure(X, w, pool_index=None if pool_index is None else np.asarray(pool_index))


def deweighted_resample(m: EmpiricalMeasure, M: int, seed=None) -> np.ndarray:
    """Indices of M draws with replacement, probability proportional to 1/w over positive weights."""
    if M < 1:
        raise DomainError("M must be >= 1")
    pos = m.w > 0
    if not np.any(pos):
        raise DegenerateMeasure("measure has no positive weight")
    inv = np.zeros_like(m.w)
    # scale by the smallest positive weight so the inverse stays finite
    inv[pos] = m.w[pos].min() / m.w[pos]
    rng = np.random.default_rng(seed)
    return rng.choice(len(m), size=M, replace=True, p=inv / inv.sum())


def weighted_resample(m: EmpiricalMeasure, M: int, seed=None) -> np.ndarray:
    """Indices of M draws with replacement, probability proportional to w."""
    if M < 1:
        raise DomainError("M must be >= 1")
    if not np.any(m.w > 0):
        raise DegenerateMeasure("measure has no positive weight")
    rng = np.random.default_rng(seed)
    return rng.choice(len(m), size=M, replace=True, p=m.w / m.w.sum())


def rejection_rate(m: EmpiricalMeasure, constraints: Sequence[ConstraintModel]) -> float:
    """Expected fraction rejected: one minus the measure-average of the acceptance product."""
    if not constraints:
        return 0.0
    q = np.ones(len(m))
    for c in constraints:
        q *= c.rho(m.X)
    return float(np.clip(1.0 - m.w @ q, 0.0, 1.0))


@dataclass(frozen=True)
class ShrinkageStats:
    mean: np.ndarray
    variance: float
    mean_distance: float | None


def shrinkage_stats(m: EmpiricalMeasure, x_star=None, columns: slice | None = None) -> ShrinkageStats:
    """Weighted mean, total weighted variance and distance of the mean to ``x_star``.

    ``columns`` restricts the statistics to a block of coordinates (e.g. the
    continuous ones of a mixed domain).
    """
    X = m.X if columns is None else m.X[:, columns]
    w = m.w / m.w.sum()
    mean = w @ X
    var = float(w @ np.sum((X - mean) ** 2, axis=1))
    dist = None
    if x_star is not None:
        xs = as_matrix(x_star)[0]
        if columns is not None:
            xs = xs[columns]
        dist = float(np.linalg.norm(xs - mean))
    return ShrinkageStats(mean, var, dist)
