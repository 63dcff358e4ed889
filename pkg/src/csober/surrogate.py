"""Gaussian-process surrogates for the objective and for black-box constraints.

Objective and continuous-constraint surrogates are exact GP regressors with
hyperparameters fitted by type-II maximum likelihood. Binary constraints use
a GP classifier with a probit link under the Laplace approximation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg, optimize
from scipy.linalg import lapack
from scipy.spatial.distance import cdist
from scipy.special import log_ndtr, ndtr

from .errors import CsoberError, DomainError, NumericalFailure, OracleError
from .kernels import JITTER, KernelFamily, KernelSpec, as_matrix

logger = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
MAX_JITTER = 1e-2
# Variance below which a Gaussian is treated as a point mass.
DEGENERATE_VAR = 1e-12

N_RESTARTS = 8
INIT_RANGE = (1e-2, 1e1)
LENGTHSCALE_BOUNDS = (1e-3, 1e3)
PROB_EPS = 1e-12  # keeps classifier probabilities strictly inside (0, 1)
OUTPUTSCALE_BOUNDS = (1e-2, 1e2)
NOISE_UPPER = 1e1


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = as_matrix(self.X) if len(self.X) else np.zeros((0, 0))
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.shape[0] != self.y.shape[0]:
            raise DomainError(f"|X|={self.X.shape[0]} but |y|={self.y.shape[0]}")

    def __len__(self) -> int:
        return self.y.shape[0]

    def extend(self, X, y) -> "Dataset":
        X = as_matrix(X)
        if len(self) == 0:
            return Dataset(X, y)
        return Dataset(np.vstack([self.X, X]), np.concatenate([self.y, np.asarray(y, dtype=float).ravel()]))


def _cholesky(K: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of K, escalating diagonal jitter up to ``MAX_JITTER * scale``."""
    extra = 0.0
    step = JITTER * scale
    while True:
        try:
            L = linalg.cholesky(K + extra * np.eye(K.shape[0]), lower=True, check_finite=False)
            return L, extra
        except linalg.LinAlgError:
            extra = step if extra == 0.0 else extra * 10.0
            if extra > MAX_JITTER * scale:
                raise NumericalFailure("Gram matrix is not positive definite even after jitter escalation")


def prob_above(mean, var, threshold=0.0) -> np.ndarray:
    """P(Z >= threshold) for Z ~ N(mean, var), with point-mass handling for tiny variance."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    out = np.where(mean >= threshold, 1.0, 0.0)
    ok = var >= DEGENERATE_VAR
    if np.any(ok):
        z = (mean - threshold) / np.sqrt(np.where(ok, var, 1.0))
        out = np.where(ok, ndtr(z), out)
    return out


class GpPosterior:
    """Exact GP posterior conditioned on a dataset, with fixed hyperparameters.

    Targets are standardised internally; `predict` returns values in the
    original units unless ``standardised=True``.
    """

    # set by fit_gp: optimal log-parameters and the log marginal likelihood there
    theta: np.ndarray | None = None
    lml: float | None = None

    def __init__(self, train: Dataset, kernel: KernelSpec, noise_var: float,
                 y_mean: float | None = None, y_std: float | None = None):
        if len(train) < 1:
            raise DomainError("GP needs at least one training point")
        self.train = train
        self.kernel = kernel
        self.noise_var = float(noise_var)
        if y_mean is None:
            y_mean = float(np.mean(train.y))
            y_std = float(np.std(train.y))
            if not y_std > 1e-12:
                y_std = 1.0
        self.y_mean = float(y_mean)
        self.y_std = float(y_std)
        self._z = (train.y - self.y_mean) / self.y_std
        K = kernel(train.X)
        K[np.diag_indices_from(K)] += self.noise_var + JITTER * kernel.outputscale
        self.chol, self.extra_jitter = _cholesky(K, kernel.outputscale)
        self.alpha = linalg.cho_solve((self.chol, True), self._z, check_finite=False)

    @property
    def X(self) -> np.ndarray:
        return self.train.X

    @property
    def outputscale(self) -> float:
        return self.kernel.outputscale

    def _solve_v(self, Xq: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Kqx = self.kernel(Xq, self.X)
        v = linalg.solve_triangular(self.chol, Kqx.T, lower=True, check_finite=False)
        return Kqx, v

    def predict(self, Xq, full_cov: bool = True, standardised: bool = False):
        """Predictive mean and covariance (or variance vector when ``full_cov`` is False)."""
        Xq = as_matrix(Xq)
        Kqx, v = self._solve_v(Xq)
        mean = Kqx @ self.alpha
        if full_cov:
            cov = self.kernel(Xq) - v.T @ v
            idx = np.diag_indices_from(cov)
            cov[idx] = np.maximum(cov[idx], 0.0)
        else:
            cov = np.maximum(self.kernel.diag(Xq) - np.einsum("ij,ij->j", v, v), 0.0)
        if standardised:
            return mean, cov
        return self.y_mean + self.y_std * mean, cov * self.y_std**2

    def mean(self, Xq, standardised: bool = False) -> np.ndarray:
        Xq = as_matrix(Xq)
        m = self.kernel(Xq, self.X) @ self.alpha
        return m if standardised else self.y_mean + self.y_std * m

    def variance(self, Xq, standardised: bool = False) -> np.ndarray:
        return self.predict(Xq, full_cov=False, standardised=standardised)[1]

    def covariance(self, X, Y=None) -> np.ndarray:
        """Posterior covariance C(X, Y) in standardised units."""
        X = as_matrix(X)
        vx = linalg.solve_triangular(self.chol, self.kernel(self.X, X), lower=True, check_finite=False)
        if Y is None:
            return self.kernel(X) - vx.T @ vx
        Y = as_matrix(Y)
        vy = linalg.solve_triangular(self.chol, self.kernel(self.X, Y), lower=True, check_finite=False)
        return self.kernel(X, Y) - vx.T @ vy

    @property
    def posterior_kernel(self) -> "PosteriorKernel":
        return PosteriorKernel(self)

    def condition_on(self, X_new, y_new) -> "GpPosterior":
        """Same hyperparameters and standardisation, extra observations appended."""
        return GpPosterior(self.train.extend(X_new, y_new), self.kernel, self.noise_var,
                           self.y_mean, self.y_std)


class PosteriorKernel:
    """The posterior covariance of a GP viewed as a kernel (standardised units)."""

    def __init__(self, gp: GpPosterior):
        self.gp = gp

    def __call__(self, X, Y=None) -> np.ndarray:
        return self.gp.covariance(X, Y)

    def diag(self, X) -> np.ndarray:
        return self.gp.variance(X, standardised=True)


# --------------------------------------------------------------------------
# Type-II maximum likelihood


def _unpack(theta: np.ndarray, family: KernelFamily):
    if family is KernelFamily.RBF:
        return np.exp(theta[:-2]), np.exp(theta[-2]), np.exp(theta[-1])
    return None, np.exp(theta[0]), np.exp(theta[1])


def log_marginal_likelihood(theta: np.ndarray, X: np.ndarray, z: np.ndarray, family: KernelFamily,
                            base: np.ndarray | None = None, eval_gradient: bool = True):
    """Log marginal likelihood of standardised targets and its gradient in log-parameters.

    ``theta`` holds log lengthscales (RBF only), log outputscale and log noise
    variance. ``base`` may carry the unit-outputscale Tanimoto Gram, which
    does not depend on ``theta``.
    """
    family = KernelFamily(family)
    ls, s, noise = _unpack(theta, family)
    n = X.shape[0]
    if family is KernelFamily.RBF:
        Xs = X / ls
        R = np.exp(-0.5 * cdist(Xs, Xs, "sqeuclidean"))
    else:
        R = KernelSpec.tanimoto()(X) if base is None else base
    K = s * R
    K[np.diag_indices(n)] += noise + JITTER * s
    try:
        L = linalg.cholesky(K, lower=True, check_finite=False)
    except linalg.LinAlgError:
        return (-np.inf, np.zeros_like(theta)) if eval_gradient else -np.inf
    alpha = linalg.cho_solve((L, True), z, check_finite=False)
    lml = -0.5 * z @ alpha - np.log(np.diag(L)).sum() - 0.5 * n * LOG_2PI
    if not eval_gradient:
        return lml
    Kinv, info = lapack.dpotri(L, lower=1)
    if info != 0:
        return -np.inf, np.zeros_like(theta)
    Kinv = np.tril(Kinv) + np.tril(Kinv, -1).T
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    Msr = W * (s * R)
    if family is KernelFamily.RBF:
        # dK/dlog(l_d) = s R (x_d - x'_d)^2 / l_d^2; for symmetric M,
        # sum_ij M_ij (x_id - x_jd)^2 = 2 (M 1) . x_d^2 - 2 x_d . M x_d
        quad = 2.0 * (Msr.sum(axis=1) @ X**2) - 2.0 * np.sum(X * (Msr @ X), axis=0)
        grad[:-2] = 0.5 * quad / ls**2
    grad[-2] = 0.5 * (np.sum(Msr) + JITTER * s * np.trace(W))
    grad[-1] = 0.5 * noise * np.trace(W)
    return lml, grad


def _bounds(family: KernelFamily, dim: int, noise_floor: float):
    b = []
    if family is KernelFamily.RBF:
        b += [tuple(np.log(LENGTHSCALE_BOUNDS))] * dim
    b.append(tuple(np.log(OUTPUTSCALE_BOUNDS)))
    b.append((np.log(noise_floor), np.log(max(NOISE_UPPER, noise_floor * 10))))
    return b


def fit_gp(data: Dataset, template: KernelSpec, noise_floor: float = 1e-6, restarts: int = N_RESTARTS,
           seed: int = 0, maxiter: int = 200, init_theta: np.ndarray | None = None) -> GpPosterior:
    """Fit kernel hyperparameters and noise by multi-start L-BFGS-B on the log marginal likelihood.

    ``template`` fixes the kernel family (and dimension for RBF); its
    hyperparameter values are ignored. ``init_theta`` adds one extra start
    (e.g. the previous optimum) on top of the random restarts.
    """
    if len(data) < 2:
        raise DomainError("fit_gp needs at least two observations")
    X = data.X
    family = template.family
    dim = X.shape[1]
    if family is KernelFamily.RBF and template.dim is not None and template.dim != dim:
        raise DomainError(f"data dimension {dim} does not match kernel dimension {template.dim}")
    mu = float(np.mean(data.y))
    sd = float(np.std(data.y))
    if not sd > 1e-12:
        sd = 1.0
    z = (data.y - mu) / sd

    base = KernelSpec.tanimoto()(X) if family is KernelFamily.TANIMOTO else None
    bounds = _bounds(family, dim, noise_floor)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    rng = np.random.default_rng(seed)
    starts = [np.clip(rng.uniform(*np.log(INIT_RANGE), size=len(bounds)), lo, hi) for _ in range(restarts)]
    if init_theta is not None:
        starts.append(np.clip(np.asarray(init_theta, dtype=float), lo, hi))

    def neg(theta):
        val, grad = log_marginal_likelihood(theta, X, z, family, base)
        if not np.isfinite(val):
            return 1e25, np.zeros_like(theta)
        return -val, -grad

    best = None
    for x0 in starts:
        res = optimize.minimize(neg, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": maxiter})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or best.fun >= 1e25:
        raise NumericalFailure("no restart produced a finite marginal likelihood")
    theta = best.x
    ls, s, noise = _unpack(theta, family)
    kernel = KernelSpec.rbf(ls, s) if family is KernelFamily.RBF else KernelSpec.tanimoto(s, dim)
    gp = GpPosterior(data, kernel, max(noise, noise_floor), mu, sd)
    gp.theta = theta
    gp.lml = -best.fun
    logger.debug("fit_gp: n=%d lml=%.4f outputscale=%.3g noise=%.3g", len(data), gp.lml, s, noise)
    return gp


def sample_posterior(gp: GpPosterior, Xq, count: int, seed=None) -> np.ndarray:
    """Joint posterior draws at ``Xq`` as a (count, |Xq|) matrix, original units."""
    if count < 1:
        raise DomainError("count must be >= 1")
    mean, cov = gp.predict(Xq, full_cov=True)
    return _gaussian_draws(mean, cov, count, seed)


def _gaussian_draws(mean: np.ndarray, cov: np.ndarray, count: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cov = 0.5 * (cov + cov.T)
    scale = max(float(np.mean(np.diag(cov))), 1e-300)
    extra = 1e-10 * scale
    while True:
        try:
            L = linalg.cholesky(cov + extra * np.eye(len(mean)), lower=True, check_finite=False)
            break
        except linalg.LinAlgError:
            extra *= 10.0
            if extra > MAX_JITTER * scale:
                try:
                    vals, vecs = linalg.eigh(cov)
                except linalg.LinAlgError as exc:
                    raise NumericalFailure("posterior covariance could not be factorised") from exc
                L = vecs * np.sqrt(np.clip(vals, 0.0, None))
                break
    eps = rng.standard_normal((count, len(mean)))
    return mean[None, :] + eps @ L.T


def rho_continuous(gp_c: GpPosterior, x) -> np.ndarray | float:
    """Probability that the latent constraint value is >= 0."""
    X = as_matrix(x)
    mean, var = gp_c.predict(X, full_cov=False)
    out = prob_above(mean, var)
    return float(out[0]) if _is_single(x) else out


def _is_single(x) -> bool:
    from .kernels import Point

    return isinstance(x, Point) or (isinstance(x, np.ndarray) and x.ndim == 1)


# --------------------------------------------------------------------------
# Binary constraints: GP classification with probit link, Laplace approximation


def _laplace_mode(K: np.ndarray, t: np.ndarray, tol: float = 1e-9, max_iter: int = 100):
    """Newton iterations for the posterior mode (t in {-1, +1})."""
    n = len(t)
    f = np.zeros(n)
    obj_old = -np.inf
    for _ in range(max_iter):
        logp = log_ndtr(t * f)
        ratio = np.exp(-0.5 * f**2 - 0.5 * LOG_2PI - logp)  # N(f) / Phi(t f)
        grad = t * ratio
        W = ratio**2 + t * f * ratio
        sW = np.sqrt(W)
        B = np.eye(n) + sW[:, None] * K * sW[None, :]
        try:
            L = linalg.cholesky(B, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalFailure("Laplace Newton system collapsed") from exc
        b = W * f + grad
        c = linalg.cho_solve((L, True), sW * (K @ b), check_finite=False)
        a = b - sW * c
        f = K @ a
        obj = -0.5 * a @ f + log_ndtr(t * f).sum()
        if abs(obj - obj_old) < tol:
            break
        obj_old = obj
    logp = log_ndtr(t * f)
    ratio = np.exp(-0.5 * f**2 - 0.5 * LOG_2PI - logp)
    grad = t * ratio
    W = ratio**2 + t * f * ratio
    sW = np.sqrt(W)
    L = linalg.cholesky(np.eye(n) + sW[:, None] * K * sW[None, :], lower=True, check_finite=False)
    a = linalg.cho_solve((L, True), sW * (K @ (W * f + grad)), check_finite=False)
    a = W * f + grad - sW * a
    approx_lml = -0.5 * a @ f + logp.sum() - np.log(np.diag(L)).sum()
    return f, grad, sW, L, approx_lml


class LaplaceClassifier:
    """Latent GP classifier state: posterior mode and Laplace curvature."""

    def __init__(self, X: np.ndarray, labels: np.ndarray, kernel: KernelSpec):
        self.X = X
        self.kernel = kernel
        self.t = np.where(labels > 0.5, 1.0, -1.0)
        K = kernel(X) + JITTER * kernel.outputscale * np.eye(len(X))
        self.f_hat, self.grad, self.sW, self.L, self.approx_lml = _laplace_mode(K, self.t)

    def latent(self, Xq, full_cov: bool = False):
        Xq = as_matrix(Xq)
        Kq = self.kernel(Xq, self.X)
        mean = Kq @ self.grad
        v = linalg.solve_triangular(self.L, self.sW[:, None] * Kq.T, lower=True, check_finite=False)
        if full_cov:
            cov = self.kernel(Xq) - v.T @ v
            return mean, cov
        return mean, np.maximum(self.kernel.diag(Xq) - np.einsum("ij,ij->j", v, v), 0.0)

    def prob(self, Xq) -> np.ndarray:
        # plug-in link at the latent mean: monotone in the mean, unlike the
        # variance-averaged probit, which drifts back to 1/2 where labels saturate
        mean, _ = self.latent(Xq)
        return np.clip(ndtr(mean), PROB_EPS, 1.0 - PROB_EPS)


def _fit_classifier(X, labels, template: KernelSpec, restarts: int, seed: int) -> LaplaceClassifier:
    family = template.family
    dim = X.shape[1]
    n_par = dim + 1 if family is KernelFamily.RBF else 1
    bounds = ([tuple(np.log(LENGTHSCALE_BOUNDS))] * (dim if family is KernelFamily.RBF else 0)
              + [tuple(np.log(OUTPUTSCALE_BOUNDS))])

    def build(theta):
        if family is KernelFamily.RBF:
            return KernelSpec.rbf(np.exp(theta[:-1]), np.exp(theta[-1]))
        return KernelSpec.tanimoto(np.exp(theta[0]), dim)

    def neg(theta):
        try:
            return -LaplaceClassifier(X, labels, build(theta)).approx_lml
        except CsoberError:
            return 1e25

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        x0 = rng.uniform(*np.log(INIT_RANGE), size=n_par)
        res = optimize.minimize(neg, x0, method="L-BFGS-B", bounds=bounds, options={"maxiter": 60})
        if best is None or res.fun < best.fun:
            best = res
    return LaplaceClassifier(X, labels, build(best.x))


# --------------------------------------------------------------------------
# Constraint models


class ConstraintModel:
    """Acceptance-probability evaluator for one constraint.

    ``threshold`` is the minimum allowable acceptance probability; ``ordered``
    marks constraints whose violation withholds the objective value.
    """

    flavour = "abstract"

    def __init__(self, threshold: float = 0.0, coupled: bool = True, ordered: bool = False,
                 name: str = ""):
        if not 0.0 <= threshold < 1.0:
            raise DomainError("threshold must lie in [0, 1)")
        self.threshold = float(threshold)
        self.coupled = coupled
        self.ordered = ordered
        self.name = name

    def rho(self, X) -> np.ndarray:
        raise NotImplementedError

    def sample_satisfied(self, X, rng: np.random.Generator, count: int = 1) -> np.ndarray:
        """Joint posterior draws of the satisfaction indicator at X, shape (count, |X|)."""
        raise NotImplementedError

    def hallucinate(self, X_new) -> "ConstraintModel":
        return self


class ContinuousConstraint(ConstraintModel):
    flavour = "continuous"

    def __init__(self, gp: GpPosterior, **kw):
        super().__init__(**kw)
        self.gp = gp

    def rho(self, X) -> np.ndarray:
        return rho_continuous(self.gp, as_matrix(X))

    def sample_satisfied(self, X, rng, count=1):
        return sample_posterior(self.gp, X, count, rng) >= 0.0

    def hallucinate(self, X_new):
        return ContinuousConstraint(hallucinate_gp(self.gp, X_new), threshold=self.threshold,
                                    coupled=self.coupled, ordered=self.ordered, name=self.name)


class BinaryConstraint(ConstraintModel):
    flavour = "binary"

    def __init__(self, classifier: LaplaceClassifier | None, constant: float | None = None, **kw):
        super().__init__(**kw)
        self.classifier = classifier
        self.constant = constant

    def rho(self, X) -> np.ndarray:
        X = as_matrix(X)
        if self.classifier is None:
            return np.full(X.shape[0], self.constant)
        return self.classifier.prob(X)

    def sample_satisfied(self, X, rng, count=1):
        X = as_matrix(X)
        if self.classifier is None:
            return np.repeat(rng.random((count, 1)) < self.constant, X.shape[0], axis=1)
        mean, cov = self.classifier.latent(X, full_cov=True)
        latent = _gaussian_draws(mean, cov, count, rng)
        return ndtr(latent) >= max(self.threshold, 0.5)


class CheapOracle(ConstraintModel):
    """Constraint evaluated directly by a cheap boolean black box."""

    flavour = "cheap"

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], **kw):
        super().__init__(**kw)
        self.fn = fn

    def rho(self, X) -> np.ndarray:
        X = as_matrix(X)
        try:
            ok = np.asarray(self.fn(X), dtype=bool).reshape(X.shape[0])
        except CsoberError:
            raise
        except Exception as exc:
            raise OracleError(f"cheap constraint {self.name!r} failed: {exc}") from exc
        return ok.astype(float)

    def sample_satisfied(self, X, rng, count=1):
        return np.repeat(self.rho(X)[None, :] > 0.5, count, axis=0)


def fit_binary_constraint(data: Dataset, template: KernelSpec | None = None, restarts: int = 3,
                          seed: int = 0, **kw) -> BinaryConstraint:
    """Laplace/probit GP classifier on {0,1} labels; one-class data degrade to a smoothed constant."""
    labels = np.asarray(data.y, dtype=float)
    if not np.all((labels == 0) | (labels == 1)):
        raise DomainError("binary constraint labels must be 0 or 1")
    n = len(labels)
    k = int(labels.sum())
    if k == 0 or k == n:
        return BinaryConstraint(None, constant=(k + 1) / (n + 2), **kw)
    if template is None:
        template = KernelSpec.rbf(np.ones(data.X.shape[1]))
    clf = _fit_classifier(data.X, labels, template, restarts, seed)
    return BinaryConstraint(clf, **kw)


def rho(cm: ConstraintModel, x) -> np.ndarray | float:
    """Acceptance probability of ``cm`` at a point (float) or at rows of an array."""
    out = cm.rho(as_matrix(x))
    return float(out[0]) if _is_single(x) else out


def hallucinate_gp(gp: GpPosterior, X_new) -> GpPosterior:
    """Condition on the GP's own predictive means at X_new, keeping hyperparameters."""
    X_new = as_matrix(X_new)
    if X_new.shape[0] == 0:
        raise DomainError("X_new must be nonempty")
    return gp.condition_on(X_new, gp.mean(X_new))
