import numpy as np
import pytest

from csober.errors import DegenerateMeasure, DomainError
from csober.kernels import KernelSpec
from csober.measure import (EmpiricalMeasure, PiDensity, build_measure, deweighted_resample, estimate_eta,
                            lfi_term, normalise_density, pi_density, rejection_rate, shrinkage_stats,
                            weighted_resample)
from csober.surrogate import CheapOracle, ConstraintModel, Dataset, GpPosterior, fit_gp


class FixedGp:
    """Objective posterior with hand-set moments (same at every query)."""

    def __init__(self, mean, var):
        self.m, self.v = float(mean), float(var)
        self.X = np.zeros((1, 1))

    def predict(self, X, full_cov=False):
        n = np.atleast_2d(X).shape[0]
        return np.full(n, self.m), np.full(n, self.v)

    def mean(self, X):
        return self.predict(X)[0]


class FixedRho(ConstraintModel):
    """Acceptance probabilities given per row (or one constant)."""

    def __init__(self, values, **kw):
        super().__init__(**kw)
        self.values = np.asarray(values, dtype=float)

    def rho(self, X):
        n = np.atleast_2d(X).shape[0]
        return np.broadcast_to(self.values, (n,)).copy() if self.values.ndim == 0 else self.values[:n].copy()


def test_lfi_symmetric_point():
    assert lfi_term(PiDensity(FixedGp(0.3, 2.0), eta=0.3), np.zeros(1)) == 0.5


def test_lfi_tail():
    assert lfi_term(PiDensity(FixedGp(-10.0, 1.0), eta=0.0), np.zeros(1)) <= 1e-15


def test_lfi_matches_cdf_oracle():
    # (m, eta, C) -> Phi((m - eta) / sqrt(C)), mpmath at 30 digits
    cases = [((0.5, 0.0, 1.0), 0.6914624612740131), ((1.0, 2.0, 0.25), 0.02275013194817921),
             ((-0.3, -0.1, 0.04), 0.15865525393145707), ((3.0, 1.0, 9.0), 0.7475074624530771),
             ((0.0, 0.7, 2.0), 0.3103089732188449)]
    for (m, eta, C), ref in cases:
        assert abs(lfi_term(PiDensity(FixedGp(m, C), eta=eta), np.zeros(1)) - ref) <= 1e-6


def test_lfi_requires_eta():
    with pytest.raises(DomainError):
        lfi_term(PiDensity(FixedGp(0, 1)), np.zeros(1))


def test_pi_density_hand_product():
    pd = PiDensity(FixedGp(0.0, 1.0), eta=0.0,
                   constraints=[FixedRho(0.9, threshold=0.5), FixedRho(0.6, threshold=0.5)])
    assert pi_density(pd, np.zeros(1)) == pytest.approx(0.02, abs=1e-15)


def test_pi_density_cheap_violation_and_empty_product():
    gp = FixedGp(0.2, 1.0)
    pd = PiDensity(gp, eta=0.0, constraints=[CheapOracle(lambda X: X[:, 0] > 0)])
    assert pi_density(pd, np.array([-1.0])) == 0.0
    bare = PiDensity(gp, eta=0.0)
    X = np.linspace(-1, 1, 5)[:, None]
    np.testing.assert_array_equal(pi_density(bare, X), lfi_term(bare, X))


def test_pi_density_clamps_at_threshold():
    pd = PiDensity(FixedGp(0.0, 1.0), eta=0.0, constraints=[FixedRho(0.3, threshold=0.3)])
    assert pi_density(pd, np.zeros(1)) == 0.0


def test_eta_noiseless_pool_equals_max(rng):
    X = rng.random((8, 1))
    y = np.cos(4 * X[:, 0])
    gp = fit_gp(Dataset(X, y), KernelSpec.rbf([1.0]), noise_floor=1e-6)
    pd = PiDensity(gp)
    assert estimate_eta(pd, X) == pytest.approx(y.max(), abs=1e-3)
    more = np.vstack([X, rng.random((20, 1))])
    assert estimate_eta(pd, more) >= estimate_eta(pd, X)


def test_eta_grid_oracle(rng):
    X = rng.random((6, 1))
    gp = GpPosterior(Dataset(X, np.sin(5 * X[:, 0])), KernelSpec.rbf([0.3]), noise_var=1e-4)
    grid = np.linspace(0, 1, 301)[:, None]
    scan = max(max(gp.mean(g[None, :])[0] for g in grid), max(gp.mean(x[None, :])[0] for x in X))
    assert estimate_eta(PiDensity(gp), grid) == pytest.approx(scan, abs=1e-12)


def test_build_measure_examples():
    X = np.arange(3.0)[:, None]
    pd = PiDensity(FixedGp(0.0, 1.0), eta=0.0)
    np.testing.assert_allclose(build_measure(pd, X).w, np.full(3, 1 / 3))
    pd.constraints = [FixedRho([0.0, 1.0, 0.0])]
    np.testing.assert_allclose(build_measure(pd, X).w, [0.0, 1.0, 0.0])
    np.testing.assert_allclose(normalise_density(np.array([2.0, 1.0, 1.0])), [0.5, 0.25, 0.25])


def test_build_measure_fallbacks():
    X = np.arange(4.0)[:, None]
    pd = PiDensity(FixedGp(0.0, 1.0), eta=0.0, constraints=[FixedRho(0.0)])
    np.testing.assert_allclose(build_measure(pd, X).w, np.full(4, 0.25))  # LFI-only
    np.testing.assert_allclose(normalise_density(np.zeros(3), [np.zeros(3)]), np.full(3, 1 / 3))
    tiny = np.array([1e-310, 3e-310])
    np.testing.assert_allclose(normalise_density(tiny, [np.array([1.0, 1.0])]), [0.5, 0.5])


def test_measure_validation():
    with pytest.raises(DomainError):
        EmpiricalMeasure(np.zeros((2, 1)), [0.5, 0.6])
    with pytest.raises(DomainError):
        EmpiricalMeasure(np.zeros((2, 1)), [1.5, -0.5])


def test_deweighted_uniform_multinomial():
    N, M = 10, 10_000
    m = EmpiricalMeasure(np.arange(N, dtype=float)[:, None], np.full(N, 1 / N))
    counts = np.bincount(deweighted_resample(m, M, seed=0), minlength=N)
    sigma = np.sqrt(M * 0.1 * 0.9)
    assert np.all(np.abs(counts - M / N) <= 3 * sigma)


def test_deweighted_inverse_frequencies():
    m = EmpiricalMeasure(np.arange(3.0)[:, None], [0.5, 0.25, 0.25])
    freq = np.bincount(deweighted_resample(m, 50_000, seed=1), minlength=3) / 50_000
    # 1/w = (2, 4, 4) -> (0.2, 0.4, 0.4)
    np.testing.assert_allclose(freq, [0.2, 0.4, 0.4], atol=0.01)


def test_resample_single_support_and_determinism():
    m = EmpiricalMeasure(np.arange(4.0)[:, None], [0.0, 1.0, 0.0, 0.0])
    assert set(deweighted_resample(m, 100, seed=3)) == {1}
    assert set(weighted_resample(m, 100, seed=3)) == {1}
    u = EmpiricalMeasure(np.arange(4.0)[:, None], np.full(4, 0.25))
    np.testing.assert_array_equal(deweighted_resample(u, 50, seed=7), deweighted_resample(u, 50, seed=7))


def test_resample_errors():
    z = EmpiricalMeasure(np.zeros((2, 1)), [0.0, 0.0], normalised=False)
    with pytest.raises(DegenerateMeasure):
        deweighted_resample(z, 3)
    with pytest.raises(DegenerateMeasure):
        weighted_resample(z, 3)
    with pytest.raises(DomainError):
        deweighted_resample(EmpiricalMeasure(np.zeros((1, 1)), [1.0]), 0)


def test_weighted_resample_frequencies():
    m = EmpiricalMeasure(np.arange(3.0)[:, None], [0.5, 0.3, 0.2])
    freq = np.bincount(weighted_resample(m, 50_000, seed=2), minlength=3) / 50_000
    np.testing.assert_allclose(freq, [0.5, 0.3, 0.2], atol=0.01)


def test_rejection_rate_examples():
    m = EmpiricalMeasure(np.zeros((2, 1)), [0.5, 0.5])
    assert rejection_rate(m, [FixedRho(1.0)]) == 0.0
    assert rejection_rate(m, [FixedRho(0.0)]) == 1.0
    assert rejection_rate(m, [FixedRho([1.0, 0.6])]) == pytest.approx(0.2, abs=1e-15)
    assert rejection_rate(m, []) == 0.0


def test_shrinkage_examples():
    point = shrinkage_stats(EmpiricalMeasure(np.array([[0.3, 0.7]]), [1.0]))
    assert point.variance == 0.0
    np.testing.assert_array_equal(point.mean, [0.3, 0.7])
    two = shrinkage_stats(EmpiricalMeasure(np.array([[0.0], [1.0]]), [0.5, 0.5]), x_star=np.array([0.5]))
    assert two.mean[0] == 0.5
    assert two.variance == pytest.approx(0.25)
    assert two.mean_distance == 0.0
