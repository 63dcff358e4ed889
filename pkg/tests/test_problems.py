import numpy as np
import pytest

from csober.bench.problems import (ACKLEY_A, ACKLEY_B, ACKLEY_C, HARTMANN_A, HARTMANN_ALPHA, HARTMANN_MAX,
                                   HARTMANN_XSTAR, PROBLEMS, ConstraintTags, ackley, ackley_mixed, get_problem,
                                   hartmann, hartmann6, synthetic_ordered_pool)
from csober.errors import ConfigError, DomainError, OracleError
from csober.kernels import KernelFamily


def test_ackley_constants():
    assert (ACKLEY_A, ACKLEY_C) == (20.0, 2 * np.pi)
    assert ACKLEY_B == 0.2
    assert ackley_mixed().dim == 23


def test_ackley_optimum_and_reference_value():
    p = ackley_mixed()
    assert p.objective(np.zeros((1, 23)), None)[0] == pytest.approx(0.0, abs=1e-12)
    assert p.optimum == 0.0
    # all coordinates 1: 20 + e - 20 exp(-0.2) - e^{cos(2 pi)} = 20 (1 - exp(-0.2))
    assert ackley(np.ones((1, 23)))[0] == pytest.approx(20 * (1 - np.exp(-0.2)), abs=1e-12)


def test_ackley_constraints():
    p = ackley_mixed()
    x = np.zeros((1, 23))
    x[0, 0] = -0.5
    assert not p.feasible(x)[0]
    assert p.feasible(np.zeros((1, 23)))[0]
    assert all(c.tags.cheap and not c.tags.ordered for c in p.constraints)
    q = ackley_mixed(ordered=True)
    assert all(c.tags.ordered and not c.tags.cheap for c in q.constraints)
    np.testing.assert_array_equal(q.constraints[1].values(np.array([x[0] + 0.3]), None), [0.3])


def test_ordered_objective_refuses_violations():
    q = ackley_mixed(ordered=True)
    x = np.zeros((1, 23))
    x[0, 1] = -0.1
    with pytest.raises(OracleError):
        q.query_objective(x)
    assert q.query_objective(np.zeros((1, 23)))[0] == pytest.approx(0.0)


def test_ackley_sampling_domain(rng):
    X, idx = ackley_mixed().sample(500, rng)
    assert idx is None
    assert np.all(np.abs(X[:, :3]) <= 1)
    assert set(np.unique(X[:, 3:])) <= {0.0, 1.0}


def test_hartmann_constants():
    np.testing.assert_array_equal(HARTMANN_ALPHA, [1.0, 1.2, 3.0, 3.2])
    np.testing.assert_array_equal(HARTMANN_A[0], [10, 3, 17, 3.5, 1.7, 8])


def test_hartmann_optimum():
    p = hartmann6()
    val = p.objective(HARTMANN_XSTAR[None, :], None)[0]
    assert val == pytest.approx(HARTMANN_MAX, abs=1e-4)
    assert hartmann(HARTMANN_XSTAR[None, :])[0] == pytest.approx(-HARTMANN_MAX, abs=1e-4)
    assert p.feasible(HARTMANN_XSTAR[None, :])[0]


def test_hartmann_constraints():
    p = hartmann6()
    assert not p.feasible(np.full((1, 6), 0.01))[0]
    assert p.feasible(np.full((1, 6), 0.3))[0]
    assert p.kernel_template().family is KernelFamily.RBF


def test_pool_construction():
    p = synthetic_ordered_pool(0)
    assert p.pool.shape == (2000, 64)
    assert p.kernel_template().family is KernelFamily.TANIMOTO
    idx = np.arange(2000)
    feasible = p.feasible(p.pool, idx)
    assert 0.3 <= 1 - feasible.mean() <= 0.5
    # exhaustive scan oracle for the feasible optimum
    f = p.objective(p.pool, idx)
    assert p.optimum == pytest.approx(f[feasible].max())
    assert p.optimum == pytest.approx(2.0)   # the planted point has similarity 1 and no penalty
    assert all(c.tags.ordered for c in p.constraints)
    kinds = sorted((c.tags.kind, c.tags.deterministic) for c in p.constraints)
    assert kinds == [("binary", False), ("continuous", True)]


def test_pool_oracles_pure():
    p = synthetic_ordered_pool(3)
    idx = np.arange(50)
    a = p.constraints[0].values(p.pool[idx], idx)
    b = p.constraints[0].values(p.pool[idx], idx)
    np.testing.assert_array_equal(a, b)
    with pytest.raises(OracleError):
        p.constraints[0].values(p.pool[:2], None)


def test_pool_sampling_uses_indices(rng):
    p = synthetic_ordered_pool(1)
    X, idx = p.sample(10, rng)
    np.testing.assert_array_equal(X, p.pool[idx])


def test_registry():
    assert set(PROBLEMS) == {"ackley_mixed", "ackley_mixed_ordered", "hartmann6", "synthetic_ordered_pool"}
    with pytest.raises(ConfigError):
        get_problem("branin")


def test_tags_validation():
    with pytest.raises(DomainError):
        ConstraintTags("ternary")
