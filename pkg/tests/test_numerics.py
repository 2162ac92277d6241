import math

import numpy as np
import pytest

from nardf.errors import DomainError, NumericError
from nardf.numerics import (
    BITS_PER_NAT,
    RngStream,
    binary_entropy,
    bisect_monotone,
    cubic_positive_root,
    maximize_concave_1d,
    perron_eigenvalue,
    sym_eig,
)


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.1) == pytest.approx(0.46899559358928817, abs=1e-12)
    # symmetry
    for q in (0.03, 0.2, 0.41):
        assert binary_entropy(q) == pytest.approx(binary_entropy(1 - q), abs=1e-15)


def test_binary_entropy_vectorized_and_domain():
    q = np.array([0.0, 0.25, 0.5, 1.0])
    h = binary_entropy(q)
    assert h.shape == q.shape
    assert h[2] == 1.0
    assert isinstance(binary_entropy(0.3), float)
    with pytest.raises(DomainError):
        binary_entropy(-1e-9)
    with pytest.raises(DomainError):
        binary_entropy(np.array([0.2, 1.1]))


def test_sym_eig_ordering_and_reconstruction():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 5):
        for _ in range(20):
            X = rng.standard_normal((n, n))
            M = X + X.T
            w, E = sym_eig(M)
            assert np.all(np.diff(w) <= 1e-12)  # descending
            # rows of E are eigenvectors: M = E^t diag(w) E
            rec = E.T @ (w[:, None] * E)
            assert np.max(np.abs(rec - M)) < 1e-10 * max(1.0, np.abs(M).max())
            assert np.max(np.abs(E @ E.T - np.eye(n))) < 1e-10


def test_sym_eig_rejects_asymmetry():
    with pytest.raises(DomainError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_sym_eig_sign_convention_deterministic():
    M = np.diag([3.0, 1.0])
    w, E = sym_eig(M)
    assert np.allclose(w, [3.0, 1.0])
    # first nonzero component of each eigenvector is positive
    assert E[0, 0] > 0 and E[1, 1] > 0


def test_bisect_monotone():
    root = bisect_monotone(lambda x: x * x - 2.0, 0.0, 2.0, tol=1e-12)
    assert root == pytest.approx(math.sqrt(2.0), abs=1e-10)
    # decreasing function
    root = bisect_monotone(lambda x: 1.0 - x, -3.0, 5.0, tol=1e-12)
    assert root == pytest.approx(1.0, abs=1e-10)
    # endpoint root is returned
    assert bisect_monotone(lambda x: x, 0.0, 1.0, tol=1e-12) == 0.0
    with pytest.raises(DomainError):
        bisect_monotone(lambda x: x + 10.0, 0.0, 1.0, tol=1e-12)


def test_cubic_positive_root():
    # (x-1)(x+2)(x+3) = x^3 + 4x^2 + x - 6
    assert cubic_positive_root(1.0, 4.0, 1.0, -6.0) == pytest.approx(1.0, abs=1e-12)
    # largest real root is returned: (x-2)(x-1)(x+1) = x^3 - 2x^2 - x + 2
    assert cubic_positive_root(1.0, -2.0, -1.0, 2.0) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(DomainError):
        cubic_positive_root(0.0, 1.0, 1.0, 1.0)


def test_cubic_random_reconstruction():
    rng = np.random.default_rng(3)
    for _ in range(100):
        roots = np.sort(rng.uniform(-3.0, 3.0, size=3))
        c2 = -roots.sum()
        c1 = roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2]
        c0 = -roots.prod()
        got = cubic_positive_root(1.0, c2, c1, c0)
        assert got == pytest.approx(roots[-1], abs=1e-8)


def test_perron_eigenvalue():
    assert perron_eigenvalue(np.array([[0.0, 2.0], [2.0, 0.0]])) == pytest.approx(2.0, abs=1e-10)
    assert perron_eigenvalue(np.ones((2, 2))) == pytest.approx(2.0, abs=1e-10)
    # any irreducible column-stochastic matrix has Perron eigenvalue 1
    P = np.array([[0.9, 0.3], [0.1, 0.7]])
    assert perron_eigenvalue(P) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(DomainError):
        perron_eigenvalue(np.array([[1.0, 0.0], [0.0, 2.0]]))  # reducible


def test_perron_matches_numpy_on_random_positive():
    rng = np.random.default_rng(8)
    for _ in range(25):
        n = rng.integers(2, 6)
        M = rng.uniform(0.01, 1.0, size=(n, n))
        lam = perron_eigenvalue(M)
        ref = np.max(np.real(np.linalg.eigvals(M)))
        assert lam == pytest.approx(ref, rel=1e-9)


def test_maximize_concave_1d():
    x, v = maximize_concave_1d(lambda t: -(t - 0.3) ** 2, -1.0, 1.0)
    assert x == pytest.approx(0.3, abs=1e-7)
    assert v == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        maximize_concave_1d(lambda t: t, 1.0, 0.0)


def test_bits_per_nat():
    assert BITS_PER_NAT == pytest.approx(1.4426950408889634, abs=1e-15)


def test_rng_stream_reproducible_and_disjoint():
    a = RngStream(123)
    x1 = a.generator().standard_normal(8)
    x2 = RngStream(123).generator().standard_normal(8)
    assert np.array_equal(x1, x2)
    # shards differ from the root and from each other
    s0 = a.shard(0).generator().standard_normal(8)
    s1 = a.shard(1).generator().standard_normal(8)
    assert not np.array_equal(s0, s1)
    assert not np.array_equal(x1, s0)
    # nested sharding stays reproducible
    assert np.array_equal(
        a.shard(3).shard(2).generator().standard_normal(4),
        RngStream(123).shard(3).shard(2).generator().standard_normal(4),
    )
