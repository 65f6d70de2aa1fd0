import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from reflected_mmbm import MmbmModel, ModelError, NumericalError, DefectiveSpectrumError, random_model
from reflected_mmbm.linalg import (
    expm,
    is_irreducible,
    quadratic_eigenpairs,
    quadratic_residual,
    stationary_of_generator,
)


def taylor_expm(A, terms=60):
    """Truncated power series, only for small-norm arguments."""
    E = np.eye(A.shape[0])
    T = np.eye(A.shape[0])
    for k in range(1, terms):
        T = T @ A / k
        E = E + T
    return E


def test_expm_matches_power_series():
    rng = np.random.default_rng(0)
    for n in (1, 2, 4, 7):
        A = rng.normal(size=(n, n)) * 0.7
        np.testing.assert_allclose(expm(A), taylor_expm(A), rtol=1e-12, atol=1e-13)


def test_expm_diagonal_and_nilpotent():
    np.testing.assert_allclose(expm(np.diag([1.0, -2.0])), np.diag([math.e, math.exp(-2)]), rtol=1e-14)
    N = np.array([[0.0, 3.0], [0.0, 0.0]])
    np.testing.assert_allclose(expm(N), [[1.0, 3.0], [0.0, 1.0]], atol=1e-15)


def test_expm_empty_and_errors():
    assert expm(np.zeros((0, 0))).shape == (0, 0)
    with pytest.raises(ModelError):
        expm(np.zeros((2, 3)))
    with pytest.raises(ModelError):
        expm([[np.nan]])
    with pytest.raises(NumericalError):
        expm([[1000.0]])


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3), elements=st.floats(-2, 2)), st.floats(0, 1), st.floats(0, 1))
def test_expm_semigroup(A, s, t):
    np.testing.assert_allclose(expm(A * (s + t)), expm(A * s) @ expm(A * t), rtol=1e-9, atol=1e-9)


def test_generator_of_generator_rows_are_stochastic():
    m = random_model(1, 4)
    P = expm(m.Q * 0.7)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-14)
    assert P.min() >= 0


def test_irreducibility():
    assert is_irreducible([[0.0]])
    assert is_irreducible([[-1, 1], [1, -1]])
    assert not is_irreducible([[-1, 1], [0, 0]])
    assert is_irreducible([[-1, 1, 0], [0, -1, 1], [1, 0, -1]])


def test_stationary_two_state():
    a, b = 0.3, 1.7
    pi = stationary_of_generator([[-a, a], [b, -b]])
    np.testing.assert_allclose(pi, [b / (a + b), a / (a + b)], rtol=1e-14)


def test_stationary_errors():
    with pytest.raises(ModelError):
        stationary_of_generator([[-1, 1], [0, 0]])
    with pytest.raises(ModelError):
        stationary_of_generator([[-1, 2], [1, -1]])
    with pytest.raises(ModelError):
        stationary_of_generator(np.zeros((0, 0)))


def _degree(m):
    lin = (m.sigma2 == 0) & (m.mu != 0)
    return 2 * int((m.sigma2 > 0).sum()) + int(lin.sum())


@pytest.mark.parametrize("q", [0.0, 0.5, 3.0])
def test_root_count_and_residuals(q, mixed):
    for m in [mixed] + [random_model(s, 4, zero_variance=0.4, frozen=0.3) for s in range(20)]:
        if q == 0 and m.is_zero_drift:
            continue
        sd = quadratic_eigenpairs(m, q)
        assert sd.roots.size == _degree(m)
        for s, v in zip(sd.roots, sd.vectors.T):
            assert quadratic_residual(m, q, s, v) <= 1e-9 * max(1.0, abs(s)) ** 2
        if q > 0:
            assert (sd.roots.real < 0).sum() == m.phases.n_minus
            assert (sd.roots.real > 0).sum() == m.phases.n_plus


def test_zero_root_is_exact(three):
    sd = quadratic_eigenpairs(three, 0.0)
    k = np.argmin(np.abs(sd.roots))
    assert sd.roots[k] == 0
    v = sd.vectors[:, k]
    np.testing.assert_allclose(v / v[0], np.ones(3), atol=1e-15)


def test_scalar_roots():
    mu, q = 0.7, 0.4
    m = MmbmModel([[0.0]], [mu], [1.0])
    g = math.sqrt(mu * mu + 2 * q)
    np.testing.assert_allclose(np.sort(quadratic_eigenpairs(m, q).roots.real), [-mu - g, -mu + g], rtol=1e-13)


def test_zero_drift_is_defective_unless_requested():
    m = MmbmModel([[-1.0, 1.0], [1.0, -1.0]], [1.0, -1.0], [1.0, 1.0])
    with pytest.raises(DefectiveSpectrumError):
        quadratic_eigenpairs(m, 0.0)
    sd = quadratic_eigenpairs(m, 0.0, zero_drift=True)
    assert sd.roots.size == 3
    assert not sd.semisimple.all()


def test_permutation_invariance(three):
    p = [2, 0, 1]
    P = three.Q[np.ix_(p, p)]
    perm = MmbmModel(P, three.mu[p], three.sigma2[p])
    for q in (0.0, 1.0):
        a = np.sort_complex(np.round(quadratic_eigenpairs(three, q).roots, 10))
        b = np.sort_complex(np.round(quadratic_eigenpairs(perm, q).roots, 10))
        np.testing.assert_allclose(a, b, atol=1e-9)


def test_negative_q_rejected(three):
    with pytest.raises(ModelError):
        quadratic_eigenpairs(three, -1.0)
