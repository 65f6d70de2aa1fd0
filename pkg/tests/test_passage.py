import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reflected_mmbm import MmbmModel, ModelError, flip, passage_matrices, random_model
from reflected_mmbm.passage import crossing_probability, passage_pairs, passage_residual, perron_eigenvalue
from reflected_mmbm.simulate import SimConfig, estimate_passage

from conftest import random_models


@pytest.mark.parametrize("mu", [-1.3, 0.4, 2.0])
@pytest.mark.parametrize("q", [0.0, 0.7])
def test_scalar_pairs(mu, q):
    m = MmbmModel([[0.0]], [mu], [1.0])
    up, down = passage_pairs(m, q)
    g = math.sqrt(mu * mu + 2 * q)
    assert up.Lambda[0, 0] == pytest.approx(mu - g, abs=1e-13)
    assert down.Lambda[0, 0] == pytest.approx(-mu - g, abs=1e-13)
    assert up.Pi[0, 0] == down.Pi[0, 0] == 1.0


def test_scalar_negative_drift_up_probability():
    m = MmbmModel([[0.0]], [-1.0], [1.0])
    up = passage_matrices(m, 0.0, "up")
    assert up.Lambda[0, 0] == pytest.approx(-2.0, abs=1e-14)
    assert crossing_probability(up, 1.0)[0, 0] == pytest.approx(math.exp(-2.0), rel=1e-13)
    assert passage_matrices(m, 0.0, "down").Lambda[0, 0] == 0.0


def test_fluid_two_state():
    m = MmbmModel([[-1.0, 1.0], [1.0, -1.0]], [1.0, -2.0], [0.0, 0.0])
    up, down = passage_pairs(m, 0.0)
    np.testing.assert_allclose(down.Lambda, [[0.0]], atol=1e-14)
    np.testing.assert_allclose(down.Pi, [[1.0], [1.0]], atol=1e-14)
    # hand solution: Pi+ = (1, p), Lambda+ = p - 1 with (p - 1)(2p - 1) = 0, transient root p = 1/2
    np.testing.assert_allclose(up.Pi, [[1.0], [0.5]], atol=1e-14)
    np.testing.assert_allclose(up.Lambda, [[-0.5]], atol=1e-14)


def _check_invariants(m, pair):
    P, L = pair.Pi, pair.Lambda
    assert P.min(initial=0.0) >= -1e-10
    assert np.all(P.sum(axis=1) <= 1 + 1e-10)
    np.testing.assert_array_equal(pair.own_rows, np.eye(pair.index.size))
    if L.size:
        off = L - np.diag(np.diag(L))
        assert off.min() >= -1e-10
        assert np.all(L.sum(axis=1) <= 1e-10)
        assert pair.rho <= 1e-12
        assert pair.rho == pytest.approx(np.linalg.eigvals(L).real.max(), abs=1e-12)


@pytest.mark.parametrize("q", [0.0, 0.5, 2.0])
def test_invariants_random(q, mixed):
    for m in [mixed] + random_models(int(10 * q), 40, n_max=6, zero_variance=0.35, frozen=0.3):
        zd = q == 0 and m.is_zero_drift
        for d in ("up", "down"):
            pair = passage_matrices(m, q, d, zero_drift=zd)
            assert pair.residual <= 1e-8
            assert passage_residual(m, pair) == pair.residual
            _check_invariants(m, pair)
            if q > 0 and pair.index.size:
                assert pair.rho < 0
                assert np.all(pair.Lambda.sum(axis=1) < 0) or np.all(pair.Pi.sum(axis=1) <= 1)


def test_recurrent_direction_conserves_mass():
    for m in random_models(11, 20, zero_variance=0.3):
        d = "up" if m.kappa > 0 else "down"
        pair = passage_matrices(m, 0.0, d)
        assert pair.rho == pytest.approx(0.0, abs=1e-10)
        for x in (0.0, 0.5, 3.0):
            np.testing.assert_allclose(crossing_probability(pair, x).sum(axis=1), 1.0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_strong_markov_semigroup(seed, x, y):
    m = random_model(seed, 3, zero_variance=0.3)
    pair = passage_matrices(m, 0.3, "up")
    lhs = crossing_probability(pair, x + y)
    rhs = crossing_probability(pair, x) @ crossing_probability(pair, y)[pair.index]
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_killing_monotone():
    for m in random_models(12, 10, zero_variance=0.3):
        for d in ("up", "down"):
            lo = crossing_probability(passage_matrices(m, 0.2, d), 0.8)
            hi = crossing_probability(passage_matrices(m, 1.0, d), 0.8)
            assert np.all(lo >= hi - 1e-8)


def test_flip_duality(three):
    up = passage_matrices(three, 0.4, "up")
    dn = passage_matrices(flip(three), 0.4, "down")
    np.testing.assert_array_equal(up.Pi, dn.Pi)
    np.testing.assert_array_equal(up.Lambda, dn.Lambda)


def test_perron_eigenvalue():
    assert perron_eigenvalue(np.zeros((1, 1))) == 0.0
    assert perron_eigenvalue([[-0.3]]) == -0.3
    assert perron_eigenvalue(np.zeros((0, 0))) == -np.inf


def test_errors(three):
    pair = passage_matrices(three, 0.0, "up")
    np.testing.assert_array_equal(crossing_probability(pair, 0.0), pair.Pi)
    with pytest.raises(ModelError):
        crossing_probability(pair, -1.0)
    with pytest.raises(ModelError):
        passage_matrices(three, 0.0, "sideways")
    with pytest.raises(ModelError):
        passage_matrices(three, -0.1)
    with pytest.raises(ModelError):
        passage_matrices(MmbmModel([[-1, 1], [1, -1]], [0.0, 0.0], [0.0, 0.0]))


@pytest.mark.parametrize("direction", ["up", "down"])
def test_monte_carlo(three, direction):
    q, x = 0.3, 0.6
    exact = crossing_probability(passage_matrices(three, q, direction), x)
    est = estimate_passage(three, q, x, direction, SimConfig(replications=100_000, dt=0.02, seed=31))
    z = (est.mean - exact) / np.where(est.se > 0, est.se, np.inf)
    assert np.abs(z).max() <= 3.0


def test_monte_carlo_fluid_up_decay():
    m = MmbmModel([[-1.0, 1.0], [1.0, -1.0]], [1.0, -2.0], [0.0, 0.0])
    pair = passage_matrices(m, 0.0, "up")
    est = estimate_passage(m, 0.0, 2.0, "up", SimConfig(replications=50_000, horizon=200.0, dt=1e-2, seed=5))
    exact = crossing_probability(pair, 2.0)
    assert np.all(np.abs(est.mean - exact) <= 3 * est.se)
